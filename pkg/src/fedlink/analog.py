"""Analog uplink: over-the-air aggregation through truncated channel inversion.

Participants whose estimated power gain clears the threshold invert their
channel estimate (scaled for aggregation weight, inclusion debiasing and CSI
compensation); the receiver takes the real part of the superposed signal and
rescales by the common power-control factor.  Deep-faded devices stay silent.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import channel as ch
from . import tasks
from ._kernels import add_scaled

POWER_SLACK = 1e-12


def _gain(z: complex) -> float:
    # re^2 + im^2, the same expression Re{conj(z) z} reduces to, so the
    # perfect-CSI distortion ratio cancels to exactly 1.0.
    return z.real * z.real + z.imag * z.imag


@dataclass(frozen=True)
class AnalogPrecoder:
    beta: complex
    truncated: bool
    compensation: float
    scaling: float


@dataclass(frozen=True)
class AnalogRoundOutcome:
    g_hat: np.ndarray
    participants: np.ndarray
    xi: np.ndarray              # per device; 0 when truncated or not selected
    truncated: np.ndarray       # per device; True for truncated participants
    scaling: float
    noise_energy: float         # realized ||scaled receiver noise||^2
    max_device_power: float
    all_truncated: bool
    delay: float


@dataclass(frozen=True)
class AnalogLinkConfig:
    radio: ch.RadioParams
    gamma_th: float
    grad_bound: float           # certified gradient-norm bound, sizes the static scaling
    zeta_mode: str = "adaptive"
    delay: float = 0.0
    include_noise: bool = True

    def __post_init__(self):
        if self.zeta_mode not in ("adaptive", "static"):
            raise ValueError(f"unknown zeta mode {self.zeta_mode!r}")
        if self.zeta_mode == "static" and self.gamma_th <= 0:
            raise ValueError("static power scaling requires a positive truncation threshold")


def compensation(gamma_th: float, rho: float) -> float:
    """CSI compensation factor exp(gamma_th)/rho that restores unbiasedness."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if gamma_th < 0:
        raise ValueError("gamma_th must be nonnegative")
    return math.exp(gamma_th) / rho


def _compensation_for_mean(gamma_th: float, rho: float, mean_gain: float) -> float:
    # Generalizes `compensation` to either power convention; equals it at mean 1.
    if rho <= 0:
        raise ValueError("rho must be positive")
    return math.exp(gamma_th / mean_gain) / rho


def precoder(
    h_hat: complex,
    alpha: float,
    inclusion: float,
    path_loss: float,
    gamma_th: float,
    lam: float,
    zeta: float,
) -> AnalogPrecoder:
    """Truncated channel inversion for one device."""
    gain = _gain(complex(h_hat))
    if gain >= gamma_th:
        beta = zeta * lam * alpha * np.conj(h_hat) / (inclusion * path_loss * gain)
        return AnalogPrecoder(complex(beta), False, lam, zeta)
    return AnalogPrecoder(0j, True, lam, zeta)


def static_scaling(
    p_max: float,
    gamma_th: float,
    lam: float,
    alphas: np.ndarray,
    inclusion: np.ndarray,
    path_losses: np.ndarray,
    grad_bound: float,
) -> float:
    """Worst-case power scaling: valid for any non-truncated channel draw and
    any gradient within the certified norm bound."""
    if gamma_th <= 0:
        raise ValueError("static scaling requires a positive truncation threshold")
    ratio = float(np.min(inclusion * path_losses / alphas))
    return math.sqrt(p_max * gamma_th) * ratio / (lam * grad_bound)


def _degenerate_scaling(p_max, lam, alphas, inclusion, path_losses, grad_bound):
    # Used only in rounds where every participant transmits zero power
    # (all truncated or all-zero gradients), where any positive value is safe.
    ratio = float(np.min(inclusion * path_losses / alphas))
    return math.sqrt(p_max) * ratio / (lam * grad_bound)


def scaling_factor(
    participants: Sequence[int],
    grads: Sequence[np.ndarray],
    channels: ch.ChannelSample,
    alphas: np.ndarray,
    inclusion: np.ndarray,
    path_losses: np.ndarray,
    p_max: float,
    gamma_th: float,
    lam: float,
) -> float:
    """Largest common scaling that keeps every transmitting device at or
    below the power budget; at least one device lands exactly on it."""
    best = math.inf
    for j, k in enumerate(participants):
        k = int(k)
        gain = _gain(complex(channels.h_hat[k]))
        if gain < gamma_th:
            continue
        norm = float(np.linalg.norm(grads[j]))
        if norm == 0.0:
            continue
        cap = (
            math.sqrt(p_max) * inclusion[k] * path_losses[k] * math.sqrt(gain)
            / (lam * alphas[k] * norm)
        )
        best = min(best, cap)
    if not math.isfinite(best):
        raise ValueError("no transmitting device constrains the power scaling")
    return best


def analog_round(
    task: tasks.LearningTask,
    state: tasks.ModelState,
    participants: np.ndarray,
    channels: ch.ChannelSample,
    cfg: AnalogLinkConfig,
    rng: np.random.Generator,
    grads: Optional[Sequence[np.ndarray]] = None,
) -> AnalogRoundOutcome:
    """One over-the-air aggregation round at the current model state."""
    if len(participants) == 0:
        raise ValueError("participant set is empty")
    radio = cfg.radio
    lam = _compensation_for_mean(cfg.gamma_th, radio.csi_correlation, channels.mean_gain)
    alphas = task.alphas
    inclusion = task.inclusion_probs
    path_losses = task.path_losses

    if grads is None:
        grads = [tasks.local_gradient(task, int(k), state.weights) for k in participants]
    tasks.check_gradient_bound(task, grads, participants)

    if cfg.zeta_mode == "static":
        zeta = static_scaling(
            radio.p_max, cfg.gamma_th, lam, alphas, inclusion, path_losses, cfg.grad_bound
        )
    else:
        try:
            zeta = scaling_factor(
                participants, grads, channels, alphas, inclusion, path_losses,
                radio.p_max, cfg.gamma_th, lam,
            )
        except ValueError:
            if cfg.gamma_th > 0:
                zeta = static_scaling(
                    radio.p_max, cfg.gamma_th, lam, alphas, inclusion, path_losses,
                    cfg.grad_bound,
                )
            else:
                zeta = _degenerate_scaling(
                    radio.p_max, lam, alphas, inclusion, path_losses, cfg.grad_bound
                )

    n_dev = task.num_devices
    xi = np.zeros(n_dev)
    truncated = np.zeros(n_dev, dtype=bool)
    g_hat = np.zeros(task.dim)
    max_power = 0.0
    any_tx = False
    for j, k in enumerate(participants):
        k = int(k)
        h_hat = complex(channels.h_hat[k])
        h = complex(channels.h[k])
        gain = _gain(h_hat)
        if gain < cfg.gamma_th:
            truncated[k] = True
            continue
        any_tx = True
        beta_mag = zeta * lam * alphas[k] / (inclusion[k] * path_losses[k] * math.sqrt(gain))
        power = beta_mag**2 * float(grads[j] @ grads[j])
        if power > radio.p_max * (1 + POWER_SLACK):
            raise RuntimeError(
                f"device {k} power {power:.6g} exceeds budget {radio.p_max:.6g}"
            )
        max_power = max(max_power, power)
        xi[k] = lam * (h.real * h_hat.real + h.imag * h_hat.imag) / gain
        add_scaled(g_hat, alphas[k] * xi[k] / inclusion[k], np.ascontiguousarray(grads[j]))

    noise_energy = 0.0
    if cfg.include_noise:
        scale = math.sqrt(radio.bandwidth * radio.noise_psd / 2.0) / zeta
        noise = scale * rng.standard_normal(task.dim)
        noise_energy = float(noise @ noise)
        add_scaled(g_hat, 1.0, noise)
    return AnalogRoundOutcome(
        g_hat=g_hat,
        participants=np.asarray(participants),
        xi=xi,
        truncated=truncated,
        scaling=zeta,
        noise_energy=noise_energy,
        max_device_power=max_power,
        all_truncated=not any_tx,
        delay=cfg.delay,
    )


def tx_delay_analog(dim: int, subbands: int, bandwidth: float) -> float:
    """Per-round analog uplink delay dim*subbands/bandwidth, independent of
    how many devices transmit."""
    if dim <= 0 or subbands <= 0 or bandwidth <= 0:
        raise ValueError("dim, subbands and bandwidth must be positive")
    return dim * subbands / bandwidth
