"""Digital uplink: stochastic quantization, fixed-rate transmission with
outage erasure, and debiased aggregation at the server.

Each participant quantizes its gradient to ``b`` bits per coordinate plus a
sign bit, the modulus range is carried in ``q`` side bits, and the packet
survives iff the fixed rate fits the instantaneous capacity (or, in analytic
mode, with the closed-form success probability directly).  Surviving
contributions are scaled by 1/(p_k r_k) so the aggregate stays unbiased.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import channel as ch
from . import tasks
from ._kernels import add_scaled, quant_contrib, reconstruct, stochastic_levels

LN2 = math.log(2.0)


@dataclass(frozen=True)
class QuantizedGradient:
    g_min: float
    g_max: float
    bits: int
    levels: np.ndarray   # int64 grid indices in [0, 2^bits - 1]
    signs: np.ndarray    # +-1.0 per coordinate, sign(0) = +1


@dataclass(frozen=True)
class DigitalRoundOutcome:
    g_hat: np.ndarray
    participants: np.ndarray
    success: np.ndarray       # per device; False for non-participants
    xi: np.ndarray            # per device, in {0, 1/p_k}; 0 for non-participants
    snr_threshold: float
    delay: float


@dataclass(frozen=True)
class DigitalLinkConfig:
    radio: ch.RadioParams
    n_active: int
    quant_bits: int
    range_bits: int
    snr_threshold: float
    succ_prob: np.ndarray     # per device, closed form at full transmit power
    outage_mode: str = "empirical"
    delay: float = 0.0


def quantize(g: np.ndarray, bits: int, rng: np.random.Generator) -> QuantizedGradient:
    """Stochastically round each coordinate's modulus onto the shared grid.

    The grid spans [min |g_i|, max |g_i|] with 2^bits - 1 equal intervals; a
    modulus rounds to a bracketing grid point with probability proportional
    to proximity, which makes the reconstruction unbiased coordinatewise.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    g = np.ascontiguousarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient must be finite")
    mag = np.abs(g)
    g_min = float(mag.min())
    g_max = float(mag.max())
    n_points = 1 << bits
    delta = (g_max - g_min) / (n_points - 1)
    levels = np.empty(g.shape[0], dtype=np.int64)
    u = rng.random(g.shape[0])
    stochastic_levels(mag, g_min, delta, n_points, u, levels)
    signs = np.where(g < 0, -1.0, 1.0)
    return QuantizedGradient(g_min, g_max, bits, levels, signs)


def dequantize(q: QuantizedGradient) -> np.ndarray:
    """Reconstruct the signed values encoded by a QuantizedGradient."""
    n_points = 1 << q.bits
    delta = (q.g_max - q.g_min) / (n_points - 1)
    out = np.empty(q.levels.shape[0])
    reconstruct(q.levels, q.signs, q.g_min, delta, out)
    return out


def payload_bits(dim: int, bits: int, range_bits: int) -> int:
    """Total uplink payload: dim*(bits+1) level+sign bits plus range overhead."""
    return dim * (bits + 1) + range_bits


def min_snr_threshold(n_active: int, dim: int, bits: int, bandwidth: float, t_max: float) -> float:
    """Smallest rate parameter that fits the payload in the delay budget.

    Solves N*d*(b+1) / (B*log2(1+theta)) = t_max for theta and nudges the
    result up by at most a few ulps so the realized delay never exceeds the
    budget in floating point.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    exponent = n_active * dim * (bits + 1) / (bandwidth * t_max)
    theta = math.expm1(exponent * LN2)
    if not math.isfinite(theta):
        raise ValueError("delay budget requires an unrepresentable rate")
    if theta > 0:
        while tx_delay_digital(n_active, dim, bits, bandwidth, theta) > t_max:
            theta = math.nextafter(theta, math.inf)
    return theta


def tx_delay_digital(n_active: int, dim: int, bits: int, bandwidth: float, snr_threshold: float) -> float:
    """Per-round digital uplink delay at the fixed rate, in seconds."""
    if snr_threshold <= 0:
        raise ValueError("snr_threshold must be positive")
    rate_exp = math.log1p(snr_threshold) / LN2
    return n_active * dim * (bits + 1) / (bandwidth * rate_exp)


def digital_round(
    task: tasks.LearningTask,
    state: tasks.ModelState,
    participants: np.ndarray,
    channels: ch.ChannelSample,
    cfg: DigitalLinkConfig,
    rng: np.random.Generator,
    outage_rng: Optional[np.random.Generator] = None,
    grads: Optional[Sequence[np.ndarray]] = None,
) -> DigitalRoundOutcome:
    """One digital uplink round at the current model state.

    Every participant transmits at full power; the packet survives the
    empirical capacity test (or an analytic Bernoulli draw), and surviving
    reconstructions are aggregated with the 1/(p_k r_k) debiasing weights.
    """
    if len(participants) == 0:
        raise ValueError("participant set is empty")
    if outage_rng is None:
        outage_rng = rng
    n_dev = task.num_devices
    n_points = 1 << cfg.quant_bits
    radio = cfg.radio
    sub_bw = radio.bandwidth / cfg.n_active

    if grads is None:
        grads = [tasks.local_gradient(task, int(k), state.weights) for k in participants]
    tasks.check_gradient_bound(task, grads, participants)

    if cfg.outage_mode == "analytic":
        draws = outage_rng.random(n_dev)
    elif cfg.outage_mode != "empirical":
        raise ValueError(f"unknown outage mode {cfg.outage_mode!r}")

    g_hat = np.zeros(task.dim)
    success = np.zeros(n_dev, dtype=bool)
    xi = np.zeros(n_dev)
    u_all = rng.random((len(participants), task.dim))
    for j, k in enumerate(participants):
        k = int(k)
        dev = task.devices[k]
        if cfg.outage_mode == "empirical":
            snr = (
                radio.p_max * dev.path_loss**2 * abs(channels.h[k]) ** 2
                / (sub_bw * radio.noise_psd)
            )
            ok = snr >= cfg.snr_threshold
        else:
            ok = draws[k] < cfg.succ_prob[k]
        if not ok:
            continue
        success[k] = True
        xi[k] = 1.0 / cfg.succ_prob[k]
        coeff = dev.alpha * xi[k] / dev.inclusion
        quant_contrib(np.ascontiguousarray(grads[j]), u_all[j], n_points, coeff, g_hat)
    return DigitalRoundOutcome(
        g_hat=g_hat,
        participants=np.asarray(participants),
        success=success,
        xi=xi,
        snr_threshold=cfg.snr_threshold,
        delay=cfg.delay,
    )
