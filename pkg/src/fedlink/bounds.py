"""Closed-form convergence machinery for both uplink paradigms.

Per-round optimality-gap bounds, their long-run limits, high-power
asymptotes, asymptotic rate constants, and the variance-decomposition
diagnostic that checks simulated transport error against the analytic
budget.  Everything here is deterministic; the simulator never feeds back
into these formulas except through the diagnostic.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import analog as an
from . import digital as dg
from . import tasks
from .tasks import AssumptionConstants

EULER_GAMMA = 0.57721566490153286061


# ---------------------------------------------------------------------------
# special function
# ---------------------------------------------------------------------------


def exp_integral_e1(x: float) -> float:
    """Exponential integral E1(x) = integral_x^inf exp(-t)/t dt for x > 0.

    Power series below x = 1, modified Lentz continued fraction above;
    relative accuracy around 1e-14 across the positive axis.
    """
    if not x > 0:
        raise ValueError("exp_integral_e1 requires x > 0")
    if x <= 1.0:
        total = -EULER_GAMMA - math.log(x)
        term = 1.0
        for n in range(1, 60):
            term *= -x / n
            contrib = -term / n
            total += contrib
            if abs(contrib) < 1e-18 * abs(total):
                break
        return total
    # E1(x) = exp(-x) * cf, cf = 1/(x+1- 1/(x+3- 4/(x+5- 9/(x+7- ...))))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    f = d
    for n in range(1, 200):
        a = -(n * n)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        if c == 0.0:
            c = tiny
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x) * f


# ---------------------------------------------------------------------------
# amplification factors and additive constants
# ---------------------------------------------------------------------------


def digital_amplification(alphas, inclusion, succ_prob) -> float:
    """Variance amplification sum_k alpha_k / (p_k r_k) from erasures plus
    partial participation."""
    alphas = np.asarray(alphas, dtype=float)
    inclusion = np.asarray(inclusion, dtype=float)
    succ_prob = np.asarray(succ_prob, dtype=float)
    if np.any(succ_prob <= 0) or np.any(inclusion <= 0):
        raise ValueError("probabilities must be positive")
    return float(np.sum(alphas / (succ_prob * inclusion)))


def analog_distortion_moment(gamma_th: float, rho: float) -> float:
    """Second moment of the per-device analog distortion factor."""
    if gamma_th < 0:
        raise ValueError("gamma_th must be nonnegative")
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    if gamma_th == 0.0:
        if rho < 1:
            raise ValueError(
                "distortion moment diverges at zero threshold with imperfect CSI"
            )
        return 1.0
    return math.exp(gamma_th) + (1 - rho * rho) * exp_integral_e1(gamma_th) * math.exp(
        2 * gamma_th
    ) / (2 * rho * rho)


def analog_amplification(alphas, inclusion, gamma_th: float, rho: float) -> float:
    """Variance amplification sum_k (alpha_k/r_k) * m2 - 1 of the analog
    aggregate, with m2 the distortion second moment."""
    alphas = np.asarray(alphas, dtype=float)
    inclusion = np.asarray(inclusion, dtype=float)
    m2 = analog_distortion_moment(gamma_th, rho)
    return float(np.sum(alphas / inclusion) * m2 - 1.0)


def quantization_variance_bound(dim: int, bits: int, grad_bound: float) -> float:
    """Worst-case per-vector quantization error energy d*gamma^2/(4 (2^b-1)^2),
    using the gradient norm bound as the modulus-range bound."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    intervals = (1 << bits) - 1
    return dim * grad_bound**2 / (4.0 * intervals**2)


def aircomp_noise_floor(
    bandwidth: float,
    noise_psd: float,
    grad_bound: float,
    gamma_th: float,
    rho: float,
    p_max: float,
    alphas,
    inclusion,
    path_losses,
) -> float:
    """Receiver-noise constant of the analog gap bound (per-coordinate form).

    Equals the scaled-noise variance per coordinate under the worst-case
    static power scaling.  Note it carries no dimension factor; the
    variance-decomposition diagnostic reports the d-scaled variant alongside.
    """
    if gamma_th <= 0:
        raise ValueError("noise floor requires a positive truncation threshold")
    alphas = np.asarray(alphas, dtype=float)
    inclusion = np.asarray(inclusion, dtype=float)
    path_losses = np.asarray(path_losses, dtype=float)
    worst = float(np.max(alphas**2 / (inclusion**2 * path_losses**2)))
    return (
        bandwidth * noise_psd * grad_bound**2 * math.exp(2 * gamma_th)
        / (2 * p_max * rho**2 * gamma_th)
    ) * worst


def max_learning_rate(constants: AssumptionConstants, amplification: float) -> float:
    """Largest step size for which the contraction argument goes through."""
    if amplification <= 0:
        raise ValueError("amplification must be positive")
    return constants.mu / (2 * constants.lipschitz**2 * amplification)


# ---------------------------------------------------------------------------
# bound inputs / report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundInputs:
    constants: AssumptionConstants
    eta: float
    alphas: np.ndarray
    inclusion: np.ndarray
    path_losses: np.ndarray
    succ_prob: np.ndarray
    quant_bits: int
    gamma_th: float
    rho: float
    bandwidth: float
    noise_psd: float
    p_max: float
    dim: int
    init_dist_sq: float
    snr_threshold: float = 0.0
    n_active: int = 0
    subbands: int = 0

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        for arr in (self.inclusion, self.succ_prob):
            if np.any(np.asarray(arr) <= 0) or np.any(np.asarray(arr) > 1):
                raise ValueError("probability entries must lie in (0, 1]")


@dataclass(frozen=True)
class BoundReport:
    amp_digital: float
    amp_analog: float
    quant_var_bound: float
    noise_floor: float
    contraction_digital: float
    contraction_analog: float
    trajectory_digital: Optional[np.ndarray]
    trajectory_analog: Optional[np.ndarray]
    limit_digital: float
    limit_analog: float
    asymptote_digital: float
    asymptote_analog: float
    eps_power: float
    eps_device_1: float
    eps_device_2: float


def _amplification(inputs: BoundInputs, paradigm: str) -> float:
    if paradigm == "digital":
        return digital_amplification(inputs.alphas, inputs.inclusion, inputs.succ_prob)
    if paradigm == "analog":
        return analog_amplification(
            inputs.alphas, inputs.inclusion, inputs.gamma_th, inputs.rho
        )
    raise ValueError(f"unknown paradigm {paradigm!r}")


def _additive_numerator(inputs: BoundInputs, paradigm: str, amp: float) -> float:
    c = inputs.constants
    if paradigm == "digital":
        phi = quantization_variance_bound(inputs.dim, inputs.quant_bits, c.grad_bound)
        return inputs.eta * (
            c.lipschitz * phi + 2 * c.lipschitz**3 * c.noniid_bound**2
        ) * amp
    noise = aircomp_noise_floor(
        inputs.bandwidth, inputs.noise_psd, c.grad_bound, inputs.gamma_th,
        inputs.rho, inputs.p_max, inputs.alphas, inputs.inclusion,
        inputs.path_losses,
    )
    return inputs.eta * (
        c.lipschitz * noise + 2 * c.lipschitz**3 * c.noniid_bound**2 * amp
    )


def _denominator(inputs: BoundInputs, amp: float) -> float:
    c = inputs.constants
    den = 2 * c.mu - 4 * inputs.eta * c.lipschitz**2 * amp
    if den <= 0:
        raise ValueError(
            "learning rate violates the contraction hypothesis "
            f"(eta <= {max_learning_rate(c, amp):.6g} required)"
        )
    return den


def contraction_factor(inputs: BoundInputs, paradigm: str) -> float:
    amp = _amplification(inputs, paradigm)
    c = inputs.constants
    return 1 - inputs.eta * c.mu + 2 * inputs.eta**2 * c.lipschitz**2 * amp


def limit_gap(inputs: BoundInputs, paradigm: str) -> float:
    """Long-run value of the per-round gap bound."""
    amp = _amplification(inputs, paradigm)
    return _additive_numerator(inputs, paradigm, amp) / _denominator(inputs, amp)


def limit_gap_digital(inputs: BoundInputs) -> float:
    return limit_gap(inputs, "digital")


def limit_gap_analog(inputs: BoundInputs) -> float:
    return limit_gap(inputs, "analog")


def gap_bound_trajectory(inputs: BoundInputs, paradigm: str, rounds: int) -> np.ndarray:
    """Gap bound after m+1 updates, for m = 0..rounds-1."""
    amp = _amplification(inputs, paradigm)
    limit = _additive_numerator(inputs, paradigm, amp) / _denominator(inputs, amp)
    c = inputs.constants
    contraction = contraction_factor(inputs, paradigm)
    powers = contraction ** np.arange(1, rounds + 1, dtype=float)
    return 0.5 * c.lipschitz * powers * inputs.init_dist_sq + limit


def gap_bound_at(inputs: BoundInputs, paradigm: str, m: int) -> float:
    """Gap bound after m+1 updates, without materializing the trajectory."""
    amp = _amplification(inputs, paradigm)
    limit = _additive_numerator(inputs, paradigm, amp) / _denominator(inputs, amp)
    c = inputs.constants
    contraction = contraction_factor(inputs, paradigm)
    return 0.5 * c.lipschitz * contraction ** (m + 1) * inputs.init_dist_sq + limit


def asymptote_digital(inputs: BoundInputs) -> float:
    """High-power limit of the digital gap bound (uniform weights/inclusion)."""
    _require_uniform(inputs)
    c = inputs.constants
    k = inputs.alphas.shape[0]
    n = inputs.n_active
    phi = quantization_variance_bound(inputs.dim, inputs.quant_bits, c.grad_bound)
    den = 2 * c.mu * n - 4 * inputs.eta * c.lipschitz**2 * k
    if den <= 0:
        raise ValueError("learning rate too large for the high-power asymptote")
    return inputs.eta * (c.lipschitz * phi + 2 * c.lipschitz**3 * c.noniid_bound**2) * k / den


def asymptote_analog(inputs: BoundInputs) -> float:
    """High-power limit of the analog gap bound (uniform weights/inclusion)."""
    _require_uniform(inputs)
    c = inputs.constants
    k = inputs.alphas.shape[0]
    n = inputs.n_active
    m2 = analog_distortion_moment(inputs.gamma_th, inputs.rho)
    spread = k * m2 - n
    den = 2 * c.mu * n - 4 * inputs.eta * c.lipschitz**2 * spread
    if den <= 0:
        raise ValueError("learning rate too large for the high-power asymptote")
    return 2 * inputs.eta * c.lipschitz**3 * c.noniid_bound**2 * spread / den


def _require_uniform(inputs: BoundInputs):
    k = inputs.alphas.shape[0]
    if inputs.n_active <= 0:
        raise ValueError("asymptotes need the participant count")
    if not (
        np.allclose(inputs.alphas, 1.0 / k, rtol=1e-9, atol=0)
        and np.allclose(inputs.inclusion, inputs.n_active / k, rtol=1e-9, atol=0)
    ):
        raise ValueError("asymptotes assume uniform weights and inclusion")


def rate_constants(inputs: BoundInputs):
    """Asymptotic-rate constants (power decay, device-growth pair)."""
    ls = np.asarray(inputs.path_losses, dtype=float)
    eps_power = float(
        np.max(
            inputs.bandwidth * inputs.noise_psd * inputs.snr_threshold
            / (2 * inputs.n_active * ls**2)
        )
    )
    eps_dev_1 = inputs.bandwidth * inputs.noise_psd / (2 * inputs.p_max * ls[-1] ** 2)
    eps_dev_2 = (inputs.quant_bits + 1) / inputs.subbands
    return eps_power, eps_dev_1, eps_dev_2


def bound_report(inputs: BoundInputs, rounds: int = 0) -> BoundReport:
    """Evaluate every closed-form quantity once, for reporting."""
    c = inputs.constants
    amp_d = _amplification(inputs, "digital")
    amp_a = _amplification(inputs, "analog")
    phi = quantization_variance_bound(inputs.dim, inputs.quant_bits, c.grad_bound)
    noise = aircomp_noise_floor(
        inputs.bandwidth, inputs.noise_psd, c.grad_bound, inputs.gamma_th,
        inputs.rho, inputs.p_max, inputs.alphas, inputs.inclusion, inputs.path_losses,
    )
    eps_power, eps1, eps2 = rate_constants(inputs)
    return BoundReport(
        amp_digital=amp_d,
        amp_analog=amp_a,
        quant_var_bound=phi,
        noise_floor=noise,
        contraction_digital=contraction_factor(inputs, "digital"),
        contraction_analog=contraction_factor(inputs, "analog"),
        trajectory_digital=gap_bound_trajectory(inputs, "digital", rounds) if rounds else None,
        trajectory_analog=gap_bound_trajectory(inputs, "analog", rounds) if rounds else None,
        limit_digital=limit_gap(inputs, "digital"),
        limit_analog=limit_gap(inputs, "analog"),
        asymptote_digital=asymptote_digital(inputs),
        asymptote_analog=asymptote_analog(inputs),
        eps_power=eps_power,
        eps_device_1=eps1,
        eps_device_2=eps2,
    )


# ---------------------------------------------------------------------------
# variance-decomposition diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceDiagnostic:
    paradigm: str
    n_samples: int
    empirical_mse: float           # mean ||g_hat - g||^2 over samples
    heterogeneity_term: float      # exact weighted gradient spread at this state
    distortion_bound: float        # per-device distortion budget
    noise_bound: float             # analog only: worst-case scaled-noise energy
    noise_empirical: float         # analog only: realized mean noise energy
    total_bound: float
    noise_floor_per_coord: float   # analog constant as used in the gap bound
    noise_floor_dim_scaled: float  # the same constant times the dimension
    satisfied: bool


def variance_decomposition(
    task: tasks.LearningTask,
    state: tasks.ModelState,
    samples: Sequence,
    *,
    succ_prob: Optional[np.ndarray] = None,
    gamma_th: float = 0.0,
    rho: float = 1.0,
    bandwidth: float = 0.0,
    noise_psd: float = 0.0,
    p_max: float = 0.0,
    quant_bits: int = 0,
) -> VarianceDiagnostic:
    """Compare simulated aggregate error energy against the analytic budget.

    ``samples`` holds independent transport outcomes generated at the fixed
    model state; the analytic side is assembled from the task constants and
    the same link parameters that produced the samples.
    """
    if len(samples) < 1000:
        raise ValueError("variance decomposition needs at least 1000 samples")
    alphas = task.alphas
    inclusion = task.inclusion_probs
    c = task.constants

    grads = [tasks.local_gradient(task, k, state.weights) for k in range(task.num_devices)]
    g_ref = tasks.global_gradient(grads, alphas)
    hetero = float(
        sum(a * float(g @ g) for a, g in zip(alphas, grads)) - float(g_ref @ g_ref)
    )
    dist_sq = float(
        (state.weights - task.global_optimum) @ (state.weights - task.global_optimum)
    )
    per_device_sq_bound = 2 * c.lipschitz**2 * dist_sq + 2 * c.lipschitz**2 * c.noniid_bound**2

    err = np.array([float((s.g_hat - g_ref) @ (s.g_hat - g_ref)) for s in samples])
    empirical = float(err.mean())

    first = samples[0]
    if isinstance(first, dg.DigitalRoundOutcome):
        paradigm = "digital"
        if succ_prob is None:
            raise ValueError("digital diagnostic needs the success probabilities")
        phi = quantization_variance_bound(task.dim, quant_bits, c.grad_bound)
        amp = digital_amplification(alphas, inclusion, succ_prob)
        distortion = phi * amp + (amp - 1.0) * per_device_sq_bound
        noise_bound = 0.0
        noise_emp = 0.0
        floor = 0.0
    elif isinstance(first, an.AnalogRoundOutcome):
        paradigm = "analog"
        amp = analog_amplification(alphas, inclusion, gamma_th, rho)
        distortion = amp * per_device_sq_bound
        lam = an.compensation(gamma_th, rho)
        if gamma_th > 0:
            zeta_static = an.static_scaling(
                p_max, gamma_th, lam, alphas, inclusion, task.path_losses, c.grad_bound
            )
            noise_bound = task.dim * bandwidth * noise_psd / (2 * zeta_static**2)
            floor = aircomp_noise_floor(
                bandwidth, noise_psd, c.grad_bound, gamma_th, rho, p_max,
                alphas, inclusion, task.path_losses,
            )
        else:
            noise_bound = math.inf
            floor = math.inf
        noise_emp = float(np.mean([s.noise_energy for s in samples]))
    else:
        raise TypeError("samples must be digital or analog round outcomes")

    total = distortion + noise_bound + hetero
    return VarianceDiagnostic(
        paradigm=paradigm,
        n_samples=len(samples),
        empirical_mse=empirical,
        heterogeneity_term=hetero,
        distortion_bound=distortion,
        noise_bound=noise_bound,
        noise_empirical=noise_emp,
        total_bound=total,
        noise_floor_per_coord=floor,
        noise_floor_dim_scaled=task.dim * floor if math.isfinite(floor) else math.inf,
        satisfied=bool(empirical <= total),
    )
