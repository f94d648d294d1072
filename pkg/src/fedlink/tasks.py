"""Federated optimization problems with exactly computable regularity constants.

Two task families:

* quadratic (primary): per-device losses ``F_k(w) = 0.5 (w - w_k^*)' A_k (w - w_k^*)``
  with SPD curvature matrices whose spectra are placed exactly, so the
  strong-convexity and smoothness moduli are exact, local optima sit on a
  sphere of configurable radius around the global optimum, and the gradient
  norm bound over a stated ball is computed by solving the corresponding
  sphere-constrained maximization exactly.
* logistic (secondary): l2-regularized logistic regression on synthetic data;
  constants are valid bounds rather than exact values.
"""

import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from ._kernels import add_scaled


class GammaBoundExceeded(RuntimeError):
    """A local gradient left the certified norm ball; the trial is invalid."""


@dataclass(frozen=True)
class AssumptionConstants:
    """Regularity constants of a task.

    mu: strong-convexity modulus of every local loss.
    lipschitz: gradient Lipschitz modulus (smoothness) of every local loss.
    grad_bound: uniform bound on local gradient norms over the working ball.
    noniid_bound: uniform bound on the local-to-global optimum distance.
    """

    mu: float
    lipschitz: float
    grad_bound: float
    noniid_bound: float

    def __post_init__(self):
        if not (0 < self.mu <= self.lipschitz):
            raise ValueError("need 0 < mu <= lipschitz")
        if self.grad_bound < 0 or self.noniid_bound < 0:
            raise ValueError("constants must be nonnegative")


@dataclass(frozen=True)
class DeviceProfile:
    alpha: float            # aggregation weight, sums to 1 over devices
    inclusion: float        # per-round selection probability, in (0, 1]
    path_loss: float        # large-scale channel amplitude
    local_data: Any         # quadratic: SPD matrix; logistic: (X, y)
    local_optimum: np.ndarray


@dataclass(frozen=True)
class LearningTask:
    family: str
    dim: int
    devices: tuple
    global_optimum: np.ndarray
    constants: AssumptionConstants
    # quadratic only: aggregate curvature sum_k alpha_k A_k, used for the
    # exact optimality-gap quadratic form.
    agg_curvature: Optional[np.ndarray] = None
    # logistic only: cached optimal loss value and a held-out set.
    opt_value: Optional[float] = None
    holdout: Optional[tuple] = None
    # ball radius (around the global optimum) over which grad_bound holds.
    ball_radius: float = 0.0

    @property
    def num_devices(self) -> int:
        return len(self.devices)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([dev.alpha for dev in self.devices])

    @property
    def inclusion_probs(self) -> np.ndarray:
        return np.array([dev.inclusion for dev in self.devices])

    @property
    def path_losses(self) -> np.ndarray:
        return np.array([dev.path_loss for dev in self.devices])


@dataclass(frozen=True)
class ModelState:
    round: int
    weights: np.ndarray


# ---------------------------------------------------------------------------
# quadratic task construction
# ---------------------------------------------------------------------------


def _random_orthogonal(dim, rng):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def _spread_local_optima(mats, alphas, radius, rng, max_restarts=4):
    """Offsets u_k with ||u_k|| = radius and sum_k alpha_k A_k u_k ~ 0.

    Alternating projection between the linear nullspace of the weighted-sum
    constraint and the product of spheres.  The sphere projection runs last so
    the norms are exact; the linear residual lands at machine precision.
    """
    n_dev = len(mats)
    dim = mats[0].shape[0]
    if radius == 0.0:
        return np.zeros((n_dev, dim))
    if n_dev < 2:
        raise ValueError("a positive heterogeneity radius needs at least 2 devices")
    weighted = np.array([a * m for a, m in zip(alphas, mats)])
    gram = np.einsum("kij,kjl->il", weighted, weighted.transpose(0, 2, 1))
    scale = radius * sum(a * np.linalg.norm(m, 2) for a, m in zip(alphas, mats))
    for _ in range(max_restarts):
        u = rng.standard_normal((n_dev, dim))
        u *= radius / np.linalg.norm(u, axis=1, keepdims=True)
        for _ in range(2000):
            resid = np.einsum("kij,kj->i", weighted, u)
            if np.linalg.norm(resid) <= 1e-14 * scale:
                return u
            corr = np.linalg.solve(gram, resid)
            u -= np.einsum("kij,j->ki", weighted, corr)
            u *= radius / np.linalg.norm(u, axis=1, keepdims=True)
        resid = np.einsum("kij,kj->i", weighted, u)
        if np.linalg.norm(resid) <= 1e-11 * scale:
            return u
    raise RuntimeError("local-optimum placement did not converge")


def _max_grad_norm_on_ball(mat, center_offset, radius):
    """Exact max of ||A (s - u)|| over ||s|| <= radius (u = center_offset).

    In the eigenbasis of A this is the maximization of a convex quadratic over
    a sphere; the stationarity condition gives a scalar secular equation in
    the multiplier, solved by bisection.  Handles the degenerate case where
    the offset has no component on the top eigenspace.
    """
    if radius == 0.0:
        return float(np.linalg.norm(mat @ center_offset))
    evals, evecs = np.linalg.eigh(mat)
    d = evals**2
    ub = evecs.T @ center_offset
    d_top = d[-1]
    top = d - d_top >= -1e-12 * d_top
    r2 = radius * radius

    weight = d * d * ub * ub  # numerator of the secular sum, per eigendirection
    if np.sum(weight[top]) <= 1e-28 * max(np.sum(weight), 1.0):
        # Offset orthogonal to the top eigenspace: multiplier pins at d_top and
        # the remaining budget goes to a free top-eigenspace component.
        fixed = np.zeros_like(ub)
        rest = ~top
        fixed[rest] = -d[rest] * ub[rest] / (d_top - d[rest])
        n_fixed = float(np.sum(fixed[rest] ** 2))
        if n_fixed <= r2:
            val = np.sum(d[rest] * (ub[rest] * d_top / (d_top - d[rest])) ** 2)
            val += np.sum(d[top] * ub[top] ** 2)  # ~0 by the branch condition
            val += d_top * (r2 - n_fixed)
            return math.sqrt(float(val))
        # Otherwise the root exists just above d_top; fall through to bisection.

    def norm_sq(sigma):
        return float(np.sum(weight / (sigma - d) ** 2))

    lo = d_top * (1 + 1e-15) + 1e-300
    hi = d_top + math.sqrt(float(np.sum(weight))) / radius
    while norm_sq(hi) > r2:
        hi = d_top + 2 * (hi - d_top)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if norm_sq(mid) > r2:
            lo = mid
        else:
            hi = mid
    sigma = 0.5 * (lo + hi)
    val = np.sum(d * (ub * sigma / (sigma - d)) ** 2)
    return math.sqrt(float(val))


def make_quadratic_task(
    dim: int,
    num_devices: int,
    heterogeneity: float,
    conditioning: float,
    rng: np.random.Generator,
    *,
    alphas: Optional[Sequence[float]] = None,
    inclusion: Optional[Sequence[float]] = None,
    path_losses: Optional[Sequence[float]] = None,
    ball_radius: float = 2.0,
) -> LearningTask:
    """Build a quadratic task with exact constants.

    Every device's curvature spectrum spans [1, conditioning] exactly, local
    optima sit on a sphere of radius `heterogeneity` around the global
    optimum, and the gradient-norm bound is the exact maximum over the ball
    of radius `ball_radius` around the global optimum.
    """
    for name, val in (("dim", dim), ("num_devices", num_devices)):
        if val < 1:
            raise ValueError(f"{name} must be >= 1")
    if not (math.isfinite(heterogeneity) and heterogeneity >= 0):
        raise ValueError("heterogeneity must be finite and >= 0")
    if not (math.isfinite(conditioning) and conditioning >= 1):
        raise ValueError("conditioning must be finite and >= 1")
    alphas = _weights(alphas, num_devices)
    inclusion = _probs(inclusion, num_devices)
    path_losses = _positive(path_losses, num_devices)

    if dim == 1:
        if num_devices == 1 and conditioning != 1.0:
            raise ValueError("dim=1 with one device cannot realize conditioning > 1")
        scales = np.linspace(1.0, conditioning, max(num_devices, 2))[:num_devices]
        mats = [np.array([[s]]) for s in scales]
    else:
        spectrum = np.linspace(1.0, conditioning, dim)
        mats = []
        for _ in range(num_devices):
            q = _random_orthogonal(dim, rng)
            a = (q * spectrum) @ q.T
            mats.append(0.5 * (a + a.T))

    offsets = _spread_local_optima(mats, alphas, heterogeneity, rng)
    agg = np.einsum("k,kij->ij", alphas, np.array(mats))
    agg = 0.5 * (agg + agg.T)
    rhs = np.einsum("k,kij,kj->i", alphas, np.array(mats), offsets)
    w_opt = np.linalg.solve(agg, rhs)

    grad_at_opt = np.einsum("k,kij,j->i", alphas, np.array(mats), w_opt) - rhs
    if np.linalg.norm(grad_at_opt) > 1e-9 * max(1.0, heterogeneity):
        raise RuntimeError("global optimum residual above tolerance")

    mu = min(float(np.linalg.eigvalsh(m)[0]) for m in mats)
    lip = max(float(np.linalg.eigvalsh(m)[-1]) for m in mats)
    delta = max(float(np.linalg.norm(u - w_opt)) for u in offsets) if num_devices else 0.0
    gamma = max(
        _max_grad_norm_on_ball(m, u - w_opt, ball_radius)
        for m, u in zip(mats, offsets)
    )

    devices = tuple(
        DeviceProfile(float(a), float(r), float(pl), m, u)
        for a, r, pl, m, u in zip(alphas, inclusion, path_losses, mats, offsets)
    )
    return LearningTask(
        family="quadratic",
        dim=dim,
        devices=devices,
        global_optimum=w_opt,
        constants=AssumptionConstants(mu, lip, gamma, delta),
        agg_curvature=agg,
        ball_radius=ball_radius,
    )


def _weights(alphas, n):
    if alphas is None:
        return np.full(n, 1.0 / n)
    alphas = np.asarray(alphas, dtype=float)
    if alphas.shape != (n,) or np.any(alphas <= 0):
        raise ValueError("alphas must be positive, one per device")
    if abs(alphas.sum() - 1.0) > 1e-9:
        raise ValueError("alphas must sum to 1")
    return alphas


def _probs(probs, n):
    if probs is None:
        return np.ones(n)
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (n,) or np.any(probs <= 0) or np.any(probs > 1):
        raise ValueError("inclusion probabilities must lie in (0, 1]")
    return probs


def _positive(vals, n):
    if vals is None:
        return np.ones(n)
    vals = np.asarray(vals, dtype=float)
    if vals.shape != (n,) or np.any(vals <= 0):
        raise ValueError("path losses must be positive, one per device")
    return vals


# ---------------------------------------------------------------------------
# logistic task construction
# ---------------------------------------------------------------------------


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logistic_value(x, y, w, reg):
    margins = y * (x @ w)
    # log(1 + exp(-m)) evaluated stably
    loss = np.mean(np.logaddexp(0.0, -margins))
    return loss + 0.5 * reg * float(w @ w)


def _logistic_grad(x, y, w, reg):
    margins = y * (x @ w)
    coeff = -y * _sigmoid(-margins)
    return x.T @ coeff / x.shape[0] + reg * w


def _logistic_newton(x, y, reg, dim, tol=1e-12, iters=100):
    w = np.zeros(dim)
    for _ in range(iters):
        margins = y * (x @ w)
        s = _sigmoid(-margins)
        grad = x.T @ (-y * s) / x.shape[0] + reg * w
        if np.linalg.norm(grad) <= tol:
            return w
        h = (x.T * (s * (1 - s))) @ x / x.shape[0] + reg * np.eye(dim)
        w = w - np.linalg.solve(h, grad)
    return w


def make_logistic_task(
    dim: int,
    num_devices: int,
    samples_per_device: int,
    reg: float,
    heterogeneity: float,
    rng: np.random.Generator,
    *,
    alphas: Optional[Sequence[float]] = None,
    inclusion: Optional[Sequence[float]] = None,
    path_losses: Optional[Sequence[float]] = None,
    ball_radius: float = 2.0,
    holdout_samples: int = 500,
) -> LearningTask:
    """l2-regularized logistic regression on synthetic per-device data.

    Constants are valid bounds: mu = reg, lipschitz = reg + max_k
    lambda_max(X_k'X_k)/(4 n_k), and the gradient bound combines the largest
    feature norm with the regularizer over the working ball.
    """
    if reg <= 0:
        raise ValueError("reg must be positive")
    alphas = _weights(alphas, num_devices)
    inclusion = _probs(inclusion, num_devices)
    path_losses = _positive(path_losses, num_devices)

    teacher = rng.standard_normal(dim)
    teacher /= np.linalg.norm(teacher)
    data = []
    for _ in range(num_devices):
        shift = rng.standard_normal(dim)
        shift *= heterogeneity / max(np.linalg.norm(shift), 1e-12)
        w_dev = teacher + shift
        x = rng.standard_normal((samples_per_device, dim))
        y = np.where(rng.random(samples_per_device) < _sigmoid(x @ w_dev), 1.0, -1.0)
        data.append((x, y))

    x_all = np.concatenate([x for x, _ in data])
    y_all = np.concatenate([y for _, y in data])
    w_opt = _logistic_newton_weighted(data, alphas, reg, dim)
    local_opts = [_logistic_newton(x, y, reg, dim) for x, y in data]

    mu = reg
    lip = reg + max(
        float(np.linalg.eigvalsh(x.T @ x / x.shape[0])[-1]) / 4.0 for x, _ in data
    )
    delta = max(float(np.linalg.norm(w - w_opt)) for w in local_opts)
    max_feat = float(np.max(np.linalg.norm(x_all, axis=1)))
    gamma = max_feat + reg * (float(np.linalg.norm(w_opt)) + ball_radius)

    x_hold = rng.standard_normal((holdout_samples, dim))
    y_hold = np.where(rng.random(holdout_samples) < _sigmoid(x_hold @ teacher), 1.0, -1.0)

    devices = tuple(
        DeviceProfile(float(a), float(r), float(pl), d, w)
        for a, r, pl, d, w in zip(alphas, inclusion, path_losses, data, local_opts)
    )
    task = LearningTask(
        family="logistic",
        dim=dim,
        devices=devices,
        global_optimum=w_opt,
        constants=AssumptionConstants(mu, lip, gamma, delta),
        opt_value=_weighted_logistic_value(data, alphas, w_opt, reg),
        holdout=(x_hold, y_hold),
        ball_radius=ball_radius,
    )
    return task


def _weighted_logistic_value(data, alphas, w, reg):
    return float(sum(a * _logistic_value(x, y, w, reg) for a, (x, y) in zip(alphas, data)))


def _logistic_newton_weighted(data, alphas, reg, dim, tol=1e-12, iters=100):
    w = np.zeros(dim)
    for _ in range(iters):
        grad = reg * w
        hess = reg * np.eye(dim)
        for a, (x, y) in zip(alphas, data):
            margins = y * (x @ w)
            s = _sigmoid(-margins)
            grad = grad + a * (x.T @ (-y * s) / x.shape[0])
            hess = hess + a * ((x.T * (s * (1 - s))) @ x / x.shape[0])
        if np.linalg.norm(grad) <= tol:
            return w
        w = w - np.linalg.solve(hess, grad)
    return w


def holdout_accuracy(task: LearningTask, weights: np.ndarray) -> float:
    """Fraction of held-out labels predicted correctly (logistic tasks)."""
    if task.holdout is None:
        raise ValueError("task has no held-out data")
    x, y = task.holdout
    return float(np.mean(np.sign(x @ weights) * y > 0))


# ---------------------------------------------------------------------------
# optimization operations
# ---------------------------------------------------------------------------


def local_gradient(task: LearningTask, k: int, weights: np.ndarray) -> np.ndarray:
    """Exact full-batch gradient of device k's loss at `weights`."""
    if not 0 <= k < task.num_devices:
        raise IndexError(f"device index {k} out of range")
    if weights.shape != (task.dim,):
        raise ValueError("weight vector has wrong length")
    dev = task.devices[k]
    if task.family == "quadratic":
        return dev.local_data @ (weights - dev.local_optimum)
    x, y = dev.local_data
    return _logistic_grad(x, y, weights, task.constants.mu)


def global_gradient(local_grads: Sequence[np.ndarray], alphas: Sequence[float]) -> np.ndarray:
    """Weighted sum of local gradients, accumulated in device order."""
    if len(local_grads) != len(alphas):
        raise ValueError("one weight per gradient required")
    dim = local_grads[0].shape[0]
    out = np.zeros(dim)
    for g, a in zip(local_grads, alphas):
        if g.shape != (dim,):
            raise ValueError("gradient length mismatch")
        add_scaled(out, float(a), np.ascontiguousarray(g))
    return out


def sgd_step(state: ModelState, g_hat: np.ndarray, eta: float) -> ModelState:
    """One global model update: w <- w - eta * g_hat."""
    if eta <= 0:
        raise ValueError("learning rate must be positive")
    if not np.all(np.isfinite(g_hat)):
        raise FloatingPointError("non-finite gradient estimate")
    return ModelState(state.round + 1, state.weights - eta * g_hat)


def sample_participants(inclusion: np.ndarray, n_active: int, rng: np.random.Generator) -> np.ndarray:
    """Systematic probability-proportional sampling without replacement.

    Inclusion probabilities are realized exactly: a random permutation lays
    the probabilities end to end, and n_active unit-spaced pointers with a
    common uniform offset pick one device each.  Requires sum(inclusion) ==
    n_active.
    """
    inclusion = np.asarray(inclusion, dtype=float)
    if np.any(inclusion <= 0) or np.any(inclusion > 1):
        raise ValueError("inclusion probabilities must lie in (0, 1]")
    if abs(inclusion.sum() - n_active) > 1e-9:
        raise ValueError("inclusion probabilities must sum to the participant count")
    perm = rng.permutation(inclusion.shape[0])
    cum = np.cumsum(inclusion[perm])
    pointers = rng.random() + np.arange(n_active)
    idx = np.searchsorted(cum, pointers, side="right")
    idx = np.minimum(idx, inclusion.shape[0] - 1)
    chosen = perm[idx]
    if np.unique(chosen).shape[0] != n_active:
        raise RuntimeError("systematic sampling produced duplicates")
    return np.sort(chosen)


def optimality_gap(task: LearningTask, state: ModelState) -> float:
    """Excess global loss relative to the global optimum, F(w) - F(w*)."""
    diff = state.weights - task.global_optimum
    if not np.all(np.isfinite(diff)):
        raise FloatingPointError("non-finite model weights")
    if task.family == "quadratic":
        # exact quadratic form around the optimum; nonnegative by construction
        return 0.5 * float(diff @ (task.agg_curvature @ diff))
    val = _weighted_logistic_value(
        [dev.local_data for dev in task.devices], task.alphas, state.weights,
        task.constants.mu,
    )
    gap = val - task.opt_value
    if gap < -1e-9:
        raise RuntimeError("negative optimality gap beyond tolerance")
    return max(gap, 0.0)


def check_gradient_bound(task: LearningTask, grads, participants) -> None:
    """Abort the trial if any local gradient exceeds the certified bound."""
    gamma = task.constants.grad_bound
    for k, g in zip(participants, grads):
        norm = float(np.linalg.norm(g))
        if norm > gamma * (1 + 1e-9):
            raise GammaBoundExceeded(
                f"device {k}: gradient norm {norm:.6g} exceeds certified bound "
                f"{gamma:.6g}; iterate left the ball of radius {task.ball_radius:.6g}"
            )
