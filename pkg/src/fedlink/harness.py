"""Experiment orchestration: configuration, seeded trials, sweeps, CSV output.

A trial is deterministic given (config, seed): all randomness flows through
named Philox substreams, CSV floats are written with 17 significant digits,
and rerunning produces byte-identical files.  Running both paradigms in one
trial reuses the same participant and channel draws for paired comparison.
"""

import math
import os
import sys
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from . import analog as an
from . import bounds as bd
from . import channel as ch
from . import digital as dg
from . import tasks
from .rng import substream, trial_streams

PARADIGMS = ("digital", "analog", "both", "ideal")


class ConfigError(ValueError):
    """Invalid or infeasible configuration; maps to CLI exit code 2."""


@dataclass(frozen=True)
class ExperimentConfig:
    num_devices: int = 20
    num_active: int = 10
    dim: int = 32
    quant_bits: int = 8
    range_bits: int = 64
    truncation_threshold: float = 0.5
    csi_correlation: float = 0.9
    learning_rate: float = 0.01
    bandwidth: float = 1e6
    noise_psd: float = 1e-11
    p_max: float = 1e-3
    subbands: int = 10
    t_max: Optional[float] = None       # defaults to the analog round delay
    digital_convention: str = "mean2"
    analog_convention: str = "mean1"
    task_family: str = "quadratic"
    heterogeneity: float = 1.0
    conditioning: float = 2.0
    init_dist: float = 1.0
    logistic_samples: int = 50
    logistic_reg: float = 0.1
    rounds: int = 300
    seeds: tuple = (0,)
    task_seed: int = 0
    paradigm: str = "both"
    zeta_mode: str = "adaptive"
    outage_mode: str = "empirical"
    alphas: Optional[tuple] = None
    inclusion_probs: Optional[tuple] = None
    path_losses: Optional[tuple] = None
    sweep_param: Optional[str] = None
    sweep_values: Optional[tuple] = None

    @property
    def effective_t_max(self) -> float:
        if self.t_max is not None:
            return self.t_max
        return an.tx_delay_analog(self.dim, self.subbands, self.bandwidth)

    def paradigm_list(self):
        if self.paradigm == "both":
            return ["digital", "analog"]
        return [self.paradigm]


def validate_config(cfg: ExperimentConfig):
    """Raise ConfigError on an infeasible configuration; return warnings
    (currently: step sizes that land outside the bound hypothesis)."""
    if cfg.num_devices < 1 or cfg.num_active < 1 or cfg.dim < 1:
        raise ConfigError("num_devices, num_active and dim must be >= 1")
    if cfg.num_active > cfg.num_devices:
        raise ConfigError("num_active cannot exceed num_devices")
    if cfg.num_active > cfg.subbands:
        raise ConfigError("num_active cannot exceed the subband count")
    if cfg.quant_bits < 1 or cfg.range_bits < 0:
        raise ConfigError("quant_bits must be >= 1 and range_bits >= 0")
    if cfg.paradigm not in PARADIGMS:
        raise ConfigError(f"paradigm must be one of {PARADIGMS}")
    if cfg.truncation_threshold < 0:
        raise ConfigError("truncation_threshold must be nonnegative")
    if not 0 < cfg.csi_correlation <= 1:
        raise ConfigError("csi_correlation must lie in (0, 1]")
    if cfg.learning_rate <= 0 or cfg.rounds < 0 or cfg.init_dist < 0:
        raise ConfigError("learning_rate must be positive, rounds/init_dist nonnegative")
    if min(cfg.bandwidth, cfg.noise_psd, cfg.p_max) <= 0 or cfg.subbands < 1:
        raise ConfigError("radio parameters must be positive")
    if cfg.task_family not in ("quadratic", "logistic"):
        raise ConfigError("task_family must be quadratic or logistic")
    if cfg.zeta_mode not in ("adaptive", "static"):
        raise ConfigError("zeta_mode must be adaptive or static")
    if cfg.zeta_mode == "static" and cfg.truncation_threshold <= 0:
        raise ConfigError("static zeta_mode needs a positive truncation threshold")
    if cfg.outage_mode not in ("empirical", "analytic"):
        raise ConfigError("outage_mode must be empirical or analytic")
    if not cfg.seeds:
        raise ConfigError("at least one seed is required")
    for name in ("alphas", "inclusion_probs", "path_losses"):
        vals = getattr(cfg, name)
        if vals is not None and len(vals) != cfg.num_devices:
            raise ConfigError(f"{name} must list one value per device")
    incl = _inclusion(cfg)
    if abs(float(np.sum(incl)) - cfg.num_active) > 1e-9:
        raise ConfigError("inclusion probabilities must sum to num_active")

    wants_analog = cfg.paradigm in ("analog", "both")
    wants_digital = cfg.paradigm in ("digital", "both")
    t_max = cfg.effective_t_max
    if t_max <= 0:
        raise ConfigError("t_max must be positive")
    if wants_analog:
        t_analog = an.tx_delay_analog(cfg.dim, cfg.subbands, cfg.bandwidth)
        if t_max < t_analog:
            raise ConfigError(
                f"t_max {t_max:g} is below the analog round delay {t_analog:g}"
            )
        if cfg.truncation_threshold == 0 and cfg.csi_correlation < 1:
            # simulation is defined but has unbounded distortion variance
            pass
    if wants_digital:
        try:
            theta = dg.min_snr_threshold(
                cfg.num_active, cfg.dim, cfg.quant_bits, cfg.bandwidth, t_max
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if theta <= 0:
            raise ConfigError("delay budget admits a zero rate; tighten t_max")

    warnings = []
    task = build_task(cfg)
    for paradigm in cfg.paradigm_list():
        if paradigm == "ideal":
            continue
        try:
            inputs = build_bound_inputs(cfg, task)
            amp = bd._amplification(inputs, paradigm)
            cap = bd.max_learning_rate(task.constants, amp)
            if cfg.learning_rate >= cap:
                warnings.append(
                    f"{paradigm}: learning_rate {cfg.learning_rate:g} is outside the "
                    f"bound hypothesis (needs < {cap:.6g}); bound columns stay empty"
                )
        except ValueError as exc:
            warnings.append(f"{paradigm}: bound undefined ({exc})")
    return warnings


def _inclusion(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.inclusion_probs is not None:
        return np.asarray(cfg.inclusion_probs, dtype=float)
    return np.full(cfg.num_devices, cfg.num_active / cfg.num_devices)


_TASK_CACHE = {}


def build_task(cfg: ExperimentConfig) -> tasks.LearningTask:
    """Construct the learning task for a config (cached; task randomness is
    keyed by task_seed, not by the trial seeds)."""
    key = (
        cfg.task_family, cfg.dim, cfg.num_devices, cfg.heterogeneity,
        cfg.conditioning, cfg.init_dist, cfg.task_seed, cfg.alphas,
        cfg.inclusion_probs, cfg.path_losses, cfg.num_active,
        cfg.logistic_samples, cfg.logistic_reg,
    )
    task = _TASK_CACHE.get(key)
    if task is not None:
        return task
    rng = substream(cfg.task_seed, "task")
    common = dict(
        alphas=cfg.alphas,
        inclusion=cfg.inclusion_probs if cfg.inclusion_probs is not None else _inclusion(cfg),
        path_losses=cfg.path_losses,
        ball_radius=2.0 * cfg.init_dist,
    )
    try:
        if cfg.task_family == "quadratic":
            task = tasks.make_quadratic_task(
                cfg.dim, cfg.num_devices, cfg.heterogeneity, cfg.conditioning, rng,
                **common,
            )
        else:
            task = tasks.make_logistic_task(
                cfg.dim, cfg.num_devices, cfg.logistic_samples, cfg.logistic_reg,
                cfg.heterogeneity, rng, **common,
            )
    except ValueError as exc:
        raise ConfigError(f"task construction failed: {exc}") from None
    if len(_TASK_CACHE) > 64:
        _TASK_CACHE.clear()
    _TASK_CACHE[key] = task
    return task


def _digital_radio(cfg) -> ch.RadioParams:
    return ch.RadioParams(
        cfg.bandwidth, cfg.noise_psd, cfg.p_max, cfg.subbands,
        cfg.csi_correlation, cfg.digital_convention,
    )


def _analog_radio(cfg) -> ch.RadioParams:
    return ch.RadioParams(
        cfg.bandwidth, cfg.noise_psd, cfg.p_max, cfg.subbands,
        cfg.csi_correlation, cfg.analog_convention,
    )


def success_probabilities(cfg: ExperimentConfig, task: tasks.LearningTask) -> np.ndarray:
    theta = dg.min_snr_threshold(
        cfg.num_active, cfg.dim, cfg.quant_bits, cfg.bandwidth, cfg.effective_t_max
    )
    return np.array(
        [
            ch.success_probability(
                theta, cfg.bandwidth, cfg.num_active, cfg.p_max, dev.path_loss,
                cfg.noise_psd, cfg.digital_convention,
            )
            for dev in task.devices
        ]
    )


def build_digital_config(cfg: ExperimentConfig, task: tasks.LearningTask) -> dg.DigitalLinkConfig:
    theta = dg.min_snr_threshold(
        cfg.num_active, cfg.dim, cfg.quant_bits, cfg.bandwidth, cfg.effective_t_max
    )
    delay = dg.tx_delay_digital(cfg.num_active, cfg.dim, cfg.quant_bits, cfg.bandwidth, theta)
    if delay > cfg.effective_t_max:
        raise ConfigError("digital delay exceeds the budget")
    return dg.DigitalLinkConfig(
        radio=_digital_radio(cfg),
        n_active=cfg.num_active,
        quant_bits=cfg.quant_bits,
        range_bits=cfg.range_bits,
        snr_threshold=theta,
        succ_prob=success_probabilities(cfg, task),
        outage_mode=cfg.outage_mode,
        delay=delay,
    )


def build_analog_config(cfg: ExperimentConfig, task: tasks.LearningTask) -> an.AnalogLinkConfig:
    delay = an.tx_delay_analog(cfg.dim, cfg.subbands, cfg.bandwidth)
    if delay > cfg.effective_t_max:
        raise ConfigError("analog delay exceeds the budget")
    return an.AnalogLinkConfig(
        radio=_analog_radio(cfg),
        gamma_th=cfg.truncation_threshold,
        grad_bound=task.constants.grad_bound,
        zeta_mode=cfg.zeta_mode,
        delay=delay,
    )


def build_bound_inputs(cfg: ExperimentConfig, task: tasks.LearningTask) -> bd.BoundInputs:
    theta = dg.min_snr_threshold(
        cfg.num_active, cfg.dim, cfg.quant_bits, cfg.bandwidth, cfg.effective_t_max
    )
    return bd.BoundInputs(
        constants=task.constants,
        eta=cfg.learning_rate,
        alphas=task.alphas,
        inclusion=task.inclusion_probs,
        path_losses=task.path_losses,
        succ_prob=success_probabilities(cfg, task),
        quant_bits=cfg.quant_bits,
        gamma_th=cfg.truncation_threshold,
        rho=cfg.csi_correlation,
        bandwidth=cfg.bandwidth,
        noise_psd=cfg.noise_psd,
        p_max=cfg.p_max,
        dim=cfg.dim,
        init_dist_sq=cfg.init_dist**2,
        snr_threshold=theta,
        n_active=cfg.num_active,
        subbands=cfg.subbands,
    )


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundTrace:
    round: int
    m_gap: float
    mse: Optional[float]
    bound: Optional[float]
    delay: Optional[float]
    successes: Optional[int]
    truncations: Optional[int]


TRACE_HEADER = "round,m_gap,mse,bound,delay,successes,truncations"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_trace_csv(path: str, rows: Sequence[RoundTrace]) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(TRACE_HEADER + "\n")
        for r in rows:
            fh.write(
                ",".join(
                    [
                        _fmt(r.round), _fmt(r.m_gap), _fmt(r.mse), _fmt(r.bound),
                        _fmt(r.delay), _fmt(r.successes), _fmt(r.truncations),
                    ]
                )
                + "\n"
            )


def _bound_curve(cfg, task, paradigm, rounds):
    """Bound on the gap after m updates, for m = 0..rounds; None if the step
    size violates the hypothesis."""
    if paradigm == "ideal":
        return None
    inputs = build_bound_inputs(cfg, task)
    try:
        amp = bd._amplification(inputs, paradigm)
        limit = bd._additive_numerator(inputs, paradigm, amp) / bd._denominator(inputs, amp)
    except ValueError:
        return None
    contraction = bd.contraction_factor(inputs, paradigm)
    powers = contraction ** np.arange(0, rounds + 1, dtype=float)
    return 0.5 * task.constants.lipschitz * powers * inputs.init_dist_sq + limit


# ---------------------------------------------------------------------------
# trial execution
# ---------------------------------------------------------------------------


def run_trial(cfg: ExperimentConfig, seed: int, task: Optional[tasks.LearningTask] = None):
    """Run one seeded trial; returns {paradigm: [RoundTrace, ...]}.

    With paradigm "both", digital and analog consume identical participant
    and channel draws while their transport-specific randomness stays on
    independent streams.
    """
    if task is None:
        task = build_task(cfg)
    streams = trial_streams(seed)
    paradigms = cfg.paradigm_list()
    wants_digital = "digital" in paradigms
    wants_analog = "analog" in paradigms

    dcfg = build_digital_config(cfg, task) if wants_digital else None
    acfg = build_analog_config(cfg, task) if wants_analog else None

    direction = streams.init.standard_normal(cfg.dim)
    direction /= np.linalg.norm(direction)
    w0 = task.global_optimum + cfg.init_dist * direction

    states = {p: tasks.ModelState(0, w0.copy()) for p in paradigms}
    curves = {p: _bound_curve(cfg, task, p, cfg.rounds) for p in paradigms}
    traces = {
        p: [
            RoundTrace(
                0, tasks.optimality_gap(task, states[p]), None,
                None if curves[p] is None else float(curves[p][0]), None, None, None,
            )
        ]
        for p in paradigms
    }
    accuracy = {p: [] for p in paradigms} if task.family == "logistic" else None

    incl = task.inclusion_probs
    eta = cfg.learning_rate
    for m in range(1, cfg.rounds + 1):
        participants = None
        z = None
        if wants_digital or wants_analog:
            participants = tasks.sample_participants(incl, cfg.num_active, streams.sampler)
            z = streams.channel.standard_normal((cfg.num_devices, 4))
        for p in paradigms:
            state = states[p]
            all_grads = _all_local_gradients(task, state.weights)
            g_ref = tasks.global_gradient(all_grads, task.alphas)
            if p == "digital":
                chans = ch.channels_from_standard(
                    z, cfg.csi_correlation, cfg.digital_convention
                )
                outcome = dg.digital_round(
                    task, state, participants, chans, dcfg, streams.quantizer,
                    outage_rng=streams.channel,
                    grads=[all_grads[int(k)] for k in participants],
                )
                err = outcome.g_hat - g_ref
                row = dict(
                    mse=float(err @ err), delay=dcfg.delay,
                    successes=int(outcome.success.sum()), truncations=0,
                )
                g_hat = outcome.g_hat
            elif p == "analog":
                chans = ch.channels_from_standard(
                    z, cfg.csi_correlation, cfg.analog_convention
                )
                outcome = an.analog_round(
                    task, state, participants, chans, acfg, streams.noise,
                    grads=[all_grads[int(k)] for k in participants],
                )
                err = outcome.g_hat - g_ref
                n_trunc = int(outcome.truncated.sum())
                row = dict(
                    mse=float(err @ err), delay=acfg.delay,
                    successes=len(participants) - n_trunc, truncations=n_trunc,
                )
                g_hat = outcome.g_hat
            else:  # ideal: exact global gradient, no transport
                row = dict(mse=0.0, delay=0.0, successes=task.num_devices, truncations=0)
                g_hat = g_ref
            states[p] = tasks.sgd_step(state, g_hat, eta)
            curve = curves[p]
            traces[p].append(
                RoundTrace(
                    m, tasks.optimality_gap(task, states[p]), row["mse"],
                    None if curve is None else float(curve[m]), row["delay"],
                    row["successes"], row["truncations"],
                )
            )
            if accuracy is not None:
                accuracy[p].append(tasks.holdout_accuracy(task, states[p].weights))
    result = {p: traces[p] for p in paradigms}
    if accuracy is not None:
        result["_accuracy"] = accuracy
    return result


def _all_local_gradients(task, weights):
    if task.family == "quadratic":
        mats = np.stack([dev.local_data for dev in task.devices])
        offs = np.stack([dev.local_data @ dev.local_optimum for dev in task.devices])
        return list(mats @ weights - offs)
    return [tasks.local_gradient(task, k, weights) for k in range(task.num_devices)]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def run_command(cfg: ExperimentConfig, out_dir: str) -> list:
    """Execute every configured seed and write one trace CSV per paradigm."""
    os.makedirs(out_dir, exist_ok=True)
    task = build_task(cfg)
    written = []
    for seed in cfg.seeds:
        result = run_trial(cfg, seed, task)
        for paradigm in cfg.paradigm_list():
            path = os.path.join(out_dir, f"trace_{paradigm}_seed{seed}.csv")
            write_trace_csv(path, result[paradigm])
            written.append(path)
        if "_accuracy" in result:
            for paradigm, accs in result["_accuracy"].items():
                path = os.path.join(out_dir, f"accuracy_{paradigm}_seed{seed}.csv")
                with open(path, "w", newline="\n", encoding="utf-8") as fh:
                    fh.write("round,accuracy\n")
                    for i, a in enumerate(accs, start=1):
                        fh.write(f"{i},{_fmt(a)}\n")
                written.append(path)
    return written


SWEEPABLE = {
    "p_max": float, "num_active": int, "csi_correlation": float,
    "quant_bits": int, "truncation_threshold": float, "noise_psd": float,
    "bandwidth": float, "heterogeneity": float, "conditioning": float,
    "learning_rate": float, "dim": int, "subbands": int, "num_devices": int,
    "init_dist": float, "t_max": float,
}

SUMMARY_HEADER = (
    "sweep_value,paradigm,mean_final_gap,stderr,bound_limit,bound_asymptote,status"
)


def run_sweep(cfg: ExperimentConfig, out_dir: str) -> str:
    """Run the configured sweep; emits per-value seed-averaged traces plus a
    summary CSV.  Infeasible or failed points are recorded, not fatal."""
    if not cfg.sweep_param or not cfg.sweep_values:
        raise ConfigError("sweep requires sweep_param and sweep_values")
    if cfg.sweep_param not in SWEEPABLE:
        raise ConfigError(
            f"sweep_param must be one of {sorted(SWEEPABLE)}"
        )
    os.makedirs(out_dir, exist_ok=True)
    caster = SWEEPABLE[cfg.sweep_param]
    lines = [SUMMARY_HEADER]
    for raw in cfg.sweep_values:
        value = caster(raw)
        point = replace(cfg, **{cfg.sweep_param: value, "sweep_param": None, "sweep_values": None})
        lines.extend(_sweep_point(point, cfg.sweep_param, value, out_dir))
    path = os.path.join(out_dir, "summary.csv")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _sweep_point(point: ExperimentConfig, param: str, value, out_dir: str):
    label = _fmt(value)
    try:
        validate_config(point)
        task = build_task(point)
    except ConfigError:
        return [
            f"{label},{p},,,,,infeasible" for p in point.paradigm_list()
        ]
    per_paradigm = {p: [] for p in point.paradigm_list()}
    try:
        for seed in point.seeds:
            result = run_trial(point, seed, task)
            for p in point.paradigm_list():
                per_paradigm[p].append(result[p])
    except (tasks.GammaBoundExceeded, FloatingPointError, RuntimeError):
        return [f"{label},{p},,,,,error" for p in point.paradigm_list()]

    value_dir = os.path.join(out_dir, f"{param}_{label}")
    os.makedirs(value_dir, exist_ok=True)
    rows = []
    for p, runs in per_paradigm.items():
        mean_rows = _mean_trace(runs)
        write_trace_csv(os.path.join(value_dir, f"trace_mean_{p}.csv"), mean_rows)
        finals = np.array([r[-1].m_gap for r in runs])
        mean_final = float(finals.mean())
        stderr = float(finals.std(ddof=1) / math.sqrt(len(finals))) if len(finals) > 1 else 0.0
        limit, asym = _bound_summary(point, task, p)
        rows.append(
            f"{label},{p},{_fmt(mean_final)},{_fmt(stderr)},{_fmt(limit)},{_fmt(asym)},ok"
        )
    return rows


def _bound_summary(cfg, task, paradigm):
    if paradigm == "ideal":
        return None, None
    inputs = build_bound_inputs(cfg, task)
    try:
        limit = bd.limit_gap(inputs, paradigm)
    except ValueError:
        limit = None
    try:
        asym = (
            bd.asymptote_digital(inputs)
            if paradigm == "digital"
            else bd.asymptote_analog(inputs)
        )
    except ValueError:
        asym = None
    return limit, asym


def _mean_trace(runs):
    rounds = len(runs[0])
    out = []
    for m in range(rounds):
        rows = [r[m] for r in runs]
        out.append(
            RoundTrace(
                round=rows[0].round,
                m_gap=float(np.mean([r.m_gap for r in rows])),
                mse=None if rows[0].mse is None else float(np.mean([r.mse for r in rows])),
                bound=rows[0].bound,
                delay=rows[0].delay,
                successes=None
                if rows[0].successes is None
                else float(np.mean([r.successes for r in rows])),
                truncations=None
                if rows[0].truncations is None
                else float(np.mean([r.truncations for r in rows])),
            )
        )
    return out


def emit_bound_overlay(cfg: ExperimentConfig, out_dir: str) -> list:
    """Write per-round bound trajectories (rows m = 1..rounds, trace schema)
    and a limits summary for both paradigms."""
    os.makedirs(out_dir, exist_ok=True)
    task = build_task(cfg)
    inputs = build_bound_inputs(cfg, task)
    written = []
    wanted = [p for p in ("digital", "analog") if cfg.paradigm in (p, "both")]
    if not wanted:
        raise ConfigError("bound overlay needs a digital or analog paradigm")
    limits_rows = [
        "paradigm,limit,asymptote,max_learning_rate,amplification,contraction,"
        "additive_constant,eps_power,eps_device_1,eps_device_2"
    ]
    eps_power, eps1, eps2 = bd.rate_constants(inputs)
    for p in wanted:
        try:
            traj = bd.gap_bound_trajectory(inputs, p, cfg.rounds)
            limit = bd.limit_gap(inputs, p)
        except ValueError as exc:
            raise ConfigError(f"{p}: {exc}") from None
        delay = (
            build_digital_config(cfg, task).delay
            if p == "digital"
            else build_analog_config(cfg, task).delay
        )
        rows = [
            RoundTrace(m, None, None, float(traj[m - 1]), delay, None, None)
            for m in range(1, cfg.rounds + 1)
        ]
        path = os.path.join(out_dir, f"bounds_{p}.csv")
        # trace schema with only round/bound/delay populated
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(TRACE_HEADER + "\n")
            for r in rows:
                fh.write(
                    f"{r.round},,,{_fmt(r.bound)},{_fmt(r.delay)},,\n"
                )
        written.append(path)
        amp = bd._amplification(inputs, p)
        if p == "digital":
            extra = bd.quantization_variance_bound(
                inputs.dim, inputs.quant_bits, inputs.constants.grad_bound
            )
            asym = bd.asymptote_digital(inputs)
        else:
            extra = bd.aircomp_noise_floor(
                inputs.bandwidth, inputs.noise_psd, inputs.constants.grad_bound,
                inputs.gamma_th, inputs.rho, inputs.p_max, inputs.alphas,
                inputs.inclusion, inputs.path_losses,
            )
            asym = bd.asymptote_analog(inputs)
        limits_rows.append(
            f"{p},{_fmt(limit)},{_fmt(asym)},"
            f"{_fmt(bd.max_learning_rate(inputs.constants, amp))},{_fmt(amp)},"
            f"{_fmt(bd.contraction_factor(inputs, p))},{_fmt(extra)},"
            f"{_fmt(eps_power)},{_fmt(eps1)},{_fmt(eps2)}"
        )
    path = os.path.join(out_dir, "bounds_limits.csv")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(limits_rows) + "\n")
    written.append(path)
    return written


# ---------------------------------------------------------------------------
# config file parsing
# ---------------------------------------------------------------------------

_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}
_TUPLE_FIELDS = {"seeds", "alphas", "inclusion_probs", "path_losses", "sweep_values"}
_INT_FIELDS = {
    "num_devices", "num_active", "dim", "quant_bits", "range_bits", "subbands",
    "rounds", "task_seed", "logistic_samples",
}
_STR_FIELDS = {
    "digital_convention", "analog_convention", "task_family", "paradigm",
    "zeta_mode", "outage_mode", "sweep_param",
}


def _parse_power(text: str, per_hz: bool) -> float:
    """Parse a power value: plain watts, or dBm with an explicit suffix."""
    cleaned = text.strip().lower().replace(" ", "")
    suffix = "dbm/hz" if per_hz else "dbm"
    if cleaned.endswith(suffix):
        dbm = float(cleaned[: -len(suffix)])
        return 1e-3 * 10.0 ** (dbm / 10.0)
    return float(text)


def _parse_seed_list(text: str) -> tuple:
    text = text.strip()
    if ".." in text:
        start, stop = text.split("..", 1)
        return tuple(range(int(start), int(stop)))
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def parse_config_text(text: str, include_defaults: bool = True) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key == "include_defaults":
            include_defaults = val.lower() in ("1", "true", "yes")
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, val)
    if not include_defaults:
        optional = {
            "t_max", "alphas", "inclusion_probs", "path_losses",
            "sweep_param", "sweep_values",
        }
        missing = set(_FIELD_TYPES) - set(values) - optional
        if missing:
            raise ConfigError(f"missing required keys: {sorted(missing)}")
    return ExperimentConfig(**values)


def _coerce(key: str, val: str):
    if key == "p_max":
        return _parse_power(val, per_hz=False)
    if key == "noise_psd":
        return _parse_power(val, per_hz=True)
    if key == "seeds":
        return _parse_seed_list(val)
    if key in _TUPLE_FIELDS:
        return tuple(float(tok) for tok in val.split(",") if tok.strip())
    if key in _INT_FIELDS:
        return int(val)
    if key in _STR_FIELDS:
        return val
    if key == "t_max" and val.lower() in ("none", "auto"):
        return None
    return float(val)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
