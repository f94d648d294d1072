"""Digital vs analog uplink simulation and convergence-bound analysis for
federated learning over Rayleigh-fading channels."""

from ._kernels import BACKEND as kernel_backend
from .analog import (
    AnalogLinkConfig,
    AnalogPrecoder,
    AnalogRoundOutcome,
    analog_round,
    compensation,
    precoder,
    scaling_factor,
    static_scaling,
    tx_delay_analog,
)
from .bounds import (
    BoundInputs,
    BoundReport,
    aircomp_noise_floor,
    analog_amplification,
    analog_distortion_moment,
    asymptote_analog,
    asymptote_digital,
    bound_report,
    contraction_factor,
    digital_amplification,
    exp_integral_e1,
    gap_bound_at,
    gap_bound_trajectory,
    limit_gap,
    limit_gap_analog,
    limit_gap_digital,
    max_learning_rate,
    quantization_variance_bound,
    rate_constants,
    variance_decomposition,
)
from .channel import (
    ChannelRealization,
    ChannelSample,
    RadioParams,
    capacity,
    channels_from_standard,
    draw_channel,
    success_probability,
    truncation_probability,
)
from .digital import (
    DigitalLinkConfig,
    DigitalRoundOutcome,
    QuantizedGradient,
    dequantize,
    digital_round,
    min_snr_threshold,
    payload_bits,
    quantize,
    tx_delay_digital,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    RoundTrace,
    build_task,
    emit_bound_overlay,
    load_config,
    run_command,
    run_sweep,
    run_trial,
    validate_config,
)
from .tasks import (
    AssumptionConstants,
    DeviceProfile,
    GammaBoundExceeded,
    LearningTask,
    ModelState,
    global_gradient,
    holdout_accuracy,
    local_gradient,
    make_logistic_task,
    make_quadratic_task,
    optimality_gap,
    sample_participants,
    sgd_step,
)

__version__ = "0.1.0"
