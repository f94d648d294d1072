"""Rayleigh fading with imperfect transmitter-side CSI, capacity and outage laws.

Small-scale coefficients are circularly-symmetric complex Gaussians.  The
true coefficient decomposes as ``h = rho * h_hat + sqrt(1 - rho^2) * v``
with the estimate ``h_hat`` and the estimation error ``v`` independent and
identically distributed.  The expected power gain E[|h|^2] is configurable
("mean1" or "mean2") because the closed-form outage and truncation laws used
downstream are each verbatim under a different normalization; see
README for the convention table.
"""

import math
from dataclasses import dataclass

import numpy as np

CONVENTION_MEANS = {"mean1": 1.0, "mean2": 2.0}


def _mean_gain(convention: str) -> float:
    try:
        return CONVENTION_MEANS[convention]
    except KeyError:
        raise ValueError(f"unknown power convention {convention!r}") from None


@dataclass(frozen=True)
class RadioParams:
    bandwidth: float        # Hz
    noise_psd: float        # W/Hz
    p_max: float            # W
    subbands: int
    csi_correlation: float
    power_convention: str = "mean1"

    def __post_init__(self):
        if min(self.bandwidth, self.noise_psd, self.p_max) <= 0 or self.subbands <= 0:
            raise ValueError("bandwidth, noise_psd, p_max and subbands must be positive")
        if not 0 < self.csi_correlation <= 1:
            raise ValueError("csi_correlation must lie in (0, 1]")
        _mean_gain(self.power_convention)


@dataclass(frozen=True)
class ChannelRealization:
    h_hat: complex
    h: complex
    v: complex


@dataclass(frozen=True)
class ChannelSample:
    """Vectorized per-device channel draws for one round."""

    h_hat: np.ndarray
    h: np.ndarray
    v: np.ndarray
    mean_gain: float


def channels_from_standard(z: np.ndarray, rho: float, convention: str) -> ChannelSample:
    """Assemble channel draws from standard-normal quadruples.

    ``z`` has shape (K, 4): real/imag parts of the estimate and of the error,
    each scaled so E[|h_hat|^2] = E[|v|^2] equals the convention's mean gain.
    Sharing ``z`` across conventions yields paired realizations.
    """
    mean = _mean_gain(convention)
    s = math.sqrt(mean / 2.0)
    h_hat = s * (z[:, 0] + 1j * z[:, 1])
    v = s * (z[:, 2] + 1j * z[:, 3])
    h = rho * h_hat + math.sqrt(1.0 - rho * rho) * v
    return ChannelSample(h_hat=h_hat, h=h, v=v, mean_gain=mean)


def draw_channel(rho: float, convention: str, rng: np.random.Generator) -> ChannelRealization:
    """One device's channel draw under the CSI-imperfection model."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    sample = channels_from_standard(rng.standard_normal((1, 4)), rho, convention)
    return ChannelRealization(
        h_hat=complex(sample.h_hat[0]), h=complex(sample.h[0]), v=complex(sample.v[0])
    )


def capacity(p_tx: float, path_loss: float, h: complex, bandwidth: float, noise_psd: float) -> float:
    """Instantaneous link capacity in bits/s over the given bandwidth."""
    if bandwidth <= 0 or noise_psd <= 0:
        raise ValueError("bandwidth and noise_psd must be positive")
    snr = p_tx * path_loss**2 * abs(h) ** 2 / (bandwidth * noise_psd)
    return bandwidth * math.log2(1.0 + snr)


def success_probability(
    snr_threshold: float,
    bandwidth: float,
    n_active: int,
    p_tx: float,
    path_loss: float,
    noise_psd: float,
    convention: str = "mean2",
) -> float:
    """Probability that a fixed-rate transmission fits the fading capacity.

    The fixed rate corresponds to SNR threshold ``snr_threshold`` on one of
    ``n_active`` equal subchannels; with exponentially distributed power gain
    the success event {rate <= capacity} has the closed form
    exp(-B*N0*theta / (N * P * L^2 * mean_gain)).
    """
    if snr_threshold < 0:
        raise ValueError("snr_threshold must be nonnegative")
    mean = _mean_gain(convention)
    return math.exp(
        -bandwidth * noise_psd * snr_threshold / (n_active * p_tx * path_loss**2 * mean)
    )


def truncation_probability(gamma_th: float, convention: str = "mean1") -> float:
    """Probability the estimated power gain clears the truncation threshold."""
    if gamma_th < 0:
        raise ValueError("gamma_th must be nonnegative")
    return math.exp(-gamma_th / _mean_gain(convention))
