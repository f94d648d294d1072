"""Fading draws, CSI decomposition, capacity, outage and truncation laws."""

import math

import numpy as np
import pytest

from fedlink import channel as ch
from fedlink.rng import substream


def _draw_many(n, rho, convention, seed=0):
    rng = substream(seed, "channel")
    z = rng.standard_normal((n, 4))
    return ch.channels_from_standard(z, rho, convention)


class TestDraws:
    def test_perfect_csi_is_exact(self):
        sample = _draw_many(1000, 1.0, "mean1")
        np.testing.assert_array_equal(sample.h, sample.h_hat)

    def test_decomposition_residual_is_zero(self):
        for convention in ("mean1", "mean2"):
            rho = 0.8
            sample = _draw_many(2000, rho, convention)
            resid = sample.h - (rho * sample.h_hat + math.sqrt(1 - rho * rho) * sample.v)
            assert np.max(np.abs(resid)) == 0.0

    @pytest.mark.parametrize("convention,mean", [("mean1", 1.0), ("mean2", 2.0)])
    def test_power_gain_mean(self, convention, mean):
        n = 1_000_000
        sample = _draw_many(n, 0.9, convention)
        gains = np.abs(sample.h) ** 2
        # |h|^2 is exponential with std == mean
        sigma = mean / math.sqrt(n)
        assert abs(gains.mean() - mean) <= 3 * sigma

    def test_estimate_correlation(self):
        n = 1_000_000
        rho = 0.7
        sample = _draw_many(n, rho, "mean1")
        r = np.corrcoef(np.real(sample.h), np.real(sample.h_hat))[0, 1]
        sigma = (1 - rho * rho) / math.sqrt(n)
        assert abs(r - rho) <= 3 * sigma

    def test_gain_distribution_is_exponential(self):
        n = 100_000
        sample = _draw_many(n, 0.9, "mean1")
        gains = np.sort(np.abs(sample.h) ** 2)
        cdf = 1.0 - np.exp(-gains)
        empirical_hi = np.arange(1, n + 1) / n
        empirical_lo = np.arange(0, n) / n
        ks = max(np.max(np.abs(empirical_hi - cdf)), np.max(np.abs(cdf - empirical_lo)))
        assert ks < 1.63 / math.sqrt(n)  # 1% critical value

    def test_draw_channel_single(self):
        rng = substream(3, "channel")
        real = ch.draw_channel(1.0, "mean1", rng)
        assert real.h == real.h_hat
        with pytest.raises(ValueError):
            ch.draw_channel(0.0, "mean1", rng)
        with pytest.raises(ValueError):
            ch.draw_channel(0.5, "mean3", rng)


class TestCapacity:
    def test_zero_power(self):
        assert ch.capacity(0.0, 1.0, 1 + 1j, 1e5, 1e-11) == 0.0

    def test_unit_snr(self):
        # P L^2 |h|^2 / (B N0) = 1 -> capacity equals the bandwidth
        bw, n0 = 1e5, 1e-9
        h = complex(math.sqrt(bw * n0), 0.0)
        assert abs(ch.capacity(1.0, 1.0, h, bw, n0) - bw) < 1e-6

    def test_snr_fifteen(self):
        bw, n0 = 1e5, 1e-9
        h = complex(math.sqrt(15 * bw * n0), 0.0)
        assert abs(ch.capacity(1.0, 1.0, h, bw, n0) - 4e5) < 1e-3

    def test_invalid(self):
        with pytest.raises(ValueError):
            ch.capacity(1.0, 1.0, 1 + 0j, 0.0, 1e-11)


class TestSuccessProbability:
    def test_zero_threshold(self):
        assert ch.success_probability(0.0, 1e6, 10, 1e-3, 1.0, 1e-11) == 1.0

    def test_unit_exponent(self):
        # choose theta so B N0 theta / (N P L^2 mean) = 1
        bw, n_act, p, pl, n0 = 1e6, 10, 1e-3, 1.0, 1e-11
        theta = n_act * p * pl**2 * 2.0 / (bw * n0)
        val = ch.success_probability(theta, bw, n_act, p, pl, n0, "mean2")
        assert abs(val - math.exp(-1)) < 1e-12

    def test_monte_carlo_agreement(self):
        bw, n_act, p, pl, n0 = 1e6, 10, 1e-3, 1.0, 1e-11
        n = 100_000
        for theta in (50.0, 200.0, 511.0):
            closed = ch.success_probability(theta, bw, n_act, p, pl, n0, "mean2")
            sample = _draw_many(n, 0.9, "mean2", seed=int(theta))
            snr = p * pl**2 * np.abs(sample.h) ** 2 / ((bw / n_act) * n0)
            freq = float(np.mean(snr >= theta))
            sigma = math.sqrt(closed * (1 - closed) / n)
            assert abs(freq - closed) <= 3 * sigma

    def test_event_matches_capacity_comparison(self):
        bw, n_act, p, pl, n0 = 1e6, 8, 2e-3, 1.3, 1e-11
        theta = 100.0
        rate = (bw / n_act) * math.log2(1 + theta)
        sample = _draw_many(2000, 0.9, "mean2", seed=5)
        for h in sample.h[:200]:
            cap = ch.capacity(p, pl, complex(h), bw / n_act, n0)
            snr = p * pl**2 * abs(h) ** 2 / ((bw / n_act) * n0)
            assert (rate <= cap) == (snr >= theta)

    def test_monotonicity(self):
        args = dict(bandwidth=1e6, n_active=10, path_loss=1.0, noise_psd=1e-11)
        vals = [
            ch.success_probability(t, args["bandwidth"], args["n_active"], 1e-3,
                                   args["path_loss"], args["noise_psd"])
            for t in (1.0, 10.0, 100.0)
        ]
        assert vals[0] > vals[1] > vals[2]
        powers = [
            ch.success_probability(100.0, args["bandwidth"], args["n_active"], p,
                                   args["path_loss"], args["noise_psd"])
            for p in (1e-4, 1e-3, 1e-2)
        ]
        assert powers[0] < powers[1] < powers[2]

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            ch.success_probability(-1.0, 1e6, 10, 1e-3, 1.0, 1e-11)


class TestTruncationProbability:
    def test_zero_threshold(self):
        assert ch.truncation_probability(0.0) == 1.0

    def test_mean1_half(self):
        assert abs(ch.truncation_probability(0.5, "mean1") - math.exp(-0.5)) < 1e-15

    def test_monte_carlo(self):
        n = 100_000
        sample = _draw_many(n, 0.9, "mean1", seed=9)
        freq = float(np.mean(np.abs(sample.h_hat) ** 2 >= 0.5))
        closed = ch.truncation_probability(0.5, "mean1")
        sigma = math.sqrt(closed * (1 - closed) / n)
        assert abs(freq - closed) <= 3 * sigma

    def test_negative(self):
        with pytest.raises(ValueError):
            ch.truncation_probability(-0.1)
