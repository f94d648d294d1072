"""Stochastic quantizer contract, payload/delay arithmetic, digital rounds."""

import math

import numpy as np
import pytest

from fedlink import channel as ch
from fedlink import digital as dg
from fedlink import tasks
from fedlink.rng import substream


def _radio(convention="mean2", p_max=1e-3):
    return ch.RadioParams(1e6, 1e-11, p_max, 10, 0.9, convention)


def _link(task, n_active, theta, bits=8, outage_mode="empirical", p_max=1e-3,
          convention="mean2"):
    succ = np.array(
        [
            ch.success_probability(theta, 1e6, n_active, p_max, dev.path_loss,
                                   1e-11, convention)
            for dev in task.devices
        ]
    )
    return dg.DigitalLinkConfig(
        radio=_radio(convention, p_max), n_active=n_active, quant_bits=bits,
        range_bits=64, snr_threshold=theta, succ_prob=succ,
        outage_mode=outage_mode,
        delay=dg.tx_delay_digital(n_active, task.dim, bits, 1e6, theta),
    )


class TestQuantizer:
    def test_on_grid_is_deterministic(self):
        # integer moduli with range [0, 2^b - 1] put every point on the grid
        rng = substream(0, "quantizer")
        g = np.array([0.0, 3.0, -7.0, 15.0, -1.0])
        for _ in range(50):
            q = dg.quantize(g, 4, rng)
            np.testing.assert_array_equal(dg.dequantize(q), g)

    def test_two_point_probabilities(self):
        rng = substream(1, "quantizer")
        n = 1_000_000
        g = np.array([0.3])
        hits = 0
        # range must come from the vector itself: embed the endpoints
        vec = np.array([0.0, 1.0, 0.3])
        draws = np.empty(n)
        for i in range(n // 1000):
            for j in range(1000):
                q = dg.quantize(vec, 1, rng)
                draws[i * 1000 + j] = dg.dequantize(q)[2]
        assert set(np.unique(draws)) <= {0.0, 1.0}
        mean = draws.mean()
        sigma = math.sqrt(0.3 * 0.7 / n)
        assert abs(mean - 0.3) <= 3 * sigma

    def test_error_bound_and_variance(self):
        rng = substream(2, "quantizer")
        grid = np.linspace(-2.0, 2.0, 1000)
        intervals = (1 << 3) - 1
        delta = (np.abs(grid).max() - np.abs(grid).min()) / intervals
        reps = 400
        errs = np.empty((reps, grid.shape[0]))
        for i in range(reps):
            errs[i] = dg.dequantize(dg.quantize(grid, 3, rng)) - grid
        assert np.max(np.abs(errs)) <= delta * (1 + 1e-12)
        # per-vector error energy stays below the analytic budget d*delta^2/4
        energy = np.mean(np.sum(errs**2, axis=1))
        assert energy <= grid.shape[0] * delta**2 / 4
        # and the average error vanishes
        mean_err = errs.mean()
        assert abs(mean_err) <= 4 * errs.std() / math.sqrt(errs.size)

    def test_roundtrip_error_bound_random(self):
        rng = substream(3, "quantizer")
        for bits in (1, 2, 6, 12):
            g = rng.standard_normal(256) * 5
            q = dg.quantize(g, bits, rng)
            delta = (q.g_max - q.g_min) / ((1 << bits) - 1)
            err = np.abs(dg.dequantize(q) - g)
            assert np.max(err) <= delta * (1 + 1e-12)

    def test_degenerate_constant_modulus(self):
        rng = substream(4, "quantizer")
        g = np.array([2.0, -2.0, 2.0])
        q = dg.quantize(g, 5, rng)
        assert q.g_min == q.g_max == 2.0
        np.testing.assert_array_equal(q.levels, 0)
        np.testing.assert_array_equal(dg.dequantize(q), g)

    def test_level_range_and_signs(self):
        rng = substream(5, "quantizer")
        g = rng.standard_normal(512)
        q = dg.quantize(g, 4, rng)
        assert q.levels.min() >= 0 and q.levels.max() <= 15
        np.testing.assert_array_equal(q.signs, np.where(g < 0, -1.0, 1.0))

    def test_invalid_bits(self):
        rng = substream(6, "quantizer")
        with pytest.raises(ValueError):
            dg.quantize(np.ones(3), 0, rng)


class TestPayloadAndDelay:
    def test_payload_examples(self):
        assert dg.payload_bits(1, 1, 0) == 2
        assert dg.payload_bits(23860, 8, 64) == 214804
        assert dg.payload_bits(7, 0, 0) == 7

    def test_min_threshold_unit_exponent(self):
        # N d (b+1) / (B t_max) = 1  ->  threshold 1
        theta = dg.min_snr_threshold(10, 100, 8, 1e6, 9e-3)
        assert abs(theta - 1.0) < 1e-12

    def test_min_threshold_vanishes_with_loose_budget(self):
        assert dg.min_snr_threshold(10, 100, 8, 1e6, 1e12) < 1e-5

    def test_min_threshold_meets_budget_exactly(self):
        for t_max in (9e-3, 3.2e-4, 1.7e-2, 0.9):
            theta = dg.min_snr_threshold(10, 320, 8, 1e6, t_max)
            delay = dg.tx_delay_digital(10, 320, 8, 1e6, theta)
            assert delay <= t_max
            assert abs(delay - t_max) <= 1e-9 * t_max

    def test_delay_examples(self):
        assert abs(dg.tx_delay_digital(10, 23860, 8, 1e6, 1.0) - 2.1474) < 1e-12
        d1 = dg.tx_delay_digital(10, 100, 8, 1e6, 1.0)
        d3 = dg.tx_delay_digital(10, 100, 8, 1e6, 3.0)
        assert abs(d3 - d1 / 2) < 1e-15

    def test_delay_requires_positive_threshold(self):
        with pytest.raises(ValueError):
            dg.tx_delay_digital(10, 100, 8, 1e6, 0.0)
        with pytest.raises(ValueError):
            dg.min_snr_threshold(10, 100, 8, 1e6, 0.0)


def _channels(task, seed, convention="mean2", rho=0.9):
    rng = substream(seed, "channel")
    return ch.channels_from_standard(
        rng.standard_normal((task.num_devices, 4)), rho, convention
    )


class TestDigitalRound:
    def test_full_participation_fine_grid(self):
        rng = np.random.default_rng(41)
        task = tasks.make_quadratic_task(
            16, 4, 0.5, 3.0, rng, inclusion=np.ones(4), ball_radius=10.0
        )
        # absurdly large power makes the success probability exactly 1.0
        cfg = _link(task, 4, theta=1.0, bits=24, p_max=1e9)
        assert np.all(cfg.succ_prob >= 1.0 - 1e-12)
        state = tasks.ModelState(0, task.global_optimum + rng.standard_normal(16))
        grads = [tasks.local_gradient(task, k, state.weights) for k in range(4)]
        g_ref = tasks.global_gradient(grads, task.alphas)
        out = dg.digital_round(
            task, state, np.arange(4), _channels(task, 1), cfg, substream(1, "quantizer")
        )
        deltas = [
            (np.abs(g).max() - np.abs(g).min()) / ((1 << 24) - 1) for g in grads
        ]
        assert np.max(np.abs(out.g_hat - g_ref)) <= sum(deltas) + 1e-12

    def test_single_device_unbiased_and_two_valued(self):
        rng = np.random.default_rng(42)
        task = tasks.make_quadratic_task(
            8, 1, 0.0, 2.0, rng, inclusion=np.ones(1), ball_radius=10.0
        )
        state = tasks.ModelState(0, task.global_optimum + rng.standard_normal(8))
        g = tasks.local_gradient(task, 0, state.weights)
        cfg = _link(task, 1, theta=1.0, bits=10, outage_mode="analytic")
        cfg = dg.DigitalLinkConfig(
            radio=cfg.radio, n_active=1, quant_bits=10, range_bits=64,
            snr_threshold=1.0, succ_prob=np.array([0.5]),
            outage_mode="analytic", delay=cfg.delay,
        )
        qrng = substream(7, "quantizer")
        orng = substream(7, "channel")
        trials = 100_000
        total = np.zeros(8)
        both = {0.0: 0, 1.0: 0}
        for _ in range(trials):
            out = dg.digital_round(
                task, state, np.array([0]), _channels(task, 3), cfg, qrng, outage_rng=orng
            )
            total += out.g_hat
            both[out.xi[0] * 0.5] += 1
            if out.xi[0] == 0.0:
                assert np.all(out.g_hat == 0.0)
        mean = total / trials
        # coordinatewise 3-sigma band: values are ~{0, 2Q}, std ~ |g|
        sigma = np.abs(g) + np.abs(g).max() * 0.1
        assert np.all(np.abs(mean - g) <= 4 * sigma / math.sqrt(trials) + 1e-9)
        assert abs(both[1.0] / trials - 0.5) <= 3 * math.sqrt(0.25 / trials)

    def test_all_outage_returns_zero(self):
        rng = np.random.default_rng(43)
        task = tasks.make_quadratic_task(
            4, 3, 0.5, 2.0, rng, inclusion=np.ones(3), ball_radius=10.0
        )
        cfg = _link(task, 3, theta=1e6)
        z = np.zeros((3, 4))  # deep fade: h = 0 for every device
        chans = ch.channels_from_standard(z, 0.9, "mean2")
        state = tasks.ModelState(0, task.global_optimum + 0.5)
        out = dg.digital_round(
            task, state, np.arange(3), chans, cfg, substream(2, "quantizer")
        )
        np.testing.assert_array_equal(out.g_hat, np.zeros(4))
        assert not out.success.any()

    def test_xi_values_and_mean(self):
        rng = np.random.default_rng(44)
        task = tasks.make_quadratic_task(
            6, 5, 0.5, 2.0, rng, inclusion=np.ones(5), ball_radius=10.0
        )
        theta = 300.0
        cfg = _link(task, 5, theta=theta)
        state = tasks.ModelState(0, task.global_optimum + 0.3)
        crng = substream(11, "channel")
        qrng = substream(11, "quantizer")
        xs = []
        for _ in range(20_000):
            chans = ch.channels_from_standard(
                crng.standard_normal((5, 4)), 0.9, "mean2"
            )
            out = dg.digital_round(task, state, np.arange(5), chans, cfg, qrng)
            xs.extend(out.xi)
        xs = np.array(xs)
        allowed = {0.0} | {1.0 / p for p in cfg.succ_prob}
        assert set(np.unique(xs)) <= allowed
        assert abs(xs.mean() - 1.0) <= 4 * xs.std() / math.sqrt(xs.size)

    def test_empty_participants_rejected(self):
        rng = np.random.default_rng(45)
        task = tasks.make_quadratic_task(4, 3, 0.5, 2.0, rng)
        cfg = _link(task, 3, theta=1.0)
        with pytest.raises(ValueError):
            dg.digital_round(
                task, tasks.ModelState(0, task.global_optimum), np.array([]),
                _channels(task, 1), cfg, substream(1, "quantizer"),
            )

    def test_gamma_guard_aborts(self):
        rng = np.random.default_rng(46)
        task = tasks.make_quadratic_task(
            4, 3, 0.5, 2.0, rng, inclusion=np.ones(3), ball_radius=0.1
        )
        cfg = _link(task, 3, theta=1.0)
        far = tasks.ModelState(0, task.global_optimum + 100.0)
        with pytest.raises(tasks.GammaBoundExceeded):
            dg.digital_round(
                task, far, np.arange(3), _channels(task, 1), cfg,
                substream(1, "quantizer"),
            )
