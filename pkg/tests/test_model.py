import math

import numpy as np
import pytest

from cdukf.model import (
    DEG,
    CoordinatedTurnModel,
    LinearGaussianModel,
    SamplingSchedule,
    euler_maruyama_truth,
    simulate_truth_ensemble,
)

from conftest import rng_for


class TestSchedule:
    def test_regular(self):
        s = SamplingSchedule.regular(5, 0.5)
        np.testing.assert_allclose(s.instants, [0.5, 1.0, 1.5, 2.0, 2.5])
        assert len(s) == 5

    def test_rejects_nonincreasing(self):
        with pytest.raises(ValueError):
            SamplingSchedule(np.array([1.0, 1.0, 2.0]))
        with pytest.raises(ValueError):
            SamplingSchedule(np.array([0.0, 1.0]))


class TestCoordinatedTurnDrift:
    def test_zero_state(self):
        m = CoordinatedTurnModel(delta=0.1)
        np.testing.assert_array_equal(m.drift(0.0, np.zeros(7)), np.zeros(7))

    def test_horizontal_coupling(self):
        omega_rad = 3.0 * DEG  # = 0.0523599
        # degree-carried state: the drift converts at the coupling
        m = CoordinatedTurnModel(delta=0.1)
        x = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 3.0])
        np.testing.assert_allclose(
            m.drift(0.0, x), [1.0, 0.0, 0.0, omega_rad, 0.0, 0.0, 0.0], atol=1e-15
        )
        # radian-carried state: the rate multiplies directly
        m_rad = CoordinatedTurnModel(delta=0.1, omega_state_units="rad")
        x_rad = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0, omega_rad])
        np.testing.assert_allclose(
            m_rad.drift(0.0, x_rad), [1.0, 0.0, 0.0, omega_rad, 0.0, 0.0, 0.0], atol=1e-15
        )

    def test_vertical_channel_decoupled(self):
        m = CoordinatedTurnModel(delta=0.1)
        x = np.array([0.0, 0.0, 0.0, 0.0, 10.0, 2.0, 3.0])
        np.testing.assert_allclose(
            m.drift(0.0, x), [0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0], atol=1e-15
        )

    def test_columnwise_broadcast(self):
        m = CoordinatedTurnModel(delta=0.1)
        cols = rng_for(0).standard_normal((7, 4))
        batched = m.drift(0.0, cols)
        for j in range(4):
            np.testing.assert_array_equal(batched[:, j], m.drift(0.0, cols[:, j]))

    def test_state_unit_conventions(self):
        m = CoordinatedTurnModel(delta=0.1)
        assert m.x0_mean[6] == 3.0 and m.sigma2 == 0.007
        m_rad = CoordinatedTurnModel(delta=0.1, omega_state_units="rad")
        assert m_rad.x0_mean[6] == pytest.approx(3.0 * DEG)
        assert m_rad.sigma2 == pytest.approx(0.007 * DEG)
        # identical physical trajectories under both conventions
        x_deg = np.array([5.0, 1.0, -2.0, 4.0, 0.0, 1.0, 3.0])
        x_rad = x_deg.copy()
        x_rad[6] *= DEG
        np.testing.assert_allclose(
            m.drift(0.0, x_deg)[:6], m_rad.drift(0.0, x_rad)[:6], atol=1e-15
        )


class TestCoordinatedTurnMeasurement:
    def test_unit_vector_probe(self):
        m = CoordinatedTurnModel(delta=0.25)
        e7 = np.zeros(7)
        e7[6] = 1.0
        np.testing.assert_allclose(m.measure(1, e7), [1.0, 1.25])

    def test_row_sums(self):
        m = CoordinatedTurnModel(delta=0.1)
        np.testing.assert_allclose(m.measure(3, np.ones(7)), [7.0, 7.1])

    def test_noise_covariance(self):
        m = CoordinatedTurnModel(delta=1e-3)
        np.testing.assert_allclose(m.R(1), 1e-6 * np.eye(2))

    def test_rank_via_minors(self):
        # all 2x2 minors of H are zero except those touching the last column,
        # which equal delta: rank 2 for delta > 0, rank 1 in the limit
        for delta in (1e-1, 1e-6):
            h = CoordinatedTurnModel(delta=delta).H
            minors = [
                h[0, i] * h[1, j] - h[0, j] * h[1, i]
                for i in range(7)
                for j in range(i + 1, 7)
            ]
            assert max(abs(v) for v in minors) == pytest.approx(delta)
        h0 = np.ones((2, 7))
        assert np.linalg.matrix_rank(h0) == 1


class TestEulerMaruyama:
    def test_deterministic_degenerate(self):
        model = LinearGaussianModel(
            a=np.zeros((2, 2)),
            g=np.zeros((2, 2)),
            q_cov=np.eye(2),
            h=np.eye(2),
            r_cov=np.eye(2),
            x0_mean=np.array([1.0, -2.0]),
            p0=np.eye(2),
        )
        sched = SamplingSchedule.regular(4, 1.0)
        traj = euler_maruyama_truth(model, sched, 0.1, rng_for(0), x0=model.x0_mean)
        np.testing.assert_array_equal(traj, np.tile(model.x0_mean, (4, 1)))

    def test_brownian_variance_law(self):
        model = LinearGaussianModel(
            a=np.zeros((1, 1)),
            g=np.eye(1),
            q_cov=np.eye(1),
            h=np.eye(1),
            r_cov=np.eye(1),
            x0_mean=np.zeros(1),
            p0=np.zeros((1, 1)) + 1e-300,  # pinned start, prior unused
        )
        sched = SamplingSchedule(np.array([1.0]))
        rngs = [rng_for(seed) for seed in range(10_000)]
        ens = simulate_truth_ensemble(model, sched, 0.01, rngs, x0=np.zeros(1))
        var = np.var(ens[:, 0, 0])
        assert abs(var - 1.0) <= 0.05

    def test_noise_free_turn_is_circular(self):
        model = CoordinatedTurnModel(delta=0.1, sigma1=0.0, sigma2_deg=0.0)
        sched = SamplingSchedule.regular(150, 1.0)
        traj = euler_maruyama_truth(model, sched, 5e-4, rng_for(0), x0=model.x0_mean)
        speed = np.hypot(traj[:, 1], traj[:, 3])
        assert np.max(np.abs(speed - 150.0)) / 150.0 <= 1e-3
        np.testing.assert_array_equal(traj[:, 6], np.full(150, model.omega0))

    def test_ensemble_matches_per_run_streams(self):
        model = CoordinatedTurnModel(delta=0.1)
        sched = SamplingSchedule(np.array([0.5, 1.5, 2.0]))
        ens = simulate_truth_ensemble(model, sched, 0.05, [rng_for(7), rng_for(8)])
        for i, seed in enumerate((7, 8)):
            single = euler_maruyama_truth(model, sched, 0.05, rng_for(seed))
            np.testing.assert_array_equal(ens[i], single)

    def test_irregular_gaps_hit_instants(self):
        model = CoordinatedTurnModel(delta=0.1, sigma1=0.0, sigma2_deg=0.0)
        sched = SamplingSchedule(np.array([1.0, 3.0, 3.5]))
        traj = euler_maruyama_truth(model, sched, 0.5, rng_for(1), x0=model.x0_mean)
        assert traj.shape == (3, 7)
        assert np.isfinite(traj).all()
