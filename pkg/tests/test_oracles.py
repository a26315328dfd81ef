"""Exact Kalman filter and grid Bayes filter used as references."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppcsim.errors import DegenerateBelief, InvalidParameter
from ppcsim.kalman_ppc import KalmanModel
from ppcsim.oracles import (
    GridBelief,
    KalmanBelief,
    default_support,
    gaussian_kernel,
    gaussian_likelihood,
    grid_filter_step,
    identity_kernel,
    kalman_predict,
    kalman_update,
)
from ppcsim.popcode import TuningGrid


def model(a=0.0, b=0.0, q=0.0):
    return KalmanModel(a, b, q, TuningGrid.uniform())


class TestKalmanPredict:
    def test_pure_diffusion(self):
        out = kalman_predict(KalmanBelief(0.0, 1.0), model(q=0.1), 0.0, 1.0)
        assert (out.mean, out.variance) == (0.0, pytest.approx(1.1))

    def test_control_shift(self):
        out = kalman_predict(KalmanBelief(2.0, 0.5), model(b=1.0), 3.0, 0.1)
        assert out.mean == pytest.approx(2.3)
        assert out.variance == 0.5

    def test_linear_decay(self):
        out = kalman_predict(KalmanBelief(1.0, 1.0), model(a=-1.0), 0.0, 0.01)
        assert out.mean == pytest.approx(0.99)
        assert out.variance == pytest.approx(0.98)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(InvalidParameter):
            kalman_predict(KalmanBelief(0.0, 1.0), model(), 0.0, 0.0)


class TestKalmanUpdate:
    def test_equal_variances(self):
        out = kalman_update(KalmanBelief(0.0, 1.0), 1.0, 1.0)
        assert (out.mean, out.variance) == (0.5, 0.5)

    def test_uninformative_observation(self):
        out = kalman_update(KalmanBelief(0.0, 1.0), 5.0, 1e6)
        assert out.mean == pytest.approx(0.0, abs=1e-5)
        assert out.variance == pytest.approx(1.0, rel=1e-5)

    def test_uninformative_prior(self):
        out = kalman_update(KalmanBelief(0.0, 1e6), 2.0, 1.0)
        assert out.mean == pytest.approx(2.0, rel=1e-5)
        assert out.variance == pytest.approx(1.0, rel=1e-5)

    def test_rejects_nonpositive_observation_variance(self):
        with pytest.raises(InvalidParameter):
            kalman_update(KalmanBelief(0.0, 1.0), 0.0, 0.0)

    @given(st.floats(-100, 100), st.floats(1e-3, 1e3), st.floats(-100, 100), st.floats(1e-3, 1e3))
    def test_symmetric_in_its_arguments(self, m1, v1, m2, v2):
        ab = kalman_update(KalmanBelief(m1, v1), m2, v2)
        ba = kalman_update(KalmanBelief(m2, v2), m1, v1)
        assert ab.mean == pytest.approx(ba.mean, rel=1e-9, abs=1e-9)
        assert ab.variance == pytest.approx(ba.variance, rel=1e-9)


class TestGridBelief:
    def test_normalisation_is_enforced(self):
        with pytest.raises(InvalidParameter):
            GridBelief(np.arange(3.0), np.array([0.5, 0.5, 0.5]))

    def test_empty_density(self):
        with pytest.raises(DegenerateBelief):
            GridBelief.from_density(np.arange(3.0), np.zeros(3))

    def test_default_support(self):
        s = default_support()
        assert s.size == 401 and s[0] == -6.0 and s[-1] == 6.0 and 0.0 in s


class TestGridFilter:
    def test_identity_kernel_flat_likelihood(self):
        s = default_support()
        b = GridBelief.gaussian(s, 0.3, 0.7)
        out = grid_filter_step(b, identity_kernel(s), np.ones_like(s))
        np.testing.assert_allclose(out.weights, b.weights, atol=1e-15)

    def test_delta_through_diffusion_kernel(self):
        s = default_support()
        out = grid_filter_step(GridBelief.delta(s, 0.0), gaussian_kernel(s, variance=0.5))
        assert out.variance == pytest.approx(0.5, rel=1e-6)
        assert out.mean == pytest.approx(0.0, abs=1e-12)

    def test_no_mass_is_degenerate(self):
        s = default_support()
        b = GridBelief.delta(s, -5.0)
        far = np.zeros_like(s)
        far[-1] = 1.0
        with pytest.raises(DegenerateBelief):
            grid_filter_step(b, identity_kernel(s), far)

    def test_rejects_unnormalised_kernel(self):
        s = default_support(n=11)
        with pytest.raises(InvalidParameter):
            grid_filter_step(GridBelief.delta(s, 0.0), 2 * identity_kernel(s))

    def test_deterministic_shift_kernel(self):
        s = default_support()
        b = GridBelief.gaussian(s, 0.0, 0.3)
        out = grid_filter_step(b, gaussian_kernel(s, shift=0.45))
        assert out.mean == pytest.approx(0.45, abs=1e-9)

    def test_matches_kalman_recursion(self):
        """100 seeded predict/update cycles agree with the exact filter."""
        rng = np.random.default_rng(2024)
        s = default_support()
        h = s[1] - s[0]
        for _ in range(100):
            m0, v0 = rng.uniform(-1, 1), rng.uniform(0.2, 1.0)
            a, q, dt, u = rng.uniform(-0.5, 0.5), rng.uniform(0, 0.5), 0.1, rng.uniform(-1, 1)
            zm, zv = rng.uniform(-1.5, 1.5), rng.uniform(0.2, 2.0)
            mdl = model(a=a, b=1.0, q=q)
            exact = kalman_update(kalman_predict(KalmanBelief(m0, v0), mdl, u, dt), zm, zv)
            # first-order model: x' = (1 + a dt) x + b u dt + N(0, q dt)
            kernel = gaussian_kernel(s, shift=u * dt, variance=q * dt, scale=1 + a * dt)
            out = grid_filter_step(GridBelief.gaussian(s, m0, v0), kernel,
                                   gaussian_likelihood(zm, zv))
            # first-order predict drops an (a dt)^2 variance term the kernel keeps
            v_pred_exact = v0 * (1 + a * dt) ** 2 + q * dt
            exact_v = v_pred_exact * zv / (v_pred_exact + zv)
            assert abs(out.mean - exact.mean) < h / 2
            assert out.variance == pytest.approx(exact.variance, rel=0.05)
            assert out.variance == pytest.approx(exact_v, rel=0.01)
