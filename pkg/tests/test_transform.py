"""Coordinate transform circuit and divisive gain combination."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppcsim.errors import DegenerateActivity, InvalidParameter
from ppcsim.popcode import PopulationActivity, TuningGrid, decode, expected_activity
from ppcsim.transform import TransformCircuit, combine_gain, output_posterior, transform

gains = st.floats(1e-6, 1e6, allow_nan=False)


def _kl(m1, v1, m2, v2):
    """KL(N(m1, v1) || N(m2, v2))."""
    return 0.5 * (math.log(v2 / v1) + (v1 + (m1 - m2) ** 2) / v2 - 1.0)


@pytest.fixture
def circuit(grid):
    return TransformCircuit.matching(grid)


class TestCombineGain:
    def test_equal_gains(self):
        assert combine_gain(2.0, 2.0) == 1.0

    def test_dominated_by_weaker_input(self):
        assert combine_gain(1e6, 1.0) == pytest.approx(0.999999, rel=1e-6)

    def test_zero_gain_annihilates(self):
        assert combine_gain(0.0, 5.0) == 0.0

    def test_both_zero_is_degenerate(self):
        with pytest.raises(DegenerateActivity):
            combine_gain(0.0, 0.0)

    @pytest.mark.parametrize("g1, g2", [(-1.0, 1.0), (math.nan, 1.0), (1.0, math.inf)])
    def test_rejects_invalid(self, g1, g2):
        with pytest.raises(InvalidParameter):
            combine_gain(g1, g2)

    @given(gains, gains)
    def test_bounded_by_weaker_input(self, g1, g2):
        assert combine_gain(g1, g2) <= min(g1, g2) * (1 + 1e-15)

    @given(gains, gains)
    def test_symmetric(self, g1, g2):
        assert combine_gain(g1, g2) == combine_gain(g2, g1)

    @given(gains, gains, st.floats(0.1, 2.0))
    def test_equivalent_to_adding_variances(self, g1, g2, width):
        w2 = width * width
        assert w2 / combine_gain(g1, g2) == pytest.approx(w2 / g1 + w2 / g2, rel=1e-9)


class TestTransformCircuit:
    def test_matching_output_covers_sum(self, grid, circuit):
        assert circuit.grid_out.lo == 2 * grid.lo
        assert circuit.grid_out.hi == 2 * grid.hi
        assert circuit.grid_out.spacing == pytest.approx(grid.spacing)

    def test_rejects_narrow_output(self, grid):
        with pytest.raises(InvalidParameter):
            TransformCircuit(grid, grid, grid)


class TestTransform:
    def test_means_add_and_variances_add(self, grid, circuit):
        a = expected_activity(grid, 1.0, 10.0)
        b = expected_activity(grid, 2.0, 5.0)
        va, vb = decode(grid, a).variance, decode(grid, b).variance
        out = decode(circuit.grid_out, transform(circuit, a, b))
        assert out.mean == pytest.approx(3.0, abs=1e-4)
        assert out.variance == pytest.approx(va + vb, rel=1e-12)

    def test_expected_output_gain(self, grid, circuit):
        a = expected_activity(grid, 0.0, 40.0)
        b = expected_activity(grid, 0.0, 60.0)
        assert transform(circuit, a, b).total == pytest.approx(24.0, rel=1e-12)

    @given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 500), st.floats(0.5, 500))
    def test_gain_and_variance_forms_agree(self, ma, mb, ga, gb):
        grid = TuningGrid.uniform()
        circuit = TransformCircuit.matching(grid)
        a, b = expected_activity(grid, ma, ga), expected_activity(grid, mb, gb)
        out = decode(circuit.grid_out, transform(circuit, a, b))
        assert out.gain == pytest.approx(combine_gain(ga, gb), rel=1e-9)
        assert out.variance == pytest.approx(
            decode(grid, a).variance + decode(grid, b).variance, rel=1e-9
        )

    @given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 500), st.floats(0.5, 500))
    def test_commutative(self, ma, mb, ga, gb):
        grid = TuningGrid.uniform()
        circuit = TransformCircuit.matching(grid)
        a, b = expected_activity(grid, ma, ga), expected_activity(grid, mb, gb)
        ab = decode(circuit.grid_out, transform(circuit, a, b))
        ba = decode(circuit.grid_out, transform(circuit, b, a))
        assert ab.mean == pytest.approx(ba.mean, rel=1e-12, abs=1e-12)
        assert ab.variance == pytest.approx(ba.variance, rel=1e-12)

    def test_degenerate_input(self, grid, circuit):
        silent = PopulationActivity(np.zeros(grid.size))
        with pytest.raises(DegenerateActivity):
            transform(circuit, silent, expected_activity(grid, 0.0, 1.0))

    def test_output_posterior_matches_deterministic_output(self, grid, circuit):
        a = expected_activity(grid, -0.7, 3.0)
        b = expected_activity(grid, 1.1, 9.0)
        exact = output_posterior(circuit, a, b)
        out = decode(circuit.grid_out, transform(circuit, a, b))
        assert out.variance == pytest.approx(exact.variance, rel=1e-12)
        assert out.mean == pytest.approx(exact.mean, abs=1e-4)

    def test_stochastic_mean_is_unbiased(self, grid, circuit):
        rng = np.random.default_rng(11)
        a = expected_activity(grid, 1.0, 30.0)
        b = expected_activity(grid, -1.5, 20.0)
        target = output_posterior(circuit, a, b).mean
        means = []
        while len(means) < 10_000:
            out = transform(circuit, a, b, rng)
            if out.total > 0:
                means.append(decode(circuit.grid_out, out).mean)
        sem = np.std(means, ddof=1) / math.sqrt(len(means))
        assert abs(np.mean(means) - target) < 2 * sem

    def test_loses_no_more_than_sampling_noise(self, grid, circuit):
        rng = np.random.default_rng(5)
        a = expected_activity(grid, 0.4, 20.0)
        b = expected_activity(grid, -0.9, 30.0)
        exact = output_posterior(circuit, a, b)
        kl_circuit, kl_halved = [], []
        for _ in range(1000):
            out = transform(circuit, a, b, rng)
            if out.total == 0:
                continue
            post = decode(circuit.grid_out, out)
            kl_circuit.append(_kl(post.mean, post.variance, exact.mean, exact.variance))
            # same profile at half the gain
            weak = PopulationActivity(rng.poisson(0.5 * expected_activity(
                circuit.grid_out, exact.mean, exact.gain).counts).astype(float))
            if weak.total == 0:
                continue
            post = decode(circuit.grid_out, weak)
            kl_halved.append(_kl(post.mean, post.variance, exact.mean, exact.variance))
        assert np.mean(kl_circuit) < np.mean(kl_halved)
