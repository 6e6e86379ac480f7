import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bblab import (
    MeanParams,
    check_holder_derivative,
    check_pq_switch,
    exponent_map,
    p_mean,
    p_mean_arr,
)


def test_param_validation():
    with pytest.raises(ValueError):
        MeanParams(0.0, 0.5)
    with pytest.raises(ValueError):
        MeanParams(0.7, 0.5)
    with pytest.raises(ValueError):
        MeanParams(0.5, -1.0, n=1)
    with pytest.raises(ValueError):
        MeanParams(0.5, -0.5, n=2)
    MeanParams(0.5, -0.49, n=2)  # fine


class TestPMean:
    def test_arithmetic(self):
        assert p_mean(MeanParams(0.5, 1.0), 2.0, 4.0) == pytest.approx(3.0, abs=1e-15)

    def test_zero_argument(self):
        assert p_mean(MeanParams(0.3, -0.2, n=2), 5.0, 0.0) == 0.0
        assert p_mean(MeanParams(0.3, -0.2, n=2), 0.0, 5.0) == 0.0

    def test_geometric(self):
        assert p_mean(MeanParams(0.5, 0.0), 1.0, 4.0) == pytest.approx(2.0, abs=1e-15)

    def test_harmonic(self):
        # p = -1 sits outside the BBL regime; the raw (lam, p) form covers it
        assert p_mean((0.5, -1.0), 1.0, 1.0 / 3.0) == pytest.approx(0.5, abs=1e-15)

    def test_idempotent_exact(self, rng):
        for _ in range(200):
            x = float(rng.uniform(1e-6, 1e6))
            p = float(rng.uniform(-0.9, 3.0))
            lam = float(rng.uniform(0.01, 0.5))
            assert p_mean((lam, p), x, x) == x

    def test_monotone_in_p(self, rng):
        for _ in range(1000):
            x, y = rng.uniform(0.01, 10.0, size=2)
            lam = float(rng.uniform(0.01, 0.5))
            ps = np.sort(rng.uniform(-0.9, 3.0, size=2))
            lo = p_mean((lam, float(ps[0])), x, y)
            hi = p_mean((lam, float(ps[1])), x, y)
            assert lo <= hi + 1e-12 * max(1.0, hi)

    def test_homogeneous(self, rng):
        for _ in range(300):
            x, y = rng.uniform(0.01, 10.0, size=2)
            t = float(rng.uniform(0.01, 100.0))
            lam = float(rng.uniform(0.01, 0.5))
            p = float(rng.uniform(-0.9, 2.0))
            a = p_mean((lam, p), t * x, t * y)
            b = t * p_mean((lam, p), x, y)
            assert a == pytest.approx(b, rel=1e-12)

    def test_continuity_at_zero(self, rng):
        for _ in range(200):
            x, y = rng.uniform(0.01, 10.0, size=2)
            lam = float(rng.uniform(0.01, 0.5))
            g = p_mean((lam, 0.0), x, y)
            for p in (1e-8, -1e-8):
                assert abs(p_mean((lam, p), x, y) - g) <= 1e-6 * max(x, y)

    def test_array_matches_scalar(self, rng):
        xs = rng.uniform(0.0, 5.0, size=50)
        ys = rng.uniform(0.0, 5.0, size=50)
        xs[::7] = 0.0
        for p in (-0.4, 0.0, 0.5, 2.0, 1e-8):
            arr = p_mean_arr(0.3, p, xs, ys)
            for i in range(50):
                assert arr[i] == pytest.approx(p_mean((0.3, p), xs[i], ys[i]), abs=1e-14)


class TestExponentMap:
    def test_zero_fixed_point(self):
        assert exponent_map(0.0, 5) == 0.0

    def test_direct_values(self):
        assert exponent_map(1.0, 1) == pytest.approx(0.5, abs=1e-15)
        assert exponent_map(-0.25, 2) == pytest.approx(-0.5, abs=1e-15)

    def test_rejects_boundary(self):
        with pytest.raises(ValueError):
            exponent_map(-0.5, 2)
        with pytest.raises(ValueError):
            exponent_map(-1.0, 1)


class TestHolderDerivative:
    def test_identity_transport(self):
        mp = MeanParams(0.5, -0.5)
        assert check_holder_derivative(mp, 1.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_example_point(self):
        mp = MeanParams(0.5, -0.5)
        assert check_holder_derivative(mp, 1.0, 2.0, 2.0) >= 0.0

    def test_rejects_bad_p(self):
        with pytest.raises(ValueError):
            check_holder_derivative(MeanParams(0.5, 0.5), 1.0, 1.0, 1.0)

    def test_property_sweep(self, rng):
        for _ in range(1000):
            lam = float(rng.uniform(0.01, 0.5))
            p = float(rng.uniform(-0.99, -0.01))
            t, tt, d = rng.uniform(0.05, 20.0, size=3)
            mp = MeanParams(lam, p)
            assert check_holder_derivative(mp, t, tt, d) >= -1e-12


class TestPqSwitch:
    def test_scale_invariance_equality(self):
        for lam, p, n in [(0.5, -0.2, 1), (0.3, -0.1, 2), (0.25, -0.05, 3)]:
            m = check_pq_switch(lam, p, n, 1.0, 1.0, 1.0, 2.0, 2.0)
            assert m == pytest.approx(0.0, abs=1e-12)

    def test_worked_example(self):
        m = check_pq_switch(0.5, -0.5, 1, a=1.0, b=5.0, c=9.0, u=1.0, v=1.0)
        assert m == pytest.approx(3.2, abs=1e-12)

    def test_rejects_precondition_violation(self):
        with pytest.raises(ValueError):
            check_pq_switch(0.5, -0.2, 1, a=4.0, b=1.0, c=4.0, u=1.0, v=1.0)

    def test_property_sweep(self, rng):
        for _ in range(1000):
            n = int(rng.integers(1, 4))
            lam = float(rng.uniform(0.01, 0.5))
            p = float(rng.uniform(-0.99 / n, -0.01))
            a, c, u, v = rng.uniform(0.1, 10.0, size=4)
            b = (lam * a ** (1.0 / n) + (1 - lam) * c ** (1.0 / n)) ** n
            b *= float(rng.uniform(1.0, 2.0))
            assert check_pq_switch(lam, p, n, a, b, c, u, v) >= -1e-12


@settings(max_examples=200, deadline=None)
@given(
    x=st.floats(1e-3, 1e3),
    y=st.floats(1e-3, 1e3),
    lam=st.floats(0.01, 0.5),
    p=st.floats(-0.9, 3.0),
    q_shift=st.floats(1e-6, 2.0),
)
def test_hypothesis_monotone_and_bounds(x, y, lam, p, q_shift):
    mid = p_mean((lam, p), x, y)
    assert min(x, y) - 1e-12 * max(x, y) <= mid <= max(x, y) * (1 + 1e-12)
    hi = p_mean((lam, p + q_shift), x, y)
    assert mid <= hi + 1e-11 * max(1.0, hi)
