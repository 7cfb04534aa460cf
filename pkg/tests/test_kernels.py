import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import airy2_kernel_brute, airy_mp, lambda_integral

from airycov import kernels
from airycov.kernels import (
    KernelSlot,
    Process,
    airy1_kernel,
    airy1_matrix,
    airy2_kernel,
    airy2_matrix,
    equal_time_airy_kernel,
    full_line_integral,
)


def _ai(x):
    return float(airy_mp(x))


def _aip(x):
    return float(airy_mp(x, 1))


class TestFullLineIdentity:
    # the closed form the u' > u branch rests on, against panel quadrature
    @pytest.mark.parametrize(
        "t,s,s2", [(0.5, 0.5, 0.1), (1.0, -1.0, 1.0), (0.3, 0.0, 0.0), (2.0, 1.5, -0.5)]
    )
    def test_against_quadrature(self, t, s, s2):
        lo = -40.0 / t - 30.0
        brute = lambda_integral(t, s, s2, lo, 0.0) + lambda_integral(t, s, s2, 0.0, 60.0)
        assert abs(float(full_line_integral(t, s, s2)) - brute) <= 1e-8 * max(1.0, abs(brute))


class TestAiry2:
    def test_equal_time_closed_form(self):
        s, s2 = 0.3, -0.2
        exact = (_ai(s) * _aip(s2) - _aip(s) * _ai(s2)) / (s - s2)
        assert abs(airy2_kernel(0.0, s, 0.0, s2) - exact) <= 1e-12
        assert abs(airy2_kernel(1.7, s, 1.7, s2) - exact) <= 1e-12

    @pytest.mark.parametrize("s", [-3.0, 0.0, 0.7, 5.0])
    def test_diagonal_limit(self, s):
        exact = _aip(s) ** 2 - s * _ai(s) ** 2
        assert abs(airy2_kernel(0.0, s, 0.0, s) - exact) <= 1e-12
        assert abs(equal_time_airy_kernel([s])[0, 0] - exact) <= 1e-13

    def test_subtraction_branch_against_brute_force(self):
        value = airy2_kernel(0.0, 0.5, 0.5, 0.1)
        assert abs(value - airy2_kernel_brute(0.0, 0.5, 0.5, 0.1)) <= 1e-8

    @pytest.mark.parametrize(
        "u,s,u2,s2",
        [
            (0.0, 0.0, 0.25, 0.0),
            (0.0, -3.0, 1.0, 2.0),
            (1.0, 4.0, 3.0, -4.0),
            (0.0, -12.0, 4.0, -12.0),
            (0.0, 12.0, 4.0, 12.0),
            (0.0, 6.0, 2.5, -11.0),
            (2.0, 1.0, 0.0, 1.5),
            (4.0, -12.0, 0.0, -12.0),
            (1.0, 3.0, 0.0, -7.0),
        ],
    )
    def test_box_accuracy(self, u, s, u2, s2):
        brute = airy2_kernel_brute(u, s, u2, s2)
        assert abs(airy2_kernel(u, s, u2, s2) - brute) <= 1e-12 * max(1.0, abs(brute)) + 1e-12

    @pytest.mark.parametrize("n", [40, 80, 160])
    @pytest.mark.parametrize("t", [-4.0, -1.0, -0.1, 0.1, 1.0, 4.0])
    def test_rule_doubling(self, n, t):
        x = np.linspace(-12.0, 12.0, 13)
        a = airy2_matrix(0.0, x, t, x, n_lambda=n, mu_panels=n // 40)
        b = airy2_matrix(0.0, x, t, x, n_lambda=2 * n, mu_panels=n // 20)
        if n >= 80:
            assert np.max(np.abs(a - b)) <= 1e-12
        else:
            assert np.all(np.isfinite(a))

    @settings(max_examples=30, deadline=None)
    @given(
        u=st.floats(-3, 3),
        t=st.floats(-4, 4),
        s=st.floats(-12, 12),
        s2=st.floats(-12, 12),
        shift=st.floats(-5, 5),
    )
    def test_symmetry_and_time_shift(self, u, t, s, s2, shift):
        k = airy2_kernel(u, s, u + t, s2)
        assert abs(k - airy2_kernel(u, s2, u + t, s)) <= 1e-12
        assert abs(k - airy2_kernel(u + shift, s, u + shift + t, s2)) <= 1e-12

    @settings(max_examples=40, deadline=None)
    @given(points=st.lists(st.floats(-8, 8), min_size=1, max_size=8))
    def test_equal_time_gram_is_psd(self, points):
        g = equal_time_airy_kernel(np.array(points))
        assert np.max(np.abs(g - g.T)) <= 1e-13
        assert np.linalg.eigvalsh(0.5 * (g + g.T)).min() >= -1e-10

    def test_matrix_matches_pointwise(self):
        x = np.array([-2.0, 0.0, 1.5])
        y = np.array([-1.0, 0.5])
        m = airy2_matrix(0.0, x, 0.7, y)
        for i, a in enumerate(x):
            for j, b in enumerate(y):
                assert abs(m[i, j] - airy2_kernel(0.0, a, 0.7, b)) <= 1e-12

    def test_direct_route_takes_over(self):
        # G is huge here, so subtraction would lose every digit
        t, s = 4.0, -12.0
        assert kernels.log_full_line_integral(t, s, s) > kernels.SUBTRACTION_LOGMAX
        value = airy2_kernel(0.0, s, t, s)
        assert math.isfinite(value)
        assert abs(value - airy2_kernel_brute(0.0, s, t, s)) <= 1e-12


class TestAiry1:
    def test_equal_time_is_airy(self):
        for s, s2 in [(0.0, 0.0), (0.5, -0.2), (-3.0, 1.0)]:
            assert abs(airy1_kernel(0.7, s, 0.7, s2) - _ai(s + s2)) <= 1e-13
            assert airy1_kernel(0.0, s, 0.0, s2) == airy1_kernel(0.0, s2, 0.0, s)

    def test_substitution_example(self):
        with mpmath.workdps(30):
            exact = float(mpmath.airyai(1) * mpmath.exp(mpmath.mpf(2) / 3) - 1 / mpmath.sqrt(4 * mpmath.pi))
        assert abs(airy1_kernel(0.0, 0.0, 1.0, 0.0) - exact) <= 1e-13

    @pytest.mark.parametrize("u,s,u2,s2", [(0.0, 1.0, 2.0, -1.0), (1.0, -2.0, 0.0, 3.0), (0.0, 5.0, 3.0, 8.0)])
    def test_against_extended_precision(self, u, s, u2, s2):
        t = u2 - u
        with mpmath.workdps(40):
            val = mpmath.airyai(s + s2 + t * t) * mpmath.exp(t * (s + s2) + mpmath.mpf(2) / 3 * t**3)
            if t > 0:
                val -= mpmath.exp(-((s2 - s) ** 2) / (4 * t)) / mpmath.sqrt(4 * mpmath.pi * t)
            exact = float(val)
        assert abs(airy1_kernel(u, s, u2, s2) - exact) <= 1e-13 * max(1.0, abs(exact))

    def test_tiny_gap(self):
        # the Gaussian term tends to a delta; it must stay finite and match the formula
        t = 1e-9
        k = airy1_kernel(0.0, 0.1, t, 0.1)
        expected = _ai(0.2 + t * t) * math.exp(0.2 * t) - 1.0 / math.sqrt(4 * math.pi * t)
        assert math.isfinite(k)
        assert k == pytest.approx(expected, rel=1e-12)
        assert airy1_kernel(0.0, 0.1, t, 3.0) == pytest.approx(_ai(3.1), rel=1e-6)

    def test_matrix_shape(self):
        m = airy1_matrix(0.0, np.zeros(3), 1.0, np.ones(5))
        assert m.shape == (3, 5)


class TestSlot:
    def test_dispatch(self):
        slot = KernelSlot(Process.AIRY2, 0.0, 0.5)
        assert slot(0.5, 0.1) == airy2_kernel(0.0, 0.5, 0.5, 0.1)
        slot1 = KernelSlot(Process.AIRY1, 0.0, 1.0)
        assert slot1(0.0, 0.0) == airy1_kernel(0.0, 0.0, 1.0, 0.0)
        eq = KernelSlot(Process.AIRY2, 0.3, 0.3).matrix(np.array([0.0, 1.0]), np.array([0.5]))
        assert eq.shape == (2, 1)

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_non_finite_arguments(self, bad):
        with pytest.raises(ValueError):
            airy2_kernel(0.0, bad, 0.0, 0.0)
        with pytest.raises(ValueError):
            airy1_kernel(0.0, 0.0, bad, 0.0)


def test_doctest_examples():
    import doctest

    assert doctest.testmod(kernels).failed == 0
