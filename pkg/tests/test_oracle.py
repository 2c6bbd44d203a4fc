import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from envbounds.errors import NoConvergence
from envbounds.gaussmath import REAL_LINE, GaussianParams, Interval, gaussian_moment, partial_moment
from envbounds.envelope import UnnormGaussian
from envbounds.oracle import GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES, integrate


class TestRule:
    def test_weights_sum_to_interval_length(self):
        assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
        assert GAUSS_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)

    def test_polynomial_exactness(self):
        # Kronrod is exact through degree 22, Gauss through 13
        for deg in range(23):
            exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
            assert KRONROD_WEIGHTS @ NODES**deg == pytest.approx(exact, abs=1e-14)
            if deg <= 13:
                assert GAUSS_WEIGHTS @ NODES**deg == pytest.approx(exact, abs=1e-14)


class TestIntegrate:
    def test_square(self):
        res = integrate(lambda x: x * x, Interval(0.0, 1.0))
        assert res.value == pytest.approx(1.0 / 3.0, rel=1e-14)
        assert res.est_error >= 0.0
        assert isinstance(res.value, float) and isinstance(res.est_error, float)

    def test_normal_density(self):
        res = integrate(lambda x: np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi), REAL_LINE)
        assert res.value == pytest.approx(1.0, rel=1e-12)

    def test_second_moment_of_gaussian_kernel(self):
        res = integrate(lambda x: x * x * np.exp(-0.5 * x * x), REAL_LINE)
        ref = math.sqrt(2 * math.pi) * gaussian_moment(2, GaussianParams(0.0, 1.0))
        assert res.value == pytest.approx(ref, rel=1e-12)

    def test_half_lines(self):
        assert integrate(lambda x: np.exp(-x), Interval(3.0, math.inf)).value == pytest.approx(math.exp(-3), rel=1e-12)
        assert integrate(lambda x: np.exp(x), Interval(-math.inf, -2.0)).value == pytest.approx(math.exp(-2), rel=1e-12)

    def test_scalar_only_callable(self):
        res = integrate(lambda x: math.cos(x), Interval(0.0, 1.0))
        assert res.value == pytest.approx(math.sin(1.0), rel=1e-13)

    def test_error_contract(self):
        res = integrate(lambda x: np.sqrt(x), Interval(0.0, 1.0), rel_tol=1e-9)
        assert res.est_error <= max(1e-14, 1e-9 * abs(res.value))
        assert res.value == pytest.approx(2.0 / 3.0, rel=1e-9)

    def test_no_convergence(self):
        with pytest.raises(NoConvergence):
            integrate(lambda x: np.sin(1.0 / x) / x, Interval(1e-9, 1.0), rel_tol=1e-15, abs_tol=1e-300)

    def test_invalid_tolerances(self):
        with pytest.raises(ValueError):
            integrate(lambda x: x, Interval(0.0, 1.0), rel_tol=0.0)

    def test_agrees_with_scipy(self):
        f = lambda x: np.exp(-np.abs(x)) * np.cos(3 * x)  # noqa: E731
        ref, _ = sp_integrate.quad(f, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12, limit=500)
        assert integrate(f, REAL_LINE).value == pytest.approx(ref, rel=1e-9)

    def test_halving_tolerance_never_hurts(self):
        smoke = [
            (lambda x: np.exp(-x * x), REAL_LINE, math.sqrt(math.pi)),
            (lambda x: 1.0 / (1.0 + x * x), REAL_LINE, math.pi),
            (lambda x: np.log1p(x), Interval(0.0, 1.0), 2 * math.log(2) - 1),
        ]
        for f, iv, exact in smoke:
            errs = [abs(integrate(f, iv, rel_tol=tol).value - exact) for tol in (1e-6, 5e-7, 2.5e-7)]
            assert errs[1] <= errs[0] * (1 + 1e-9) + 1e-15
            assert errs[2] <= errs[1] * (1 + 1e-9) + 1e-15

    def test_random_gaussian_partial_moments(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            k = int(rng.integers(0, 7))
            g = UnnormGaussian(rng.uniform(-2, 2), rng.uniform(-3, 3), rng.uniform(0.2, 3))
            lo, hi = np.sort(rng.uniform(-8, 8, 2))
            iv = Interval(lo, hi)
            val = integrate(lambda x: x**k * g(x), iv, abs_tol=1e-300).value
            assert val == pytest.approx(partial_moment(k, g, iv), rel=1e-8, abs=1e-300)
