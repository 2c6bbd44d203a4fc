import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envbounds.density import LogisticRegressionConfig, make_logreg_target, random_logreg_config
from envbounds.envelope import (
    LOWER_OF_MAJORANTS,
    UPPER_OF_MINORANTS,
    PiecewiseGaussian,
    UnnormGaussian,
    eval_piecewise,
    intersections,
    lower_envelope,
    tangent_majorant,
    tangent_minorant,
    upper_envelope,
)
from envbounds.errors import IdenticalFunctions

GRID = np.linspace(-12, 12, 10_001)


def brute(fs, x, pick):
    return pick(np.stack([g.log_eval(x) for g in fs]), axis=0)


def gaussian(c, mu, sigma):
    return UnnormGaussian(math.log(c), mu, sigma)


class TestTangentBounds:
    def test_quadratic_collapse(self, quadratic):
        for t in (0.0, 2.0, -3.5):
            lo = tangent_minorant(quadratic, t)
            hi = tangent_majorant(quadratic, t)
            assert lo.scale == pytest.approx(math.sqrt(2 * math.pi), rel=1e-14)
            assert lo.mu == pytest.approx(0.0, abs=1e-14) and lo.sigma == 1.0
            assert (hi.log_scale, hi.mu, hi.sigma) == (lo.log_scale, lo.mu, lo.sigma)

    def test_single_datum_minorant(self):
        d = make_logreg_target(LogisticRegressionConfig([1], [1.0], prior_std=1.2))
        g = tangent_minorant(d, 0.0)
        sigma = 1.0 / math.sqrt(0.25 + 1 / 1.44)
        assert g.sigma == pytest.approx(sigma, rel=1e-14)
        assert g.sigma == pytest.approx(1.028991510855, rel=1e-11)
        assert g.mu == pytest.approx(-sigma**2 * 0.5, rel=1e-14)
        x = np.linspace(-10, 10, 2001)
        assert np.all(g(x) <= d.pi(x) * (1 + 1e-12))

    def test_majorant_sigma_is_prior_std(self, logreg):
        for t in (-2.0, 0.0, 1.0, 3.3):
            assert tangent_majorant(logreg, t).sigma == pytest.approx(1.2, rel=1e-15)

    def test_ordering_and_touch(self, logreg, rng):
        x = rng.uniform(-10, 10, 1000)
        for t in rng.uniform(-4, 4, 10):
            lo = tangent_minorant(logreg, t)
            hi = tangent_majorant(logreg, t)
            p = logreg.pi(x)
            assert np.all(lo(x) <= p * (1 + 1e-12))
            assert np.all(hi(x) >= p * (1 - 1e-12))
            assert lo(t) == pytest.approx(logreg.pi(t), rel=1e-12)
            assert hi(t) == pytest.approx(logreg.pi(t), rel=1e-12)
            assert lo.t == t

    def test_invalid(self, quadratic):
        with pytest.raises(ValueError):
            tangent_minorant(quadratic, math.inf)
        with pytest.raises(ValueError):
            UnnormGaussian(0.0, 0.0, 0.0)


class TestIntersections:
    def test_equal_variance_linear_case(self):
        roots = intersections(gaussian(1, -1, 1), gaussian(1, 1, 1))
        assert roots == [pytest.approx(0.0, abs=1e-15)]

    def test_two_roots(self):
        ga, gb = gaussian(1, 0, 1), gaussian(1, 0, 2)
        roots = intersections(ga, gb)
        assert len(roots) == 2 and roots[0] == pytest.approx(-roots[1])
        for r in roots:
            assert ga(r) == pytest.approx(gb(r), rel=1e-10)
        # closed form: x^2 = 8 log 2 / 3
        assert roots[1] == pytest.approx(math.sqrt(8 * math.log(2) / 3), rel=1e-13)

    def test_parallel_in_log_space(self):
        assert intersections(gaussian(1, 0, 1), gaussian(0.1, 0, 1)) == []

    def test_identical(self):
        with pytest.raises(IdenticalFunctions):
            intersections(gaussian(2, 0.5, 1.5), gaussian(2, 0.5, 1.5))

    def test_no_real_roots(self):
        # the narrow one sits entirely below the wide one
        assert intersections(gaussian(0.01, 0, 0.5), gaussian(1, 0, 1)) == []

    @settings(max_examples=200, deadline=None)
    @given(
        st.tuples(st.floats(-3, 3), st.floats(-5, 5), st.floats(0.2, 4)),
        st.tuples(st.floats(-3, 3), st.floats(-5, 5), st.floats(0.2, 4)),
    )
    def test_roots_are_crossings(self, a, b):
        ga, gb = UnnormGaussian(*a), UnnormGaussian(*b)
        try:
            roots = intersections(ga, gb)
        except IdenticalFunctions:
            return
        assert roots == sorted(roots) and len(roots) <= 2
        for r in roots:
            la, lb = ga.log_eval(r), gb.log_eval(r)
            assert abs(la - lb) <= 1e-8 * max(1.0, abs(la), abs(lb))


class TestEnvelopes:
    def test_single_function(self):
        g = gaussian(1, 0, 1)
        for env in (upper_envelope([g]), lower_envelope([g])):
            assert env.breakpoints == () and env.pieces == (g,)

    def test_symmetric_pair(self):
        env = upper_envelope([gaussian(1, -1, 1), gaussian(1, 1, 1)])
        assert env.breakpoints == (pytest.approx(0.0, abs=1e-15),)
        assert env.side == UPPER_OF_MINORANTS

    def test_equal_sigma_majorants_single_breakpoint(self, logreg):
        env = lower_envelope([tangent_majorant(logreg, -1.0), tangent_majorant(logreg, 2.0)])
        assert len(env.breakpoints) == 1 and env.side == LOWER_OF_MAJORANTS

    def test_piece_count_invariant(self):
        with pytest.raises(ValueError):
            PiecewiseGaussian((0.0,), (gaussian(1, 0, 1),), UPPER_OF_MINORANTS)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        d = make_logreg_target(random_logreg_config(seed, n_data=(1, 10), prior_std=(0.8, 2.0)))
        ts = np.random.default_rng(seed).uniform(-4, 4, 8)
        minors = [tangent_minorant(d, t) for t in ts]
        majors = [tangent_majorant(d, t) for t in ts]
        lo, hi = upper_envelope(minors), lower_envelope(majors)
        np.testing.assert_allclose(lo.log_eval(GRID), brute(minors, GRID, np.max), rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(hi.log_eval(GRID), brute(majors, GRID, np.min), rtol=1e-10, atol=1e-10)

    def test_dominance_and_continuity(self, logreg, rng):
        fs = [UnnormGaussian(rng.uniform(-2, 2), rng.uniform(-4, 4), rng.uniform(0.3, 3)) for _ in range(12)]
        for build, pick, sign in ((upper_envelope, np.max, 1), (lower_envelope, np.min, -1)):
            env = build(fs)
            bps = list(env.breakpoints)
            edges = [min([-20.0] + bps) - 5.0] + bps + [max([20.0] + bps) + 5.0]
            for g, a, b in zip(env.pieces, edges[:-1], edges[1:]):
                xs = np.linspace(a, b, 18)[1:-1]
                best = pick(np.stack([f.log_eval(xs) for f in fs]), axis=0)
                np.testing.assert_allclose(g.log_eval(xs), best, rtol=1e-10, atol=1e-12)
            for v, left, right in zip(env.breakpoints, env.pieces[:-1], env.pieces[1:]):
                assert left(v) == pytest.approx(right(v), rel=1e-9)

    def test_permutation_invariance(self, logreg):
        ts = [-2.5, -1.0, 0.0, 0.75, 1.5, 3.0]
        minors = [tangent_minorant(logreg, t) for t in ts]
        ref = upper_envelope(minors)
        for perm in itertools.islice(itertools.permutations(minors), 0, 720, 37):
            env = upper_envelope(list(perm))
            assert env.breakpoints == ref.breakpoints and env.pieces == ref.pieces

    def test_sandwich_and_touch(self, logreg, rng):
        ts = np.sort(rng.uniform(-4, 5, 25))
        lo = upper_envelope([tangent_minorant(logreg, t) for t in ts])
        hi = lower_envelope([tangent_majorant(logreg, t) for t in ts])
        p = logreg.pi(GRID)
        assert np.all(p - lo(GRID) >= -1e-12 * p)
        assert np.all(hi(GRID) - p >= -1e-12 * p)
        np.testing.assert_allclose(lo(ts), logreg.pi(ts), rtol=1e-9)
        np.testing.assert_allclose(hi(ts), logreg.pi(ts), rtol=1e-9)

    def test_refinement_monotone(self, logreg, rng):
        ts = list(rng.uniform(-4, 5, 20))
        small = ts[:8]
        lo_s = upper_envelope([tangent_minorant(logreg, t) for t in small])
        hi_s = lower_envelope([tangent_majorant(logreg, t) for t in small])
        lo_b = upper_envelope([tangent_minorant(logreg, t) for t in ts])
        hi_b = lower_envelope([tangent_majorant(logreg, t) for t in ts])
        assert np.all(lo_b.log_eval(GRID) >= lo_s.log_eval(GRID) - 1e-12)
        assert np.all(hi_b.log_eval(GRID) <= hi_s.log_eval(GRID) + 1e-12)

    def test_eval_piecewise(self):
        fs = [gaussian(1, -1, 1), gaussian(1, 1, 1), gaussian(0.5, 4, 0.5)]
        env = upper_envelope(fs)
        assert eval_piecewise(env, -50.0) == pytest.approx(float(env.pieces[0](-50.0)))
        for v in env.breakpoints:
            assert eval_piecewise(env, v) == pytest.approx(float(max(f(v) for f in fs)), rel=1e-9)
        for x in np.random.default_rng(3).uniform(-8, 8, 200):
            assert eval_piecewise(env, x) == pytest.approx(float(max(f(x) for f in fs)), rel=1e-12)


class TestIncremental:
    @pytest.mark.parametrize("sign", [1.0, -1.0])
    def test_single_merge_matches_general_merge(self, rng, sign):
        from envbounds.envelope import _envelope, _merge, _merge_one

        for _ in range(30):
            fs = [UnnormGaussian(rng.uniform(-2, 2), rng.uniform(-4, 4), rng.uniform(0.3, 3))
                  for _ in range(int(rng.integers(1, 15)))]
            g = UnnormGaussian(rng.uniform(-2, 2), rng.uniform(-4, 4), rng.uniform(0.3, 3))
            env = _envelope(fs, sign)
            assert _merge_one(env, g, sign) == _merge(env, ([], [g]), sign)

    @pytest.mark.parametrize("seed", range(3))
    def test_incremental_equals_rebuild(self, seed):
        from envbounds.bounds import _IncrementalEnvelope

        d = make_logreg_target(random_logreg_config(seed, n_data=(1, 10), prior_std=(0.8, 2.0)))
        ts = np.random.default_rng(seed).uniform(-4, 4, 60)
        lo_inc = _IncrementalEnvelope(1.0, UPPER_OF_MINORANTS)
        hi_inc = _IncrementalEnvelope(-1.0, LOWER_OF_MAJORANTS)
        for t in ts:
            lo = lo_inc.add(tangent_minorant(d, t))
            hi = hi_inc.add(tangent_majorant(d, t))
        full_lo = upper_envelope([tangent_minorant(d, t) for t in ts])
        full_hi = lower_envelope([tangent_majorant(d, t) for t in ts])
        np.testing.assert_allclose(lo.log_eval(GRID), full_lo.log_eval(GRID), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(hi.log_eval(GRID), full_hi.log_eval(GRID), rtol=1e-12, atol=1e-12)
