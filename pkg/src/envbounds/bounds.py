"""Certified bounds on moment integrals and the adaptive refinement loop.

For ``f(x) = x**k`` and envelopes ``lower <= pi <= upper``,

    int f+ lower - int f- upper  <=  int f pi  <=  int f+ upper - int f- lower,

and every piece of the right-hand sides is a truncated Gaussian moment.
:func:`refine` grows the tangency set one point at a time, always inside the
interval whose bound gap is largest, drawing points without replacement from
a dyadic grid over a Gaussian-quantile compact.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .density import CurvatureBoundedDensity
from .envelope import (
    PiecewiseGaussian,
    UnnormGaussian,
    _merge_one,
    LOWER_OF_MAJORANTS,
    UPPER_OF_MINORANTS,
    lower_envelope,
    tangent_majorant,
    tangent_minorant,
    upper_envelope,
)
from .errors import PoolExhausted
from .gaussmath import Interval, partial_moments, std_normal_inv_cdf

__all__ = [
    "MomentSpec",
    "TangencyState",
    "BoundsReport",
    "CONVERGED",
    "POOL_EXHAUSTED",
    "BUDGET_REACHED",
    "signed_piece_integral",
    "total_bounds",
    "compact_interval",
    "locate_mode",
    "refinement_compact",
    "dyadic_pool",
    "select_candidate",
    "refine",
    "envelope_gap",
    "build_envelopes",
    "write_history_csv",
]

CONVERGED = "converged"
POOL_EXHAUSTED = "pool_exhausted"
BUDGET_REACHED = "budget_reached"

DEFAULT_EPS = 1e-6
DEFAULT_ELL = 10_000
DEFAULT_T1 = 1.0


@dataclass(frozen=True)
class MomentSpec:
    """Monomial test function ``f(x) = x**k``."""

    k: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("k must be a nonnegative integer")


def _spec(spec) -> MomentSpec:
    return spec if isinstance(spec, MomentSpec) else MomentSpec(int(spec))


def _piece_moments(k, env: PiecewiseGaussian, lo, hi):
    """Integrals of x**k times the active piece of ``env`` over [lo, hi] pieces."""
    bp, _, mu, sigma, log_scale = env.arrays
    with np.errstate(invalid="ignore"):
        finite_mid = np.where(
            np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi),
            np.where(np.isfinite(lo), lo + 1.0, hi - 1.0),
        )
    finite_mid = np.where(np.isinf(lo) & np.isinf(hi), 0.0, finite_mid)
    idx = np.searchsorted(bp, finite_mid, side="right")
    return partial_moments(k, log_scale[idx], mu[idx], sigma[idx], lo, hi)


def _elementary(upper: PiecewiseGaussian, lower: PiecewiseGaussian, k: int, cuts):
    """Split the line at every breakpoint, at 0 (odd k) and at ``cuts``.

    Returns (lo, hi, lower_contrib, upper_contrib) arrays over the pieces.
    """
    pts = [upper.arrays[0], lower.arrays[0], np.asarray(cuts, dtype=float)]
    if k % 2 == 1:
        pts.append(np.zeros(1))
    edges = np.unique(np.concatenate(pts))
    lo = np.concatenate([[-math.inf], edges])
    hi = np.concatenate([edges, [math.inf]])
    with_upper = _piece_moments(k, upper, lo, hi)
    with_lower = _piece_moments(k, lower, lo, hi)
    if k % 2 == 1:
        # x**k < 0 left of the origin: f- picks the opposite envelope
        negative = hi <= 0.0
        low = np.where(negative, with_upper, with_lower)
        high = np.where(negative, with_lower, with_upper)
    else:
        low, high = with_lower, with_upper
    return lo, hi, low, high


def signed_piece_integral(upper: PiecewiseGaussian, lower: PiecewiseGaussian, spec,
                          S: Interval) -> tuple:
    """(lower_i, upper_i) bounds of ``int_S x**k pi(x) dx``."""
    k = _spec(spec).k
    cuts = [v for v in (S.lo, S.hi) if math.isfinite(v)]
    lo, hi, low, high = _elementary(upper, lower, k, cuts)
    inside = (lo >= S.lo) & (hi <= S.hi)
    return float(math.fsum(low[inside])), float(math.fsum(high[inside]))


@dataclass(frozen=True)
class IntervalBound:
    interval: Interval
    lower: float
    upper: float

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def total_bounds(upper: PiecewiseGaussian, lower: PiecewiseGaussian, spec,
                 T: Sequence[float]):
    """Totals and per-interval bounds over S_1 = (-inf, t_1], ..., [t_M, inf).

    Returns ``(lower, upper, per_interval)`` with per_interval a list of
    :class:`IntervalBound`.
    """
    k = _spec(spec).k
    points = np.asarray(T, dtype=float)
    if points.size == 0:
        raise ValueError("need at least one tangency point")
    lo, hi, low, high = _elementary(upper, lower, k, points)
    # every elementary piece lies inside exactly one S_i
    owner = np.searchsorted(points, lo, side="right")
    owner = np.where(np.isinf(lo), 0, owner)
    n = points.size + 1
    per_low = np.bincount(owner, weights=low, minlength=n).tolist()
    per_high = np.bincount(owner, weights=high, minlength=n).tolist()
    edges = [-math.inf] + list(points) + [math.inf]
    per = [IntervalBound(Interval(edges[i], edges[i + 1]), per_low[i], per_high[i])
           for i in range(n)]
    return float(math.fsum(low)), float(math.fsum(high)), per


def compact_interval(d: CurvatureBoundedDensity, t1: float, eps: float = DEFAULT_EPS) -> Interval:
    """Central ``1 - eps`` quantile range of the majorant built at ``t1``."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    g = tangent_majorant(d, t1)
    half = -std_normal_inv_cdf(0.5 * eps) * g.sigma
    return Interval(g.mu - half, g.mu + half)


def locate_mode(d: CurvatureBoundedDensity, t0: float, tol: float = 1e-10,
                max_iter: int = 500) -> float:
    """Minimizer of phi by repeatedly jumping to the mean of the minorant.

    Each step minimizes a quadratic upper bound on phi, so phi never increases.
    """
    t = float(t0)
    for _ in range(max_iter):
        step = float(d.dphi(t)) / float(d.beta(t))
        t -= step
        if abs(step) <= tol * (1.0 + abs(t)):
            break
    return t


def refinement_compact(d: CurvatureBoundedDensity, t1: float,
                       eps: float = DEFAULT_EPS) -> Interval:
    """Hull of the compacts built at ``t1`` and at the mode of ``pi``.

    The compact at ``t1`` alone can miss the mass of ``pi`` when the majorant
    there is loose; adding the one centred at the mode prevents that.
    """
    first = compact_interval(d, t1, eps)
    at_mode = compact_interval(d, locate_mode(d, t1), eps)
    return Interval(min(first.lo, at_mode.lo), max(first.hi, at_mode.hi))


def dyadic_pool(iv: Interval, ell: int) -> np.ndarray:
    """Grid of step 2**-depth over [floor(a), ceil(b)], depth set by ``ell``."""
    if not iv.is_finite:
        raise ValueError("the pool needs a finite interval")
    if int(ell) != ell or ell < 1:
        raise ValueError("ell must be a positive integer")
    start = math.floor(iv.lo)
    n_int = math.ceil(iv.hi) - start
    per_unit = max(1, int(ell) // n_int)
    depth = per_unit.bit_length() - 1  # floor(log2)
    count = n_int * (1 << depth) + 1
    return start + np.arange(count, dtype=float) / (1 << depth)


@dataclass(frozen=True)
class TangencyState:
    """Current tangency points, remaining candidates and the compact."""

    points: tuple
    pool: np.ndarray = field(repr=False)
    compact: Interval
    # stands in for the mean spacing while fewer than two points exist
    spacing_fallback: float = 1.0

    def __post_init__(self):
        pts = tuple(float(t) for t in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "pool", np.asarray(self.pool, dtype=float))


def select_candidate(state: TangencyState, gaps: Sequence[float]):
    """Pick the next tangency point; returns ``(t_hat, new_state)``.

    Raises :class:`PoolExhausted` when no interval holds a candidate.
    """
    T = state.points
    U = state.pool
    m = len(T)
    if len(gaps) != m + 1:
        raise ValueError("expected one gap per interval")
    if U.size == 0:
        raise PoolExhausted("candidate pool is empty")
    # candidates per interval S_i = [t_{i-1}, t_i]
    cut = np.searchsorted(U, np.asarray(T), side="left")
    bounds = np.concatenate([[0], cut, [U.size]])
    has = bounds[1:] > bounds[:-1]
    gaps = np.asarray(gaps, dtype=float)
    iota = int(np.argmax(gaps))
    if not has[iota]:
        if not has.any():
            raise PoolExhausted("no interval contains a candidate")
        masked = np.where(has, gaps, -np.inf)
        iota = int(np.argmax(masked))
    if 0 < iota < m:
        target = 0.5 * (T[iota - 1] + T[iota])
    else:
        spacing = (T[-1] - T[0]) / (m - 1) if m >= 2 else state.spacing_fallback
        target = T[0] - spacing if iota == 0 else T[-1] + spacing
    cand = U[bounds[iota]:bounds[iota + 1]]
    dist = np.abs(cand - target)
    j = int(np.argmin(dist))  # first minimum is the smaller candidate
    t_hat = float(cand[j])
    pos = int(bounds[iota]) + j
    new_pool = np.delete(U, pos)
    new_points = list(T)
    bisect.insort(new_points, t_hat)
    return t_hat, replace(state, points=tuple(new_points), pool=new_pool)


@dataclass(frozen=True)
class BoundsReport:
    lower: float
    upper: float
    per_interval: list
    # rows (n, lower, upper, gap, new_point)
    history: list
    n_stop: int
    status: str
    points: tuple = ()
    compact: Optional[Interval] = None
    k: int = 0

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


def build_envelopes(d: CurvatureBoundedDensity, T: Sequence[float]):
    """(upper, lower) envelopes of ``pi`` for tangency set ``T``."""
    upper = lower_envelope([tangent_majorant(d, t) for t in T])
    lower = upper_envelope([tangent_minorant(d, t) for t in T])
    return upper, lower


def envelope_gap(d: CurvatureBoundedDensity, T: Sequence[float], x):
    """Pointwise distance between the upper and lower envelopes."""
    upper, lower = build_envelopes(d, T)
    return upper(x) - lower(x)


class _IncrementalEnvelope:
    """Envelope kept up to date by merging one new Gaussian at a time."""

    def __init__(self, sign: float, side: str):
        self.sign = sign
        self.side = side
        self.state = None

    def add(self, g: UnnormGaussian) -> PiecewiseGaussian:
        if self.state is None:
            self.state = ([], [g])
        else:
            self.state = _merge_one(self.state, g, self.sign)
        bps, pcs = self.state
        return PiecewiseGaussian(tuple(bps), tuple(pcs), self.side)


def _stop(lower: float, upper: float, tau: float, relative: bool) -> bool:
    gap = upper - lower
    if relative:
        return gap <= tau * max(abs(lower), abs(upper), 1e-300)
    return gap <= tau


def refine(d: CurvatureBoundedDensity, spec=0, tau: float = 1e-4, t1: float = DEFAULT_T1,
           eps: float = DEFAULT_EPS, ell: int = DEFAULT_ELL, *, relative: bool = True,
           max_points: Optional[int] = None,
           callback: Optional[Callable] = None) -> BoundsReport:
    """Adaptive tangency-point refinement of certified bounds on
    ``int x**k pi(x) dx``.

    Stops once the gap is at most ``tau`` (relative to the larger bound
    magnitude unless ``relative=False``), when the candidate pool runs dry, or
    after ``max_points`` tangency points. ``callback(n, points, upper, lower,
    lower_bound, upper_bound)`` is invoked after every bound evaluation.
    """
    k = _spec(spec).k
    if not tau >= 0:
        raise ValueError("tau must be nonnegative")
    compact = refinement_compact(d, t1, eps)
    pool = dyadic_pool(compact, ell)
    start = float(min(max(round(t1), pool[0]), pool[-1]))
    pool = pool[pool != start]
    first_major = tangent_majorant(d, start)
    state = TangencyState((start,), pool, compact, spacing_fallback=first_major.sigma)

    upper_env = _IncrementalEnvelope(-1.0, LOWER_OF_MAJORANTS)
    lower_env = _IncrementalEnvelope(1.0, UPPER_OF_MINORANTS)
    upper = upper_env.add(first_major)
    lower = lower_env.add(tangent_minorant(d, start))

    history = []
    new_point = start
    n = 0
    while True:
        n += 1
        lo, hi, per = total_bounds(upper, lower, k, state.points)
        history.append((n, lo, hi, hi - lo, new_point))
        if callback is not None:
            callback(n, state.points, upper, lower, lo, hi)
        if tau > 0 and _stop(lo, hi, tau, relative):
            status = CONVERGED
            break
        if max_points is not None and len(state.points) >= max_points:
            status = BUDGET_REACHED
            break
        try:
            new_point, state = select_candidate(state, [b.gap for b in per])
        except PoolExhausted:
            status = POOL_EXHAUSTED
            break
        upper = upper_env.add(tangent_majorant(d, new_point))
        lower = lower_env.add(tangent_minorant(d, new_point))

    return BoundsReport(
        lower=lo, upper=hi, per_interval=per, history=history, n_stop=n,
        status=status, points=state.points, compact=compact, k=k,
    )


def write_history_csv(report: BoundsReport, path_or_file) -> None:
    """One row per iteration: ``n,lower,upper,gap,new_point``."""
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "lower", "upper", "gap", "new_point"])
        for n, lo, hi, gap, t in report.history:
            w.writerow([n, repr(float(lo)), repr(float(hi)), repr(float(gap)), repr(float(t))])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)
