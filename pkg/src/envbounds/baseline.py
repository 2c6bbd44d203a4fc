"""Polynomial piecewise bounds in the style of Evans and Swartz.

If ``f^(d)`` is concave on ``[a, b]`` (``h = b - a``), its tangent line at
``a`` lies above it and its chord below it; integrating ``d + 1`` times gives

    lower = sum_{k<=d} f^(k)(a) h^(k+1)/(k+1)! + (f^(d)(b) - f^(d)(a))/h * h^(d+2)/(d+2)!
    upper = sum_{k<=d+1} f^(k)(a) h^(k+1)/(k+1)!

with the roles swapped when ``f^(d)`` is convex. The compound rule applies
this on every panel of an equal-width grid, after splitting at the roots of
``f^(d+2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .density import CurvatureBoundedDensity
from .gaussmath import Interval

__all__ = [
    "DifferentiableIntegrand",
    "EvansResult",
    "integrand_from_density",
    "segment_by_curvature",
    "evans_panel_bounds",
    "evans_compound",
]

SCAN_POINTS = 2048
BISECT_RTOL = 1e-12


@dataclass(frozen=True)
class DifferentiableIntegrand:
    """``eval(order, x)`` returns the ``order``-th derivative of f at x."""

    eval: Callable
    max_order: int = 3
    name: str = ""

    def __call__(self, x):
        return self.eval(0, x)


@dataclass(frozen=True)
class EvansResult:
    lower: float
    upper: float
    n_pieces: int
    segments: list

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


def _pi_derivatives(d: CurvatureBoundedDensity, x, order: int) -> list:
    """``[pi, pi', ..., pi^(order)]`` at x, from derivatives of phi."""
    x = np.asarray(x, dtype=float)
    with np.errstate(under="ignore"):
        pi = np.exp(-np.asarray(d.derivative(0, x), dtype=float))
    out = [pi]
    if order >= 1:
        p1 = np.asarray(d.derivative(1, x), dtype=float)
        out.append(-p1 * pi)
    if order >= 2:
        p2 = np.asarray(d.derivative(2, x), dtype=float)
        out.append((p1 * p1 - p2) * pi)
    if order >= 3:
        p3 = np.asarray(d.derivative(3, x), dtype=float)
        out.append((-p1**3 + 3.0 * p1 * p2 - p3) * pi)
    if order > 3:
        raise ValueError("derivatives of pi are available up to order 3")
    return out


def integrand_from_density(d: CurvatureBoundedDensity, k: int = 0) -> DifferentiableIntegrand:
    """``f(x) = x**k pi(x)`` with derivatives by the product rule."""
    if k < 0:
        raise ValueError("k must be nonnegative")

    def ev(order, x):
        if not 0 <= order <= 3:
            raise ValueError("order must be between 0 and 3")
        x = np.asarray(x, dtype=float)
        dpi = _pi_derivatives(d, x, order)
        total = np.zeros_like(x)
        for j in range(min(order, k) + 1):
            # j-th derivative of x**k
            mono = math.perm(k, j) * x ** (k - j)
            total = total + math.comb(order, j) * mono * dpi[order - j]
        return total[()]

    return DifferentiableIntegrand(ev, 3, f"x^{k} * {d.name}")


def _bisect_root(g, lo: float, hi: float, s_lo: float) -> float:
    while hi - lo > BISECT_RTOL * (1.0 + abs(lo)):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s_mid = np.sign(g(mid))
        if s_mid == 0:
            return mid
        if s_mid == s_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def segment_by_curvature(f: DifferentiableIntegrand, iv: Interval, d: int) -> list:
    """Maximal pieces of ``iv`` on which ``f^(d+2)`` keeps one sign.

    Returns ``[(Interval, concave), ...]``; zero-curvature stretches are
    labelled concave.
    """
    if d not in (0, 1):
        raise ValueError("d must be 0 or 1")
    if not iv.is_finite:
        raise ValueError("curvature segmentation needs a finite interval")
    order = d + 2

    def g(x):
        return float(f.eval(order, x))

    grid = np.linspace(iv.lo, iv.hi, SCAN_POINTS)
    signs = np.sign(np.asarray(f.eval(order, grid), dtype=float))
    # zero samples inherit the previous nonzero sign
    nonzero = signs != 0
    if not nonzero.any():
        return [(iv, True)]
    first = signs[np.argmax(nonzero)]
    filled = np.empty_like(signs)
    current = first
    for i, s in enumerate(signs):
        if s != 0:
            current = s
        filled[i] = current
    cuts = []
    for i in np.nonzero(filled[1:] != filled[:-1])[0]:
        cuts.append(_bisect_root(g, float(grid[i]), float(grid[i + 1]), filled[i]))
    edges = [iv.lo] + cuts + [iv.hi]
    labels = [filled[0]] + [filled[i + 1] for i in np.nonzero(filled[1:] != filled[:-1])[0]]
    return [(Interval(a, b), bool(s <= 0)) for a, b, s in zip(edges[:-1], edges[1:], labels)]


def evans_panel_bounds(f: DifferentiableIntegrand, a: float, b: float, d: int,
                       concave: bool) -> tuple:
    """(lower, upper) bounds of ``int_a^b f`` when ``f^(d)`` is concave/convex."""
    if d not in (0, 1):
        raise ValueError("d must be 0 or 1")
    if not b > a:
        raise ValueError("need a < b")
    h = b - a
    derivs = [float(f.eval(j, a)) for j in range(d + 2)]
    taylor = [derivs[j] * h ** (j + 1) / math.factorial(j + 1) for j in range(d + 2)]
    base = math.fsum(taylor[: d + 1])
    chord = (float(f.eval(d, b)) - derivs[d]) / h * h ** (d + 2) / math.factorial(d + 2)
    with_chord = base + chord
    with_tangent = base + taylor[d + 1]
    if concave:
        return with_chord, with_tangent
    return with_tangent, with_chord


def evans_compound(f: DifferentiableIntegrand, iv: Interval, n_points: int, d: int,
                   segments=None) -> EvansResult:
    """Sum panel bounds over ``n_points - 1`` equal panels of ``iv``,
    further split wherever the curvature of ``f^(d)`` changes sign."""
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    if segments is None:
        segments = segment_by_curvature(f, iv, d)
    grid = np.linspace(iv.lo, iv.hi, n_points)
    inner_cuts = [seg.hi for seg, _ in segments[:-1]]
    edges = np.unique(np.concatenate([grid, inner_cuts]))
    seg_hi = np.array([seg.hi for seg, _ in segments])
    lows, highs = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        j = min(int(np.searchsorted(seg_hi, 0.5 * (a + b))), len(segments) - 1)
        lo, hi = evans_panel_bounds(f, float(a), float(b), d, segments[j][1])
        lows.append(lo)
        highs.append(hi)
    return EvansResult(math.fsum(lows), math.fsum(highs), len(edges) - 1, list(segments))
