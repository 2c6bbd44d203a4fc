"""Gaussian tangent bounds and their piecewise upper/lower envelopes."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .density import CurvatureBoundedDensity
from .errors import IdenticalFunctions
from .gaussmath import LOG_SQRT2PI

__all__ = [
    "UnnormGaussian",
    "PiecewiseGaussian",
    "UPPER_OF_MINORANTS",
    "LOWER_OF_MAJORANTS",
    "tangent_minorant",
    "tangent_majorant",
    "intersections",
    "upper_envelope",
    "lower_envelope",
    "eval_piecewise",
]

UPPER_OF_MINORANTS = "upper_of_minorants"
LOWER_OF_MAJORANTS = "lower_of_majorants"

QUAD_COEF_CUTOFF = 1e-14
DISC_CUTOFF = 1e-12
FUSE_TOL = 1e-12
TANGENCY_RTOL = 1e-12


@dataclass(frozen=True)
class UnnormGaussian:
    """``x -> C g(x; mu, sigma)`` stored through ``log C``.

    ``t`` records the tangency point the bound was built at.
    """

    log_scale: float
    mu: float
    sigma: float
    t: float = math.nan
    log_peak: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not math.isfinite(self.log_scale):
            raise ValueError("scale must be positive and finite")
        object.__setattr__(self, "log_peak", self.log_scale - math.log(self.sigma) - LOG_SQRT2PI)

    @property
    def scale(self) -> float:
        return math.exp(self.log_scale)

    def log_eval(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return (self.log_peak - 0.5 * z * z)[()]

    def __call__(self, x):
        return np.exp(self.log_eval(x))

    def log_at(self, x: float) -> float:
        """Scalar fast path of :meth:`log_eval`."""
        z = (x - self.mu) / self.sigma
        return self.log_peak - 0.5 * z * z

    def sort_key(self):
        return (self.t, self.log_scale, self.mu, self.sigma)


def _tangent(d: CurvatureBoundedDensity, t: float, curvature: float) -> UnnormGaussian:
    t = float(t)
    if not (math.isfinite(t) and curvature > 0):
        raise ValueError(f"need finite t and positive curvature, got t={t}, c={curvature}")
    var = 1.0 / curvature
    phi_t = float(d.phi(t))
    slope = float(d.dphi(t))
    g = UnnormGaussian(
        log_scale=0.5 * math.log(2.0 * math.pi * var) - phi_t + 0.5 * var * slope * slope,
        mu=t - var * slope,
        sigma=math.sqrt(var),
        t=t,
    )
    err = abs(g.log_eval(t) + phi_t)
    if err > TANGENCY_RTOL * max(1.0, abs(phi_t), var * slope * slope):
        raise ArithmeticError(f"tangent bound at t={t} misses pi(t) (log error {err:.3g})")
    return g


def tangent_minorant(d: CurvatureBoundedDensity, t: float) -> UnnormGaussian:
    """Gaussian touching ``pi`` at ``t`` from below (uses ``beta``)."""
    return _tangent(d, t, float(d.beta(t)))


def tangent_majorant(d: CurvatureBoundedDensity, t: float) -> UnnormGaussian:
    """Gaussian touching ``pi`` at ``t`` from above (uses ``nu``)."""
    return _tangent(d, t, float(d.nu_at(t)))


def _log_diff_coefficients(ga: UnnormGaussian, gb: UnnormGaussian):
    """Coefficients of log ga - log gb as a quadratic in y = x - ga.mu."""
    shift = gb.mu - ga.mu
    inv_a = 1.0 / (ga.sigma * ga.sigma)
    inv_b = 1.0 / (gb.sigma * gb.sigma)
    a2 = 0.5 * (inv_b - inv_a)
    a1 = -shift * inv_b
    a0 = ga.log_peak - gb.log_peak + 0.5 * shift * shift * inv_b
    return a2, a1, a0


def intersections(ga: UnnormGaussian, gb: UnnormGaussian) -> list:
    """Abscissae (ascending) where the two Gaussians take equal values."""
    a2, a1, a0 = _log_diff_coefficients(ga, gb)
    origin = ga.mu
    scale0 = max(abs(ga.log_peak), abs(gb.log_peak), 1.0)
    if abs(a2) < QUAD_COEF_CUTOFF * max(abs(a1), 1.0):
        if abs(a1) < QUAD_COEF_CUTOFF * max(1.0 / ga.sigma**2, 1.0 / gb.sigma**2):
            if abs(a0) <= 1e-13 * scale0:
                raise IdenticalFunctions("functions coincide")
            return []
        return [origin - a0 / a1]
    disc = a1 * a1 - 4.0 * a2 * a0
    ref = max(a1 * a1, abs(4.0 * a2 * a0), 1e-300)
    if abs(disc) < DISC_CUTOFF * ref:
        return [origin - a1 / (2.0 * a2)]
    if disc < 0:
        return []
    root = math.sqrt(disc)
    # stable pair of roots
    q = -0.5 * (a1 + math.copysign(root, a1))
    if q == 0.0:
        y = [0.0, 0.0]
    else:
        y = [q / a2, a0 / q]
    return sorted(origin + v for v in y)


@dataclass(frozen=True)
class PiecewiseGaussian:
    """Breakpoints ``v_1 < ... < v_N`` and the active Gaussian on each of the
    ``N + 1`` open intervals (first and last unbounded)."""

    breakpoints: tuple
    pieces: tuple
    side: str

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one more piece than breakpoints")

    @property
    def arrays(self):
        cache = self.__dict__.get("_arrays")
        if cache is None:
            cache = (
                np.array(self.breakpoints, dtype=float),
                np.array([g.log_peak for g in self.pieces]),
                np.array([g.mu for g in self.pieces]),
                np.array([g.sigma for g in self.pieces]),
                np.array([g.log_scale for g in self.pieces]),
            )
            object.__setattr__(self, "_arrays", cache)
        return cache

    def piece_index(self, x):
        bp = self.arrays[0]
        return np.searchsorted(bp, x, side="right")

    def log_eval(self, x):
        bp, log_peak, mu, sigma, _ = self.arrays
        idx = np.searchsorted(bp, x, side="right")
        z = (np.asarray(x, dtype=float) - mu[idx]) / sigma[idx]
        return (log_peak[idx] - 0.5 * z * z)[()]

    def __call__(self, x):
        return np.exp(self.log_eval(x))


def eval_piecewise(pw: PiecewiseGaussian, x: float) -> float:
    i = bisect.bisect_right(pw.breakpoints, x)
    return float(pw.pieces[i](x))


def _probe(lo: float, hi: float) -> float:
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(lo):
        return hi - max(1.0, abs(hi))
    if math.isinf(hi):
        return lo + max(1.0, abs(lo))
    return 0.5 * (lo + hi)


def _strictly_inside(r: float, lo: float, hi: float) -> bool:
    if not lo < r < hi:
        return False
    if math.isfinite(lo) and r - lo <= FUSE_TOL * (1.0 + abs(lo)):
        return False
    if math.isfinite(hi) and hi - r <= FUSE_TOL * (1.0 + abs(hi)):
        return False
    return True


def _pick(fa: UnnormGaussian, fb: UnnormGaussian, lo: float, hi: float, sign: float):
    if fa is fb:
        return fa
    x = _probe(lo, hi)
    va = sign * fa.log_at(x)
    vb = sign * fb.log_at(x)
    if abs(va - vb) <= 1e-15 * max(1.0, abs(va)):
        return fa if fa.sort_key() <= fb.sort_key() else fb
    return fa if va > vb else fb


def _merge(env_a, env_b, sign):
    bps_a, pcs_a = env_a
    bps_b, pcs_b = env_b
    cuts = sorted(set(bps_a) | set(bps_b))
    bounds = [-math.inf] + cuts + [math.inf]
    out_bps: list = []
    out_pcs: list = []

    def emit(v, g):
        if out_pcs and out_pcs[-1] is g:
            return
        if out_pcs:
            if out_bps and abs(v - out_bps[-1]) <= FUSE_TOL * (1.0 + abs(v)):
                # zero-width interval: its piece is dropped
                out_pcs[-1] = g
                if len(out_pcs) >= 2 and out_pcs[-2] is g:
                    out_pcs.pop()
                    out_bps.pop()
                return
            out_bps.append(v)
        out_pcs.append(g)

    ia = ib = 0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        while ia < len(bps_a) and bps_a[ia] <= lo:
            ia += 1
        while ib < len(bps_b) and bps_b[ib] <= lo:
            ib += 1
        fa, fb = pcs_a[ia], pcs_b[ib]
        try:
            roots = intersections(fa, fb)
        except IdenticalFunctions:
            roots = []
        inner = [r for r in roots if _strictly_inside(r, lo, hi)]
        edges = [lo] + inner + [hi]
        for s_lo, s_hi in zip(edges[:-1], edges[1:]):
            emit(s_lo, _pick(fa, fb, s_lo, s_hi, sign))
    return out_bps, out_pcs


def _contested(bps, pcs, g: UnnormGaussian, sign: float) -> np.ndarray:
    """Mask of pieces that ``g`` may beat somewhere on their interval.

    A piece is cleared only if ``sign * (log piece - log g)`` stays above a
    margin over its whole interval; the unbounded end pieces are always
    contested.
    """
    log_peak = np.array([f.log_peak for f in pcs])
    mu = np.array([f.mu for f in pcs])
    sigma = np.array([f.sigma for f in pcs])
    lo = np.concatenate([[-math.inf], bps])
    hi = np.concatenate([bps, [math.inf]])

    def diff(x):
        zp = (x - mu) / sigma
        zg = (x - g.mu) / g.sigma
        return sign * ((log_peak - 0.5 * zp * zp) - (g.log_peak - 0.5 * zg * zg))

    inv_p = 1.0 / (sigma * sigma)
    inv_g = 1.0 / (g.sigma * g.sigma)
    curv = sign * (inv_g - inv_p)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        d_lo = diff(lo)
        d_hi = diff(hi)
        vertex = (mu * inv_p - g.mu * inv_g) / (inv_p - inv_g)
        inside = (curv > 0) & (vertex > lo) & (vertex < hi)
        d_vx = np.where(inside, diff(np.where(inside, vertex, 0.0)), np.inf)
        low = np.minimum(np.minimum(d_lo, d_hi), d_vx)
        scale = 1.0 + np.abs(log_peak) + abs(g.log_peak)
        contested = ~(low > 1e-9 * scale)
    contested[0] = contested[-1] = True
    return contested


def _merge_one(env, g: UnnormGaussian, sign: float):
    """Merge a single Gaussian into an envelope; same result as ``_merge``."""
    bps, pcs = env
    contested = _contested(bps, pcs, g, sign)
    bounds = [-math.inf] + list(bps) + [math.inf]
    out_bps: list = []
    out_pcs: list = []

    def emit(v, f):
        if out_pcs and out_pcs[-1] is f:
            return
        if out_pcs:
            if out_bps and abs(v - out_bps[-1]) <= FUSE_TOL * (1.0 + abs(v)):
                out_pcs[-1] = f
                if len(out_pcs) >= 2 and out_pcs[-2] is f:
                    out_pcs.pop()
                    out_bps.pop()
                return
            out_bps.append(v)
        out_pcs.append(f)

    for i, f in enumerate(pcs):
        lo, hi = bounds[i], bounds[i + 1]
        if not contested[i]:
            emit(lo, f)
            continue
        try:
            roots = intersections(f, g)
        except IdenticalFunctions:
            roots = []
        inner = [r for r in roots if _strictly_inside(r, lo, hi)]
        edges = [lo] + inner + [hi]
        for s_lo, s_hi in zip(edges[:-1], edges[1:]):
            emit(s_lo, _pick(f, g, s_lo, s_hi, sign))
    return out_bps, out_pcs


def _envelope(fs, sign):
    if len(fs) == 1:
        return [], [fs[0]]
    half = (len(fs) + 1) // 2
    return _merge(_envelope(fs[:half], sign), _envelope(fs[half:], sign), sign)


def _build(fs: Sequence[UnnormGaussian], sign: float, side: str) -> PiecewiseGaussian:
    if not fs:
        raise ValueError("need at least one function")
    ordered = sorted(fs, key=UnnormGaussian.sort_key)
    bps, pcs = _envelope(ordered, sign)
    return PiecewiseGaussian(tuple(bps), tuple(pcs), side)


def upper_envelope(fs: Sequence[UnnormGaussian]) -> PiecewiseGaussian:
    """Pointwise maximum of a family of unnormalized Gaussians."""
    return _build(fs, 1.0, UPPER_OF_MINORANTS)


def lower_envelope(fs: Sequence[UnnormGaussian]) -> PiecewiseGaussian:
    """Pointwise minimum of a family of unnormalized Gaussians."""
    return _build(fs, -1.0, LOWER_OF_MAJORANTS)
