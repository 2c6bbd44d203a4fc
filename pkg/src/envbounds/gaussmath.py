"""Gaussian special functions and (truncated) monomial moments.

Every certified bound in the package reduces to integrals of the form
``C * int_a^b x**k g(x; mu, sigma) dx``. They are evaluated with the classical
recursion for conditional moments of a truncated normal variable,

    m_k = (k-1) sigma^2 m_{k-2} + mu m_{k-1}
          - sigma (b^{k-1} pdf(beta) - a^{k-1} pdf(alpha)) / (cdf(beta) - cdf(alpha)),

with ``m_{-1} = 0``, ``m_0 = 1`` and ``alpha, beta`` the standardized endpoints.
When both standardized endpoints sit deep in the same tail (beyond 8 standard
deviations) the ratios ``pdf/(cdf difference)`` are evaluated through the
scaled complementary error function so that neither factor underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy.special import erfc, erfcx

from .errors import DegenerateMass

__all__ = [
    "GaussianParams",
    "Interval",
    "REAL_LINE",
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_inv_cdf",
    "gaussian_moment",
    "truncated_moment",
    "partial_moment",
    "partial_moments",
    "log_interval_mass",
]

SQRT2 = math.sqrt(2.0)
INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)
LOG_SQRT2PI = 0.5 * math.log(2.0 * math.pi)

# standardized endpoint magnitude beyond which erfcx arithmetic is used
TAIL_SWITCH = 8.0
MASS_FLOOR = 1e-300
_LOG_MASS_FLOOR = math.log(MASS_FLOOR)

_STD_NORMAL = NormalDist()

# pieces over which the Gaussian factor varies by less than about one e-fold
# are integrated by Gauss-Legendre; the moment recursion cancels badly there
NARROW_LIMIT = 1.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class GaussianParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")


@dataclass(frozen=True)
class Interval:
    """Closed interval with possibly infinite endpoints."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or not self.lo < self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi


REAL_LINE = Interval(-math.inf, math.inf)


def std_normal_pdf(x: float) -> float:
    return INV_SQRT2PI * math.exp(-0.5 * x * x)


def std_normal_cdf(x: float) -> float:
    # erfc keeps relative accuracy deep in the lower tail
    return 0.5 * math.erfc(-x / SQRT2)


def std_normal_inv_cdf(p: float) -> float:
    """Quantile of the standard normal, accurate to ~1e-15 relative."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p!r}")
    if p == 0.5:
        return 0.0
    # keep exact antisymmetry: evaluate on the lower half only
    if p > 0.5:
        return -std_normal_inv_cdf(1.0 - p)
    x = _STD_NORMAL.inv_cdf(p)
    dens = std_normal_pdf(x)
    if dens > 0.0:
        x -= (std_normal_cdf(x) - p) / dens
    return x


def gaussian_moment(k: int, params: GaussianParams) -> float:
    """E[X**k] for X ~ N(mu, sigma**2)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    mu, sigma = params.mu, params.sigma
    total = 0.0
    dfact = 1.0  # (2j - 1)!!
    for j in range(k // 2 + 1):
        if j > 0:
            dfact *= 2 * j - 1
        total += math.comb(k, 2 * j) * mu ** (k - 2 * j) * sigma ** (2 * j) * dfact
    return total


def _standardize(mu, sigma, lo, hi):
    with np.errstate(invalid="ignore"):
        alpha = (lo - mu) / sigma
        beta = (hi - mu) / sigma
    return alpha, beta


def _mass_and_ratios(alpha, beta):
    """Return ``(log D, pdf(alpha)/D, pdf(beta)/D)`` with D = cdf(beta) - cdf(alpha).

    Inputs are float arrays of equal shape with ``alpha < beta``.
    """
    shape = np.shape(alpha)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        upper_tail = erfc(alpha / SQRT2) - erfc(beta / SQRT2)
        lower_tail = erfc(-beta / SQRT2) - erfc(-alpha / SQRT2)
        straddle = 2.0 - erfc(beta / SQRT2) - erfc(-alpha / SQRT2)
        d = 0.5 * np.where(alpha >= 0.0, upper_tail, np.where(beta <= 0.0, lower_tail, straddle))
        pdf_a = INV_SQRT2PI * np.exp(-0.5 * alpha * alpha)
        pdf_b = INV_SQRT2PI * np.exp(-0.5 * beta * beta)
        log_d = np.log(d)
        ratio_a = pdf_a / d
        ratio_b = pdf_b / d

        # deep right tail: factor exp(-alpha^2/2) out of both erfc terms
        right = alpha > TAIL_SWITCH
        if np.any(right):
            a, b = alpha[right], beta[right]
            shrink = np.exp(-0.5 * (b - a) * (b + a))
            shrink = np.where(np.isinf(b), 0.0, shrink)
            den = 0.5 * (erfcx(a / SQRT2) - erfcx(b / SQRT2) * shrink)
            log_d[right] = -0.5 * a * a + np.log(den)
            ratio_a[right] = INV_SQRT2PI / den
            ratio_b[right] = INV_SQRT2PI * shrink / den

        left = beta < -TAIL_SWITCH
        if np.any(left):
            a, b = alpha[left], beta[left]
            shrink = np.exp(-0.5 * (a - b) * (a + b))
            shrink = np.where(np.isinf(a), 0.0, shrink)
            den = 0.5 * (erfcx(-b / SQRT2) - erfcx(-a / SQRT2) * shrink)
            log_d[left] = -0.5 * b * b + np.log(den)
            ratio_b[left] = INV_SQRT2PI / den
            ratio_a[left] = INV_SQRT2PI * shrink / den

    return log_d.reshape(shape), ratio_a.reshape(shape), ratio_b.reshape(shape)


def _conditional_moments(k, mu, sigma, lo, hi, ratio_a, ratio_b):
    """Conditional moment m_k by forward recursion (arrays broadcast together)."""
    finite_lo = np.isfinite(lo)
    finite_hi = np.isfinite(hi)
    lo0 = np.where(finite_lo, lo, 0.0)
    hi0 = np.where(finite_hi, hi, 0.0)
    ra = np.where(finite_lo, ratio_a, 0.0)
    rb = np.where(finite_hi, ratio_b, 0.0)
    var = sigma * sigma
    prev = np.zeros(np.broadcast(mu, sigma, lo, hi).shape)  # m_{j-2}
    cur = np.ones_like(prev)  # m_{j-1}
    pow_lo = np.ones_like(prev)  # a^{j-1}
    pow_hi = np.ones_like(prev)
    for j in range(1, k + 1):
        nxt = (j - 1) * var * prev + mu * cur - sigma * (pow_hi * rb - pow_lo * ra)
        prev, cur = cur, nxt
        pow_lo = pow_lo * lo0
        pow_hi = pow_hi * hi0
    return cur


def truncated_moment(k: int, params: GaussianParams, iv: Interval) -> float:
    """E[X**k | X in iv] for X ~ N(mu, sigma**2); ``k = -1`` returns 0."""
    if k < -1:
        raise ValueError("k must be >= -1")
    if k == -1:
        return 0.0
    alpha, beta = _standardize(params.mu, params.sigma, iv.lo, iv.hi)
    log_d, ra, rb = _mass_and_ratios(np.array([alpha]), np.array([beta]))
    if not log_d[0] >= _LOG_MASS_FLOOR:
        raise DegenerateMass(f"Gaussian mass of [{iv.lo}, {iv.hi}] underflows")
    if k == 0:
        return 1.0
    m = _conditional_moments(
        k, params.mu, params.sigma, np.array([iv.lo]), np.array([iv.hi]), ra, rb
    )
    return float(m[0])


def log_interval_mass(params: GaussianParams, iv: Interval) -> float:
    """log P(X in iv) for X ~ N(mu, sigma**2), valid far into the tails."""
    alpha, beta = _standardize(params.mu, params.sigma, iv.lo, iv.hi)
    log_d, _, _ = _mass_and_ratios(np.array([alpha]), np.array([beta]))
    return float(log_d[0])


def partial_moments(k, log_scale, mu, sigma, lo, hi):
    """Vectorized ``int_lo^hi x**k exp(log_scale) g(x; mu, sigma) dx``.

    All array arguments broadcast together. Pieces whose weight underflows
    contribute exactly zero.
    """
    log_scale, mu, sigma, lo, hi = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (log_scale, mu, sigma, lo, hi))
    )
    alpha, beta = _standardize(mu, sigma, lo, hi)
    log_d, ra, rb = _mass_and_ratios(alpha, beta)
    with np.errstate(under="ignore", invalid="ignore", over="ignore"):
        weight = np.exp(log_scale + log_d)
        if k == 0:
            out = np.where(weight > 0.0, weight, 0.0)
        else:
            m = _conditional_moments(k, mu, sigma, lo, hi, ra, rb)
            out = np.where(weight > 0.0, weight * m, 0.0)
        spread = (beta - alpha) * (1.0 + np.maximum(np.abs(alpha), np.abs(beta)))
        narrow = np.isfinite(spread) & (spread <= NARROW_LIMIT)
    if np.any(narrow):
        out = np.array(out, dtype=float)
        out[narrow] = _legendre_moments(
            k, log_scale[narrow], mu[narrow], sigma[narrow], lo[narrow], hi[narrow]
        )
    return out[()]


def _legendre_moments(k, log_scale, mu, sigma, lo, hi):
    half = 0.5 * (hi - lo)[:, None]
    x = 0.5 * (hi + lo)[:, None] + half * _GL_NODES
    z = (x - mu[:, None]) / sigma[:, None]
    log_f = (log_scale - np.log(sigma) - LOG_SQRT2PI)[:, None] - 0.5 * z * z
    with np.errstate(under="ignore"):
        vals = np.exp(log_f) * x**k
    return half[:, 0] * (vals @ _GL_WEIGHTS)


def partial_moment(k: int, g, iv: Interval) -> float:
    """``int_iv x**k g(x) dx`` for an unnormalized Gaussian ``g``.

    ``g`` needs ``log_scale``, ``mu`` and ``sigma`` attributes (see
    :class:`envbounds.envelope.UnnormGaussian`).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = partial_moments(k, g.log_scale, g.mu, g.sigma, iv.lo, iv.hi)
    return float(out)
