"""Importance sampling with a Gaussian proposal and certified variance bounds.

For draws ``x_n ~ q`` and weights ``w_n = p(x_n) / q(x_n)`` the unbiased
estimator of ``E_pi[m]`` (``pi = p / Z``) is ``(1 / (N Z)) sum w_n m(x_n)``,
whose variance is

    J / (N Z**2) - (I / Z)**2 / N,   I = int m p,  Z = int p,  J = int m**2 p**2 / q.

Each of I, Z and J is enclosed by :func:`envbounds.bounds.refine`; the
variance enclosure then follows by interval arithmetic.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .bounds import DEFAULT_ELL, DEFAULT_EPS, DEFAULT_T1, BoundsReport, refine
from .density import CurvatureBoundedDensity, ProposalConfig, make_squared_ratio_target
from .errors import AllWeightsZero, IllPosedRatio, InvalidBounds

__all__ = [
    "ISConfig",
    "BoundTriple",
    "VarianceBounds",
    "SweepRow",
    "run_bound_triple",
    "variance_bounds",
    "is_sample_run",
    "is_estimates",
    "empirical_variance_mse",
    "bootstrap_variance_se",
    "theta_sweep",
    "SWEEP_HEADER",
    "write_sweep_csv",
]

# label mixed into the generator key so MC streams never collide with others
MC_STREAM = 0x4D43
_U64 = (1 << 64) - 1
_CHUNK = 1 << 16

SWEEP_HEADER = [
    "theta", "V_lower", "V_upper", "V_empirical",
    "I_lower", "I_upper", "Z_lower", "Z_upper", "J_lower", "J_upper",
    "n_I", "n_Z", "n_J",
]


@dataclass(frozen=True)
class ISConfig:
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    n_samples: int = 20
    n_runs: int = 1000
    seed: int = 0
    moment_degree: int = 2

    def __post_init__(self):
        if self.n_samples < 1 or self.n_runs < 1:
            raise ValueError("n_samples and n_runs must be at least 1")
        if self.moment_degree < 0:
            raise ValueError("moment_degree must be nonnegative")
        if not 0 <= self.seed <= _U64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class BoundTriple:
    """Refinement reports for I (moment), Z (mass) and J (second moment under q)."""

    I: BoundsReport
    Z: BoundsReport
    J: BoundsReport


@dataclass(frozen=True)
class VarianceBounds:
    v_lower: float
    v_upper: float
    triple_I: tuple
    triple_Z: tuple
    triple_J: tuple

    @property
    def gap(self) -> float:
        return self.v_upper - self.v_lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.v_lower + self.v_upper)


def _refine_kwargs(tau, t1, eps, ell, relative):
    return dict(tau=tau, t1=t1, eps=eps, ell=ell, relative=relative)


def run_bound_triple(p: CurvatureBoundedDensity, proposal: ProposalConfig, m_degree: int = 2,
                     tau: float = 1e-4, t1: float = DEFAULT_T1, eps: float = DEFAULT_EPS,
                     ell: int = DEFAULT_ELL, relative: bool = True) -> BoundTriple:
    """Bounds on I, Z and J for the monomial ``m(x) = x**m_degree``.

    Raises :class:`IllPosedRatio` if ``p**2 / q`` is not integrable.
    """
    target_j = make_squared_ratio_target(p, proposal)
    kw = _refine_kwargs(tau, t1, eps, ell, relative)
    rep_i = refine(p, m_degree, **kw)
    rep_z = rep_i if m_degree == 0 else refine(p, 0, **kw)
    rep_j = refine(target_j, 2 * m_degree, **kw)
    return BoundTriple(rep_i, rep_z, rep_j)


def _as_pair(b) -> tuple:
    if isinstance(b, BoundsReport):
        return (b.lower, b.upper)
    lo, hi = b
    return (float(lo), float(hi))


def _mul(a: tuple, b: tuple) -> tuple:
    prods = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return (min(prods), max(prods))


def _square(a: tuple) -> tuple:
    lo, hi = a
    if lo <= 0.0 <= hi:
        return (0.0, max(lo * lo, hi * hi))
    return tuple(sorted((lo * lo, hi * hi)))


def variance_bounds(triples, n_samples: int, normalized: bool = True) -> VarianceBounds:
    """Enclosure of the unbiased estimator's variance.

    ``triples`` is a :class:`BoundTriple` or a mapping/sequence of (lower,
    upper) pairs in the order I, Z, J. With ``normalized=False`` the second
    term is ``I**2 / N`` instead of ``(I / Z)**2 / N``.
    """
    if isinstance(triples, BoundTriple):
        bi, bz, bj = triples.I, triples.Z, triples.J
    elif isinstance(triples, dict):
        bi, bz, bj = triples["I"], triples["Z"], triples["J"]
    else:
        bi, bz, bj = triples
    iv_i, iv_z, iv_j = _as_pair(bi), _as_pair(bz), _as_pair(bj)
    for name, iv in (("I", iv_i), ("Z", iv_z), ("J", iv_j)):
        if not iv[0] <= iv[1]:
            raise InvalidBounds(f"{name} bounds are out of order: {iv}")
    if not iv_z[0] > 0.0:
        raise InvalidBounds(f"lower bound on Z must be positive, got {iv_z[0]}")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    n = float(n_samples)
    inv_z = (1.0 / iv_z[1], 1.0 / iv_z[0])
    inv_z2 = (inv_z[0] * inv_z[0], inv_z[1] * inv_z[1])
    first = _mul(iv_j, inv_z2)
    ratio = _mul(iv_i, inv_z) if normalized else iv_i
    second = _square(ratio)
    lower = first[0] / n - second[1] / n
    upper = first[1] / n - second[0] / n
    return VarianceBounds(lower, upper, iv_i, iv_z, iv_j)


def _uniforms(seed: int, run: int, size: int) -> np.ndarray:
    key = ((seed + run) & _U64) | (MC_STREAM << 64)
    gen = np.random.Generator(np.random.Philox(key=key))
    # shift onto the open unit interval so the quantile stays finite
    return gen.random(size) + 2.0**-54


def _log_weights(p: CurvatureBoundedDensity, proposal: ProposalConfig, x):
    return -np.asarray(p.phi(x), dtype=float) - proposal.logpdf(x)


def _draws(cfg: ISConfig, runs: Sequence[int]) -> np.ndarray:
    u = np.stack([_uniforms(cfg.seed, r, cfg.n_samples) for r in runs])
    return cfg.proposal.mean + math.sqrt(cfg.proposal.theta) * ndtri(u)


def is_sample_run(p: CurvatureBoundedDensity, cfg: ISConfig, z_ref: float, run: int = 0):
    """One IS run; returns ``(unbiased, self_normalized)`` estimates of E_pi[m].

    Draws depend only on ``cfg.seed + run``.
    """
    if not z_ref > 0:
        raise ValueError("z_ref must be positive")
    x = _draws(cfg, [run])[0]
    logw = _log_weights(p, cfg.proposal, x)
    m = x**cfg.moment_degree
    top = float(np.max(logw))
    if not math.isfinite(top):
        raise AllWeightsZero("every importance weight is zero")
    w = np.exp(logw)
    unbiased = float(np.sum(w * m)) / (cfg.n_samples * z_ref)
    # shifted weights keep the ratio finite when the raw sum underflows
    ws = np.exp(logw - top)
    self_norm = float(np.sum(ws * m) / np.sum(ws))
    return unbiased, self_norm


def is_estimates(p: CurvatureBoundedDensity, cfg: ISConfig, z_ref: float) -> np.ndarray:
    """Unbiased estimates for runs ``0 .. n_runs - 1`` (vectorized)."""
    if not z_ref > 0:
        raise ValueError("z_ref must be positive")
    out = np.empty(cfg.n_runs)
    per_chunk = max(1, _CHUNK // cfg.n_samples)
    for start in range(0, cfg.n_runs, per_chunk):
        runs = range(start, min(cfg.n_runs, start + per_chunk))
        x = _draws(cfg, runs)
        w = np.exp(_log_weights(p, cfg.proposal, x.ravel())).reshape(x.shape)
        out[start:start + len(runs)] = np.sum(w * x**cfg.moment_degree, axis=1)
    return out / (cfg.n_samples * z_ref)


def empirical_variance_mse(p: CurvatureBoundedDensity, cfg: ISConfig, ref_moment: float,
                           z_ref: float, estimates: Optional[np.ndarray] = None):
    """Sample variance (ddof 1) and MSE against ``ref_moment`` over the runs."""
    if cfg.n_runs < 2:
        raise ValueError("need at least two runs")
    est = is_estimates(p, cfg, z_ref) if estimates is None else np.asarray(estimates)
    v_e = float(np.var(est, ddof=1))
    mse = float(np.mean((ref_moment - est) ** 2))
    return v_e, mse


def bootstrap_variance_se(estimates, n_boot: int = 200, seed: int = 0) -> float:
    """Bootstrap standard error of the sample variance of ``estimates``."""
    est = np.asarray(estimates, dtype=float)
    rng = np.random.default_rng(seed)
    stats = np.empty(n_boot)
    for b in range(n_boot):
        stats[b] = np.var(est[rng.integers(0, est.size, est.size)], ddof=1)
    return float(np.std(stats, ddof=1))


@dataclass(frozen=True)
class SweepRow:
    theta: float
    bounds: Optional[VarianceBounds] = None
    triple: Optional[BoundTriple] = None
    v_empirical: Optional[float] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def theta_sweep(p: CurvatureBoundedDensity, thetas: Sequence[float], cfg: ISConfig,
                tau: float = 1e-4, t1: float = DEFAULT_T1, eps: float = DEFAULT_EPS,
                ell: int = DEFAULT_ELL, relative: bool = True, mc: bool = False,
                normalized: bool = True, jobs: int = 1) -> list:
    """Variance bounds for each proposal variance in ``thetas`` (input order).

    I and Z do not depend on the proposal and are computed once. Rows whose
    ``p**2 / q`` is not integrable carry an error message instead of bounds.
    """
    kw = _refine_kwargs(tau, t1, eps, ell, relative)
    k = cfg.moment_degree
    rep_i = refine(p, k, **kw)
    rep_z = rep_i if k == 0 else refine(p, 0, **kw)
    z_ref = rep_z.midpoint

    def one(theta):
        proposal = ProposalConfig(cfg.proposal.mean, float(theta))
        try:
            target = make_squared_ratio_target(p, proposal)
        except IllPosedRatio as exc:
            return SweepRow(float(theta), error=str(exc))
        rep_j = refine(target, 2 * k, **kw)
        triple = BoundTriple(rep_i, rep_z, rep_j)
        vb = variance_bounds(triple, cfg.n_samples, normalized=normalized)
        v_e = None
        if mc:
            mc_cfg = ISConfig(proposal, cfg.n_samples, cfg.n_runs, cfg.seed, k)
            v_e, _ = empirical_variance_mse(p, mc_cfg, rep_i.midpoint / z_ref, z_ref)
        return SweepRow(float(theta), vb, triple, v_e)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, thetas))
    return [one(th) for th in thetas]


def write_sweep_csv(rows: Sequence[SweepRow], fh) -> int:
    """Write successful rows; returns how many were written."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    count = 0
    for row in rows:
        if not row.ok:
            continue
        vb, tr = row.bounds, row.triple
        w.writerow([
            repr(row.theta), repr(vb.v_lower), repr(vb.v_upper),
            "" if row.v_empirical is None else repr(row.v_empirical),
            repr(tr.I.lower), repr(tr.I.upper), repr(tr.Z.lower), repr(tr.Z.upper),
            repr(tr.J.lower), repr(tr.J.upper), tr.I.n_stop, tr.Z.n_stop, tr.J.n_stop,
        ])
        count += 1
    return count
