"""Target densities ``pi(x) = exp(-phi(x))`` with curvature bounds.

A density carries ``phi``, its derivative and two curvature maps:

* ``beta(t)``: ``phi(x) <= phi(t) + phi'(t)(x-t) + beta(t)/2 (x-t)**2`` for all x,
* ``nu(t)``:   ``phi(x) >= phi(t) + phi'(t)(x-t) + nu(t)/2 (x-t)**2`` for all x.

``beta`` yields Gaussian minorants of ``pi`` and ``nu`` Gaussian majorants.
All maps accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit

from .errors import IllPosedRatio, NuUnavailable

__all__ = [
    "CurvatureBoundedDensity",
    "LogisticRegressionConfig",
    "ProposalConfig",
    "TABLE1_KINDS",
    "make_table1",
    "sum_densities",
    "make_logreg_target",
    "make_squared_ratio_target",
    "random_logreg_config",
    "default_logreg_config",
    "eval_pi",
    "logistic_psi",
]

Map = Callable[[np.ndarray], np.ndarray]

# sampled range used when a density has no known global floor on nu
_NU_SCAN = np.linspace(-50.0, 50.0, 2001)
_PSI_SERIES_CUTOFF = 1e-4
DATASET_STREAM = 0x5EED_DA7A


def _const(value: float) -> Map:
    def f(x):
        return np.full_like(np.asarray(x, dtype=float), value)[()]

    return f


@dataclass(frozen=True)
class CurvatureBoundedDensity:
    phi: Map
    dphi: Map
    beta: Map
    nu: Optional[Map] = None
    # derivs(order, x) for order 0..3
    derivs: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    # a known lower bound of nu over the whole line, when one exists
    nu_floor: Optional[float] = None
    name: str = field(default="density", compare=False)
    # global lower bound on phi'' (may be negative); what a component without
    # nu contributes to the curvature of a sum
    convexity: float = 0.0

    def nu_at(self, t):
        if self.nu is None:
            raise NuUnavailable(
                f"{self.name} is not strongly convex; compose it with a strongly "
                "convex term (e.g. a quadratic prior) before building majorants"
            )
        return self.nu(t)

    def pi(self, x):
        return np.exp(-self.phi(x))

    def derivative(self, order: int, x):
        if order == 0:
            return self.phi(x)
        if order == 1:
            return self.dphi(x)
        if self.derivs is None:
            raise NotImplementedError(f"{self.name} has no derivatives of order {order}")
        return self.derivs(order, x)


def eval_pi(d: CurvatureBoundedDensity, x: float) -> float:
    return float(np.exp(-d.phi(x)))


def logistic_psi(t):
    """(sigmoid(t) - 1/2) / t, with the removable singularity at 0 filled in."""
    t = np.asarray(t, dtype=float)
    small = np.abs(t) < _PSI_SERIES_CUTOFF
    safe = np.where(small, 1.0, t)
    out = np.where(small, 0.25 - t * t / 48.0, (expit(safe) - 0.5) / safe)
    return out[()]


def _softplus(z):
    return np.logaddexp(0.0, z)


def _table1_quadratic():
    def derivs(order, x):
        x = np.asarray(x, dtype=float)
        return [0.5 * x * x, x, np.ones_like(x), np.zeros_like(x)][order][()]

    return CurvatureBoundedDensity(
        phi=lambda x: 0.5 * np.asarray(x, dtype=float) ** 2,
        dphi=lambda x: np.asarray(x, dtype=float) * 1.0,
        beta=_const(1.0),
        nu=_const(1.0),
        derivs=derivs,
        nu_floor=1.0,
        name="quadratic",
    )


def _table1_hyperbolic(delta):
    d2 = delta * delta

    def root(x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(1.0 + x * x / d2)

    def derivs(order, x):
        x = np.asarray(x, dtype=float)
        r = root(x)
        if order == 0:
            return r[()]
        if order == 1:
            return (x / (d2 * r))[()]
        if order == 2:
            return (1.0 / (d2 * r**3))[()]
        return (-3.0 * x / (d2 * d2 * r**5))[()]

    return CurvatureBoundedDensity(
        phi=lambda x: derivs(0, x),
        dphi=lambda x: derivs(1, x),
        # phi'(t)/t: the half-quadratic curvature of a function concave in x**2
        beta=lambda t: (1.0 / (d2 * root(t)))[()],
        derivs=derivs,
        name=f"hyperbolic(delta={delta})",
    )


def _table1_huber(delta):
    def derivs(order, x):
        x = np.asarray(x, dtype=float)
        inner = np.abs(x) < delta
        if order == 0:
            return np.where(inner, x * x, 2.0 * delta * np.abs(x) - delta * delta)[()]
        if order == 1:
            return np.where(inner, 2.0 * x, 2.0 * delta * np.sign(x))[()]
        if order == 2:
            return np.where(inner, 2.0, 0.0)[()]
        return np.zeros_like(x)[()]

    def beta(t):
        t = np.asarray(t, dtype=float)
        inner = np.abs(t) < delta
        return np.where(inner, 2.0, 2.0 * delta / np.where(inner, 1.0, np.abs(t)))[()]

    return CurvatureBoundedDensity(
        phi=lambda x: derivs(0, x),
        dphi=lambda x: derivs(1, x),
        beta=beta,
        derivs=derivs,
        name=f"huber(delta={delta})",
    )


def _table1_logistic():
    def derivs(order, x):
        x = np.asarray(x, dtype=float)
        if order == 0:
            return _softplus(x)[()]
        s = expit(x)
        if order == 1:
            return s[()]
        if order == 2:
            return (s * (1.0 - s))[()]
        return (s * (1.0 - s) * (1.0 - 2.0 * s))[()]

    return CurvatureBoundedDensity(
        phi=lambda x: derivs(0, x),
        dphi=lambda x: derivs(1, x),
        beta=logistic_psi,
        derivs=derivs,
        name="logistic",
    )


def _table1_cauchy(delta):
    d2 = delta * delta

    def derivs(order, x):
        x = np.asarray(x, dtype=float)
        q = x * x + d2
        if order == 0:
            return np.log1p(x * x / d2)[()]
        if order == 1:
            return (2.0 * x / q)[()]
        if order == 2:
            return (2.0 * (d2 - x * x) / (q * q))[()]
        return (4.0 * x * (x * x - 3.0 * d2) / q**3)[()]

    return CurvatureBoundedDensity(
        phi=lambda x: derivs(0, x),
        dphi=lambda x: derivs(1, x),
        beta=lambda t: (2.0 / (np.asarray(t, dtype=float) ** 2 + d2))[()],
        derivs=derivs,
        name=f"cauchy(delta={delta})",
        # phi'' is smallest at x**2 = 3 delta**2
        convexity=-0.25 / d2,
    )


TABLE1_KINDS = ("quadratic", "hyperbolic", "huber", "logistic", "cauchy")


def make_table1(kind: str, delta: float = 1.0) -> CurvatureBoundedDensity:
    """One of the elementary potentials with a closed-form curvature map.

    Only the quadratic is strongly convex; the others expose ``beta`` alone.
    """
    if kind in ("hyperbolic", "huber", "cauchy") and not delta > 0:
        raise ValueError("delta must be positive")
    if kind == "quadratic":
        return _table1_quadratic()
    if kind == "hyperbolic":
        return _table1_hyperbolic(delta)
    if kind == "huber":
        return _table1_huber(delta)
    if kind == "logistic":
        return _table1_logistic()
    if kind == "cauchy":
        return _table1_cauchy(delta)
    raise ValueError(f"unknown kind {kind!r}; expected one of {TABLE1_KINDS}")


def sum_densities(components: Sequence[CurvatureBoundedDensity]) -> CurvatureBoundedDensity:
    """Sum of potentials; curvature maps add.

    A component without ``nu`` contributes its global ``convexity`` (zero for
    convex potentials, negative for e.g. the Cauchy term).
    """
    comps = list(components)
    if not comps:
        raise ValueError("need at least one component")
    if len(comps) == 1:
        return comps[0]
    with_nu = [c for c in comps if c.nu is not None]
    if not with_nu:
        raise NuUnavailable("no component of the sum exposes a strong-convexity map")

    def total(attr):
        maps = [getattr(c, attr) for c in comps]
        return lambda x: sum(m(x) for m in maps)

    derivs = None
    if all(c.derivs is not None for c in comps):
        def derivs(order, x):
            return sum(c.derivative(order, x) for c in comps)

    offset = float(sum(c.convexity for c in comps if c.nu is None))
    floors = [c.nu_floor for c in with_nu]
    floor = None if any(f is None for f in floors) else float(sum(floors)) + offset
    if floor is not None and not floor > 0:
        raise NuUnavailable(
            f"the sum is not strongly convex: curvature floor {floor:.6g} <= 0"
        )
    return CurvatureBoundedDensity(
        phi=total("phi"),
        dphi=total("dphi"),
        beta=total("beta"),
        nu=lambda t: sum(c.nu(t) for c in with_nu) + offset,
        derivs=derivs,
        nu_floor=floor,
        name=" + ".join(c.name for c in comps),
        convexity=float(sum(c.convexity for c in comps)),
    )


@dataclass(frozen=True)
class LogisticRegressionConfig:
    labels: tuple
    features: tuple
    prior_std: float = 1.2
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(y) for y in self.labels))
        object.__setattr__(self, "features", tuple(float(w) for w in self.features))
        if len(self.labels) != len(self.features) or not self.labels:
            raise ValueError("labels and features must have the same nonzero length")
        if any(y not in (-1, 1) for y in self.labels):
            raise ValueError("labels must be -1 or +1")
        if not self.prior_std > 0 or not self.scale > 0:
            raise ValueError("prior_std and scale must be positive")

    @property
    def coefficients(self) -> np.ndarray:
        """The products y_j * w_j."""
        return np.array(self.labels, dtype=float) * np.array(self.features)


@dataclass(frozen=True)
class ProposalConfig:
    """Gaussian proposal with the given mean and variance ``theta``."""

    mean: float = 2.0
    theta: float = 1.5

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("proposal variance theta must be positive")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return (-0.5 * (x - self.mean) ** 2 / self.theta
                - 0.5 * math.log(2.0 * math.pi * self.theta))[()]


def make_logreg_target(cfg: LogisticRegressionConfig) -> CurvatureBoundedDensity:
    """Unnormalized posterior of a one-parameter logistic regression with a
    zero-mean Gaussian prior of standard deviation ``prior_std``."""
    c = cfg.coefficients
    inv_s2 = 1.0 / cfg.prior_std**2
    log_a = math.log(cfg.scale)

    def phi(x):
        x = np.asarray(x, dtype=float)
        z = np.multiply.outer(x, c)
        return (0.5 * inv_s2 * x * x + _softplus(z).sum(axis=-1) - log_a)[()]

    def dphi(x):
        x = np.asarray(x, dtype=float)
        s = expit(np.multiply.outer(x, c))
        return (inv_s2 * x + (c * s).sum(axis=-1))[()]

    def beta(t):
        t = np.asarray(t, dtype=float)
        return ((c * c * logistic_psi(np.multiply.outer(t, c))).sum(axis=-1) + inv_s2)[()]

    def nu(t):
        return np.full_like(np.asarray(t, dtype=float), inv_s2)[()]

    def derivs(order, x):
        if order == 0:
            return phi(x)
        if order == 1:
            return dphi(x)
        x = np.asarray(x, dtype=float)
        s = expit(np.multiply.outer(x, c))
        if order == 2:
            return (inv_s2 + (c**2 * s * (1.0 - s)).sum(axis=-1))[()]
        if order == 3:
            return ((c**3 * s * (1.0 - s) * (1.0 - 2.0 * s)).sum(axis=-1) + 0.0 * x)[()]
        raise ValueError("derivatives are available up to order 3")

    return CurvatureBoundedDensity(
        phi=phi, dphi=dphi, beta=beta, nu=nu, derivs=derivs, nu_floor=inv_s2,
        name=f"logreg(J={len(c)}, s={cfg.prior_std})",
    )


def make_squared_ratio_target(p: CurvatureBoundedDensity,
                              proposal: ProposalConfig) -> CurvatureBoundedDensity:
    """The density ``p(x)**2 / q(x)`` for a Gaussian proposal ``q``.

    Requires ``2 inf nu_p > 1/theta``; otherwise p**2/q need not be integrable.
    """
    inv_theta = 1.0 / proposal.theta
    mean = proposal.mean
    floor = p.nu_floor
    if floor is None:
        floor = float(np.min(p.nu_at(_NU_SCAN)))
    else:
        p.nu_at(0.0)
    surplus = 2.0 * floor - inv_theta
    if not surplus > 1e-12 * 2.0 * floor:
        raise IllPosedRatio(
            f"p^2/q is not integrable: need 2*min(nu) > 1/theta, got "
            f"2*{floor:.6g} <= {inv_theta:.6g} (theta={proposal.theta})"
        )
    log_norm = 0.5 * math.log(2.0 * math.pi * proposal.theta)

    def phi(x):
        x = np.asarray(x, dtype=float)
        return (2.0 * p.phi(x) - 0.5 * inv_theta * (x - mean) ** 2 - log_norm)[()]

    def dphi(x):
        x = np.asarray(x, dtype=float)
        return (2.0 * p.dphi(x) - inv_theta * (x - mean))[()]

    derivs = None
    if p.derivs is not None:
        def derivs(order, x):
            if order == 0:
                return phi(x)
            if order == 1:
                return dphi(x)
            extra = -inv_theta if order == 2 else 0.0
            return (2.0 * np.asarray(p.derivative(order, x)) + extra)[()]

    return CurvatureBoundedDensity(
        phi=phi,
        dphi=dphi,
        beta=lambda t: (2.0 * np.asarray(p.beta(t)) - inv_theta)[()],
        nu=lambda t: (2.0 * np.asarray(p.nu_at(t)) - inv_theta)[()],
        derivs=derivs,
        nu_floor=surplus,
        name=f"({p.name})^2/q(theta={proposal.theta})",
    )


def random_logreg_config(seed: int, n_data=10, w_range=(-2.0, 2.0), prior_std=1.2,
                         scale: float = 1.0) -> LogisticRegressionConfig:
    """Seeded synthetic dataset: Rademacher labels, uniform features.

    ``n_data`` and ``prior_std`` may be fixed values or ``(lo, hi)`` ranges to
    draw from (integer range inclusive for ``n_data``).
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(DATASET_STREAM,)))
    if isinstance(n_data, (tuple, list)):
        n_data = int(rng.integers(n_data[0], n_data[1] + 1))
    if isinstance(prior_std, (tuple, list)):
        prior_std = float(rng.uniform(prior_std[0], prior_std[1]))
    labels = rng.choice(np.array([-1, 1]), size=n_data)
    features = rng.uniform(w_range[0], w_range[1], size=n_data)
    return LogisticRegressionConfig(tuple(labels), tuple(features), prior_std, scale)


def default_logreg_config(seed: int = 0) -> LogisticRegressionConfig:
    """The repo's reference instance: J=10, s=1.2, A=1."""
    return random_logreg_config(seed, n_data=10, prior_std=1.2, scale=1.0)
