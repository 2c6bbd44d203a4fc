"""Certified bounds on one-dimensional integrals of ``x**k exp(-phi(x))``.

Tangent Gaussian minorants and majorants of ``exp(-phi)`` are combined into
piecewise-Gaussian envelopes whose integrals against monomials are available
in closed form; refining the set of tangency points drives the bound gap to
zero. The bounds feed certified variance enclosures for importance sampling.
"""

from .bounds import BoundsReport, MomentSpec, refine, total_bounds
from .density import (
    CurvatureBoundedDensity,
    LogisticRegressionConfig,
    ProposalConfig,
    make_logreg_target,
    make_squared_ratio_target,
    make_table1,
    sum_densities,
)
from .envelope import (
    PiecewiseGaussian,
    UnnormGaussian,
    lower_envelope,
    tangent_majorant,
    tangent_minorant,
    upper_envelope,
)
from .errors import EnvBoundsError
from .isvar import VarianceBounds, run_bound_triple, variance_bounds

__version__ = "0.1.0"

__all__ = [
    "BoundsReport",
    "CurvatureBoundedDensity",
    "EnvBoundsError",
    "LogisticRegressionConfig",
    "MomentSpec",
    "PiecewiseGaussian",
    "ProposalConfig",
    "UnnormGaussian",
    "VarianceBounds",
    "lower_envelope",
    "make_logreg_target",
    "make_squared_ratio_target",
    "make_table1",
    "refine",
    "run_bound_triple",
    "sum_densities",
    "tangent_majorant",
    "tangent_minorant",
    "total_bounds",
    "upper_envelope",
    "variance_bounds",
]
