"""Exception types raised across the package."""


class EnvBoundsError(Exception):
    """Base class for all package errors."""


class DegenerateMass(EnvBoundsError):
    """The Gaussian mass of an integration interval underflows."""


class NuUnavailable(EnvBoundsError):
    """A strong-convexity curvature map was requested but none is known."""


class IllPosedRatio(EnvBoundsError):
    """p**2/q is not integrable for the requested proposal variance."""


class IdenticalFunctions(EnvBoundsError):
    """Two unnormalized Gaussians coincide everywhere."""


class PoolExhausted(EnvBoundsError):
    """No candidate tangency point remains in any interval."""


class InvalidBounds(EnvBoundsError):
    """Input bounds cannot be combined (e.g. a nonpositive lower bound on Z)."""


class AllWeightsZero(EnvBoundsError):
    """Every importance weight underflowed to zero."""


class NoConvergence(EnvBoundsError):
    """Adaptive quadrature exhausted its panel budget."""
