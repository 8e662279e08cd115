"""Exception types shared across the package."""


class SpdelabError(Exception):
    """Base class for all package errors."""


class SingularPoint(SpdelabError):
    """Kernel evaluated at a point where it is singular or undefined."""


class AllEigenvaluesClipped(SpdelabError):
    """Gram matrix has no positive eigenvalue; the kernel is not PSD on this grid."""


class NonFiniteQuadrature(SpdelabError):
    """A grid quadrature produced non-finite values."""


class OutOfBox(SpdelabError):
    """Requested evaluation point lies outside the space grid's box."""


class BoxSizingError(SpdelabError):
    """Too many Brownian paths left the lattice box; enlarge the grid."""


class NonFinite(SpdelabError):
    """Solver produced a non-finite value (time step too large)."""


class NoConvergence(SpdelabError):
    """Fixed-point iteration stopped making progress."""


class DegenerateWeights(SpdelabError):
    """Exponential Monte Carlo weights collapsed (effective sample size too small)."""


class TooFewSamples(SpdelabError):
    """Not enough samples for a statistical estimate."""


class InsufficientLags(SpdelabError):
    """Lag set too small or too narrow for a log-log regression."""


class ConfigError(SpdelabError):
    """Experiment configuration is invalid; message names the offending field."""
