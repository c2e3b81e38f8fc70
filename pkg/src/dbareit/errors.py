"""Exception types raised across the package."""


class DbarEitError(Exception):
    """Base class for all package errors."""


# geometry
class NonPositiveRadius(DbarEitError):
    """Boundary radius function is not strictly positive."""


class ElectrodesOverlap(DbarEitError):
    """A physical electrode layout was requested but electrodes overlap."""


class DegenerateStep(DbarEitError):
    """Forward-difference step produced a vanishing secant."""


# forward
class OddElectrodeCount(DbarEitError):
    """Trigonometric patterns require an even number of electrodes."""


class MeshFailure(DbarEitError):
    """Mesh generation failed on degenerate geometry."""


class SingularSystem(DbarEitError):
    """CEM system is singular (gauge not fixed or degenerate input)."""


class NonConvergence(DbarEitError):
    """Iterative solver failed to reach tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class RankDeficientPatterns(DbarEitError):
    """Current patterns do not span the zero-sum space."""


class ODESolverFailure(DbarEitError):
    """Radial ODE integration failed."""


# dnmap
class ZeroPattern(DbarEitError):
    """A current pattern column has zero norm."""


class IllConditioned(DbarEitError):
    """Matrix condition number exceeds the inversion guard."""


class NonPositiveEstimate(DbarEitError):
    """Best-constant admittivity estimate has non-positive real part."""


class ScalingMismatch(DbarEitError):
    """DN maps fed to a scattering transform carry incompatible scalings."""


# scattering
class ZeroK(DbarEitError):
    """CGO asymptotics are singular at k = 0."""


class GridMismatch(DbarEitError):
    """Array shape does not match the expected grid."""


# recovery
class DenominatorUnderflow(DbarEitError):
    """Potential-recovery denominator vanished at a pixel."""


# evaluation
class EmptyRegion(DbarEitError):
    """Region mask contains no pixels on the image grid."""


class DegenerateTruth(DbarEitError):
    """Dynamic range undefined: true extrema coincide."""


class FlatImage(DbarEitError):
    """Rotation estimation needs image contrast."""


# cli / io
class RealMethodComplexData(DbarEitError):
    """The real-conductivity method cannot process complex voltage data."""


class ConfigError(DbarEitError):
    """Invalid configuration or dataset file."""
