"""Exception taxonomy for the laboratory.

Every error raised by the package derives from :class:`ShgLabError`, so
callers (and the CLI) can distinguish domain failures from programming
errors.  The leaf classes are deliberately fine-grained: tests assert on
the exact type.
"""


class ShgLabError(Exception):
    """Base class for all domain errors raised by shglab."""


class InvalidGrid(ShgLabError):
    """Grid too small or otherwise unusable (fewer than 4 nodes per axis)."""


class ConstraintViolated(ShgLabError):
    """An algebraic constraint on input parameters does not hold."""


class IllConditionedSymbol(ShgLabError):
    """Too many frequency nodes of a convolution symbol fell below the floor."""


class SupportViolation(ShgLabError):
    """A field that must vanish inside the padding margin does not."""


class DegenerateFrequency(ShgLabError):
    """A frequency parameter that must be nonzero is zero."""


class ResonantFrequency(ShgLabError):
    """The linear system is near-singular at the requested frequency."""


class SolveFailed(ShgLabError):
    """A linear solve stagnated or exceeded its iteration budget."""


class SmallnessViolated(ShgLabError):
    """Boundary data too large for the contraction regime."""


class ContractionFailed(ShgLabError):
    """Fixed-point iteration expanded over several consecutive steps."""


class NoConvergence(ShgLabError):
    """Fixed-point iteration hit the iteration cap before reaching tol."""


class ExtrapolationUnreliable(ShgLabError):
    """The scaling sweep behaved non-monotonically; extrapolation refused."""


class InvalidTau(ShgLabError):
    """Asymptotic parameter too small for the requested construction."""


class InvalidXi(ShgLabError):
    """Zero (or otherwise unusable) target frequency vector."""


class BranchError(ShgLabError):
    """A complex square root or logarithm left the principal branch domain."""


class NeumannDiverged(ShgLabError):
    """The remainder series ratio reached 1; a larger parameter is needed."""


class IllPosedDirections(ShgLabError):
    """The 3x3 amplitude system for a Fourier sample is too ill-conditioned."""


class TauNotAsymptotic(ShgLabError):
    """Successive estimates over the asymptotic sweep are not settling."""


class ConfigError(ShgLabError):
    """Experiment configuration failed validation; message names the field."""
