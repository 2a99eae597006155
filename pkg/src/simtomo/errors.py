"""Exception hierarchy.

Errors raised because an identifiability condition fails carry the number
of the violated condition in ``condition``:

1. the noise matrix is not an erasure channel (``u_norm > 0``),
2. the state is not maximally mixed (``m_norm > 0``),
3. the POVM elements are linearly independent.
"""


class SimTomoError(Exception):
    """Base class for all package errors."""


class ParseError(SimTomoError, ValueError):
    """Malformed label, config entry or matrix text."""


class DimensionError(SimTomoError, ValueError):
    """Operands with incompatible qubit counts or outcome counts."""


class CapacityError(SimTomoError, ValueError):
    """Dense construction requested above the supported qubit count."""


class DomainError(SimTomoError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConditionError(SimTomoError):
    """An identifiability condition is violated."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DegeneracyError(ConditionError):
    """No signal at all: empty support."""


class PovmDependenceError(ConditionError):
    """POVM elements are linearly dependent, or a solve became singular."""

    def __init__(self, message, condition=3):
        super().__init__(message, condition)


class AlreadyIndependentError(SimTomoError, ValueError):
    """reduce_povm called on a POVM that is already independent."""


class InsufficientPoolError(SimTomoError):
    """A unitary pool cannot realize an eliminator to the required residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class PivotError(SimTomoError):
    """Ratio denominator vanished at the chosen pivot."""


class SupportError(SimTomoError):
    """Thresholded support estimate came out empty."""


class ConditioningError(SimTomoError):
    """Estimated ratio denominator too small to trust."""


class BudgetError(SimTomoError, ValueError):
    """Invalid shot-budget parameters."""


class GaugeError(SimTomoError):
    """Base class for gauge-fixing failures."""


class GaugeAmbiguityError(GaugeError):
    """More than one gauge candidate is physically valid."""


class UninformativeProbeError(GaugeError):
    """The probe carries no information about the gauge."""


class GaugeInconsistencyError(GaugeError):
    """Prior and data disagree, or the reconstruction is not physical."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class PriorViolatedError(GaugeError):
    """The assumed prior structure does not hold for the data."""


class DegenerateBlockError(GaugeError):
    """A tensor factor of the noise is an erasure channel."""


class InsufficientPriorError(GaugeError):
    """Priors do not pin down the gauge."""


class NearSymmetricError(GaugeError):
    """A bit-flip probability is too close to 1/2 to invert."""


class ConfigError(SimTomoError, ValueError):
    """Invalid experiment configuration."""


class GoldenMismatchError(SimTomoError):
    """Reference example deviated from its expected values."""

    def __init__(self, message, mismatches=()):
        super().__init__(message)
        self.mismatches = list(mismatches)
