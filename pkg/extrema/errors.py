"""Exceptions and warnings raised by extrema"""


class ExtremaError(ValueError):
    """Base class of all errors raised by extrema."""


# Interval arithmetic
class EmptyOperand(ExtremaError):
    """An operation received the empty interval."""


class ZeroInDivisor(ExtremaError):
    """The divisor interval contains zero."""


class DomainViolation(ExtremaError):
    """A function was evaluated outside of its domain (e.g. ln of x <= 0)."""


class UnboundedBox(ExtremaError):
    """A box with an infinite endpoint was used where finite bounds are needed."""


class DimensionMismatch(ExtremaError):
    """Boxes, points or expressions of different dimension were combined."""


# Formula parsing
class ExpressionSyntaxError(ExtremaError):
    """Malformed formula. `position` is the 0-based offset of the offending token."""
    def __init__(self, message: str, position: int):
        super().__init__(f'{message} at offset {position}')
        self.position = position


class UnknownVariable(ExtremaError):
    """Identifier is neither a declared variable nor a known function."""


class NonIntegerExponent(ExtremaError):
    """Exponent of `^` does not reduce to an integer literal."""


# Classification
class NonPositiveEpsilon(ExtremaError):
    """Probe half-size must be strictly positive."""


class ProbeOutsideDomain(ExtremaError):
    """The probe surface would leave the problem domain."""


class NonSeparatedCandidate(ExtremaError):
    """No admissible probe size separates the candidate from its neighbours."""


# Front-end
class ProblemFileError(ExtremaError):
    """Problem description is missing a key or holds an invalid value."""


class BudgetExhausted(UserWarning):
    """Root finding stopped at `max_boxes`; the candidate list may be incomplete."""
