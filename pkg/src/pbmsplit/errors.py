"""Exception hierarchy.

Setup problems (bad arguments, incompatible scheme/problem pairs) derive from
``SetupError``; failures discovered while integrating derive from
``NumericalError``.  The CLI maps the two families to distinct exit codes.
"""


class PBMError(Exception):
    """Base class for all errors raised by pbmsplit."""


class SetupError(PBMError, ValueError):
    """Invalid arguments or configuration detected before any stepping."""


class DomainError(SetupError):
    """A growth rate or map is non-positive (or non-finite) somewhere sampled."""


class CompatibilityError(SetupError):
    """The requested scheme cannot solve the requested problem class."""


class NumericalError(PBMError, ArithmeticError):
    """A numerical failure during integration."""


class StabilityError(NumericalError):
    """A step would violate the CFL bound of the upwind scheme."""


class InterpolationError(NumericalError):
    """Resampling produced a non-finite value."""


class EvaluationError(NumericalError):
    """A user callback returned non-finite values."""
