"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
the most specific class that applies.
"""


class ValidationError(ValueError):
    """Bad parameters, configuration, or preconditions."""


class NumericalError(RuntimeError):
    """A computation produced an unusable numerical result."""


class NonFiniteStateError(NumericalError):
    """A state vector contains NaN or infinity."""


class StiffnessError(NumericalError):
    """An explicit scheme could not resolve the fast rates within budget."""


class SingularSystemError(NumericalError):
    """A linear solve hit a singular (or numerically singular) system."""
