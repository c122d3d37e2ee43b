"""Exception hierarchy shared by all esml modules.

The CLI maps these onto exit codes: validation problems (``ConfigError``,
``DomainError``) exit with 1, numerical problems (everything deriving from
``NumericError``) exit with 2.
"""


class EsmlError(Exception):
    """Base class for all toolkit errors."""


class DomainError(EsmlError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(DomainError):
    """A derivative was requested at a point where it does not exist."""


class ConfigError(EsmlError, ValueError):
    """A configuration failed validation.

    All violations found are collected in ``violations`` rather than
    stopping at the first one.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericError(EsmlError, ArithmeticError):
    """A numerical routine failed (non-convergence, non-finite result)."""


class NumericInconsistencyError(NumericError):
    """Two independent numerical routes disagree beyond their error bars."""


class ResampleExhaustedError(NumericError):
    """Resampling hit its cap before producing a feasible movement."""

    def __init__(self, count, delta):
        self.count = count
        self.delta = delta
        super().__init__(
            f"no feasible movement after {count} draws at threshold {delta!r}")


class InfiniteMomentError(NumericError):
    """An exponential moment appears to diverge."""


class NoBetaFoundError(NumericError):
    """The conditional mean never settles inside the required bracket."""


class SampleSizeError(EsmlError, ValueError):
    """Too few samples for a statistical diagnostic."""
