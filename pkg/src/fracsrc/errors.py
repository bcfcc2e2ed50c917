"""Exception hierarchy shared by the library and the CLI."""


class FracSrcError(Exception):
    """Base class for all library errors."""


class DomainError(FracSrcError, ValueError):
    """A parameter or argument lies outside the supported domain."""


class PreconditionError(FracSrcError, ValueError):
    """An input violates a documented precondition."""


class GridMismatchError(FracSrcError, ValueError):
    """Two grid-based objects do not share the same temporal grid."""


class HypothesisViolation(FracSrcError, ValueError):
    """The input violates a hypothesis the uniqueness result relies on."""


class NumericalFailure(FracSrcError, RuntimeError):
    """An eigensolver, linear solve, or quadrature did not produce a usable result."""
