"""Exception types shared across the package."""


class DerivlabError(Exception):
    """Base class for all errors raised by derivlab."""


class ConstructionError(DerivlabError):
    """A structure failed its certification at build time (associativity,
    positivity of weights, unit axioms, module axioms, sizes)."""


class SpaceMismatchError(DerivlabError):
    """Operands belong to different algebras or modules."""


class ControlError(DerivlabError):
    """A control function is inadmissible or returned an invalid value."""


class ConvergenceError(DerivlabError):
    """Direct-method iteration failed to converge within its budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PreconditionError(DerivlabError):
    """An operation was invoked on inputs that violate its stated contract."""
