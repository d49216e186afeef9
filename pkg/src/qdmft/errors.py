"""Exception hierarchy shared across the package."""


class QdmftError(Exception):
    """Base class for all package errors."""


class DomainError(QdmftError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegenerateGroundStateError(QdmftError):
    """The impurity ground state is not unique (typically V = 0)."""


class SingularityError(QdmftError, ZeroDivisionError):
    """A rational function was evaluated on (or too close to) a pole."""


class FitError(QdmftError):
    """Base class for pole-fit failures."""


class FitPreconditionError(FitError, DomainError):
    """The series cannot be fitted by the two-cosine model."""


class PoorFitError(FitError):
    """The fit converged but the residual exceeds the acceptance threshold."""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class InsulatingBranchError(QdmftError):
    """The self-energy has a pole at the Fermi level; Z is zero."""


class BracketingError(QdmftError):
    """No sign change of the filling residual was found in the bracket."""


class DmftError(QdmftError):
    """A self-consistency run failed; ``history`` holds the iterations so far."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = tuple(history)
