"""Exception types shared across the package."""


class DomainError(ValueError):
    """A label or parameter lies outside the mathematical domain of an operation."""


class CapacityError(RuntimeError):
    """A truncated representation is too small for the requested state.

    Attributes
    ----------
    required_dim : int or None
        Estimated basis size that would make the construction adequate,
        when such an estimate is available.
    """

    def __init__(self, message, required_dim=None):
        super().__init__(message)
        self.required_dim = required_dim


class NumericalFailure(RuntimeError):
    """A numerical procedure did not converge or produced non-finite values.

    Carries a ``diagnostics`` dict with whatever the failing routine measured.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class InvalidTransformError(ValueError):
    """A coordinate transform violates its declared inverse or area-preservation contract."""
