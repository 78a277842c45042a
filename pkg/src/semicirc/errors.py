"""Exception types shared across the package."""


class MatrixDomainError(ValueError):
    """Input matrix violates a domain requirement (non-finite, non-Hermitian,
    or not positive definite above the configured floor)."""


class NotSelfAdjointError(ValueError):
    """A completely positive map expected to be self-adjoint is not."""


class NotScalableError(RuntimeError):
    """Symmetric scaling failed because the Sinkhorn iteration did not converge.

    Carries the Sinkhorn result so callers can distinguish a certified
    divergence from an exhausted iteration budget.
    """

    def __init__(self, message, sinkhorn_result=None):
        super().__init__(message)
        self.sinkhorn_result = sinkhorn_result


class HfsConvergenceError(RuntimeError):
    """The half-plane fixed-point solve did not reach the residual target."""

    def __init__(self, message, last_residual=None, u=None):
        super().__init__(message)
        self.last_residual = last_residual
        self.u = u


class SchemaError(ValueError):
    """A pencil document or run configuration failed validation."""
