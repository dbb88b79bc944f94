"""Exception types shared across engines."""
from __future__ import annotations


class SchemaError(ValueError):
    """Input document does not match the expected schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class NotInSpanError(ValueError):
    """Matrix is not in the span of an operator subspace."""

    def __init__(self, residual: float, tol: float):
        self.residual = float(residual)
        self.tol = float(tol)
        super().__init__(f"matrix not in span: residual {residual:.3e} > {tol:.3e}")


class OptimizerFailure(RuntimeError):
    """A search did not reach its target; ``best`` holds the best candidate."""

    def __init__(self, message: str, best=None, trace=None):
        self.best = best
        self.trace = trace
        super().__init__(message)


class ConvergenceError(RuntimeError):
    """Iteration cap or search exhaustion before a stopping rule fired."""

    def __init__(self, message: str, trace=None, last=None):
        self.trace = trace
        self.last = last
        super().__init__(message)


class ConditioningError(ValueError):
    """Root configuration too clustered for reliable finite-precision work."""

    def __init__(self, cond: float, limit: float, what: str = "Gram matrix"):
        self.cond = float(cond)
        self.limit = float(limit)
        super().__init__(f"{what} condition {cond:.3e} exceeds {limit:.1e}")


class RepeatedRootError(ValueError):
    """Operation requires a Blaschke product with simple roots."""
