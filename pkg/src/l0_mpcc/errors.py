from __future__ import annotations


class L0MpccError(Exception):
    """Root of every error raised by this package."""


class DimensionError(L0MpccError, ValueError):
    pass


class InvalidParameterError(L0MpccError, ValueError):
    pass


class InfeasiblePointError(L0MpccError, ValueError):
    def __init__(self, message: str, violation: float):
        super().__init__(f"{message} (max violation {violation:.3e})")
        self.violation = violation


class NumericalError(L0MpccError, ArithmeticError):
    pass


class UnboundedProblemError(L0MpccError, ArithmeticError):
    pass


class InnerSolverError(L0MpccError, RuntimeError):
    """The convex y-subproblem could not be solved to the requested tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(
            f"{message} (achieved residual {residual:.3e} after {iterations} iterations)"
        )
        self.residual = residual
        self.iterations = iterations


class CertificationError(L0MpccError, RuntimeError):
    pass


class ProblemFileError(L0MpccError, ValueError):
    """Malformed problem/config file; `field` is the dotted JSON path at fault."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
