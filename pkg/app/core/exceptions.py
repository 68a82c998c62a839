from typing import Optional


class TransportError(Exception):
    """Base error for the solver.

    Mirrors an HTTP-style error: ``detail`` is the one-line message shown to
    the user and ``exit_code`` is the process status the CLI returns.
    """

    exit_code: int = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class InvalidInputError(TransportError):
    exit_code = 2


class SpectralAssumptionError(TransportError):
    """Raised when an eigenvalue of the ADO product matrix is complex or non-positive."""


class PoleProximityError(TransportError):
    pass


class IllConditionedError(TransportError):
    pass


class RootNotFoundError(TransportError):
    pass


class QuadratureConvergenceError(TransportError):
    def __init__(self, detail: str, residual: float):
        super().__init__(f"{detail} (achieved residual {residual:.3e})")
        self.residual = residual
