"""Exception hierarchy shared by the core modules and the CLI."""
from typing import Iterable, Optional, Tuple


class HomogEigError(Exception):
    """Base class for every error raised by homogeig."""


class ConfigError(HomogEigError, ValueError):
    """Invalid run-config or invalid object construction."""


class SolverError(HomogEigError, RuntimeError):
    """A numerical solve could not produce a trustworthy result."""

    def __init__(self, message: str, cell: Optional[Tuple] = None):
        self.cell = cell
        if cell is not None:
            message = f"{message} [cell bc={cell[0]} k={cell[1]} eps={cell[2]}]"
        super().__init__(message)


class NoConvergenceError(SolverError):
    """The eigenvalue bracket for index k could not be established."""

    def __init__(self, k: int, detail: str = ""):
        self.k = k
        text = f"NO_CONVERGENCE({k})"
        if detail:
            text += f": {detail}"
        super().__init__(text)


class SingularPencilError(SolverError):
    """The right-hand side of a pencil vanishes on the active space."""


class MeshTooCoarseError(SolverError):
    """The mesh does not resolve the oscillation scale."""


class ZeroDenominatorError(HomogEigError, ArithmeticError):
    """A quotient was requested with a vanishing denominator."""


class HypothesisRejected(HomogEigError, ValueError):
    """An operator failed one or more structural hypotheses."""

    def __init__(self, hypothesis_ids: Iterable[str], residuals: Optional[dict] = None):
        self.hypothesis_ids = tuple(hypothesis_ids)
        self.residuals = residuals or {}
        super().__init__(f"REJECTED({', '.join(self.hypothesis_ids)})")


class DegenerateFitError(HomogEigError, ValueError):
    """Data sit at the noise floor and admit no meaningful fit."""
