"""The Spectrum record returned by every eigensolver."""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from homogeig.core.coefficients import AVERAGED, Epsilon
from homogeig.core.problems import BoundaryCondition

MULTIPLE = "MULTIPLE"
VARIATIONAL = "VARIATIONAL"
ROTATION = "ROTATION"


@dataclass
class Spectrum:
    """Ordered eigenvalues lambda_1 <= lambda_2 <= ... with solver metadata.

    Attributes:
        eigenvalues: Ascending eigenvalues
        bc: Boundary condition of the problem
        epsilon: Scale of the weights, or AVERAGED
        solver: Name of the method that produced the values
        tol: Tolerance the solver was asked for
        errors: Per-eigenvalue error estimate
        flags: Per-eigenvalue annotations (MULTIPLE, VARIATIONAL, ...)
        meta: Free-form solver details (mesh size, residuals, ...)
    """

    eigenvalues: np.ndarray
    bc: BoundaryCondition
    epsilon: Epsilon
    solver: str
    tol: float
    errors: np.ndarray
    flags: List[Tuple[str, ...]] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)
    eigenvectors: Any = field(default=None, repr=False)

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if not self.flags:
            self.flags = [()] * len(self.eigenvalues)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def __getitem__(self, k: int) -> float:
        """The k-th eigenvalue, counted from 1."""
        if k < 1:
            raise IndexError("eigenvalues are indexed from 1")
        return float(self.eigenvalues[k - 1])

    @property
    def epsilon_label(self) -> str:
        return "averaged" if self.epsilon is AVERAGED else repr(float(self.epsilon))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bc": self.bc.to_spec(),
            "epsilon": None if self.epsilon is AVERAGED else float(self.epsilon),
            "solver": self.solver,
            "tol": self.tol,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "errors": [float(v) for v in self.errors],
            "flags": [list(f) for f in self.flags],
            "meta": {k: v for k, v in sorted(self.meta.items()) if _plain(v)},
        }


def _plain(value: Any) -> bool:
    return isinstance(value, (str, int, float, bool, type(None), list, dict))
