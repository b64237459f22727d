"""Diffusion laws a(x, xi), their potentials and a sampled hypothesis checker."""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from homogeig.core.coefficients import CoefficientField
from homogeig.core.errors import ConfigError, HypothesisRejected

logger = logging.getLogger(__name__)

REJECT_THRESHOLD = 1e-6
HYPOTHESES = ("H1", "H2", "H3", "H4", "H5", "H7", "H8")
_TINY = 1e-300

ScalarLaw = Union[CoefficientField, Callable[..., np.ndarray], float]


def _coords(x: np.ndarray, dim: int) -> Tuple[np.ndarray, ...]:
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return (x,)
    return x[..., 0], x[..., 1]


def _norm(xi: np.ndarray, dim: int) -> np.ndarray:
    return np.abs(xi) if dim == 1 else np.linalg.norm(xi, axis=-1)


def _dot(a: np.ndarray, b: np.ndarray, dim: int) -> np.ndarray:
    return a * b if dim == 1 else np.sum(a * b, axis=-1)


def _scalar_law(law: ScalarLaw, dim: int) -> Callable[..., np.ndarray]:
    if isinstance(law, CoefficientField):
        if law.dim != dim:
            raise ConfigError(f"A: field dimension {law.dim} does not match {dim}")
        return law
    if callable(law):
        return law
    value = float(law)
    return lambda *c: np.full(np.shape(c[0]), value)


class OperatorSpec:
    """The prototype diffusion law a(x, xi) = A(x) |xi|^(p-2) xi.

    ``A`` is a positive scalar law for any p, or a symmetric positive
    definite 2x2 matrix of scalar laws when p = 2. A law is a
    :class:`CoefficientField`, a number, or a callable taking one
    coordinate array per axis.
    """

    def __init__(
        self,
        p: float,
        A: Union[ScalarLaw, Sequence[Sequence[ScalarLaw]]] = 1.0,
        alpha: Optional[float] = None,
        beta: Optional[float] = None,
        dim: int = 1,
        box: Optional[Sequence[float]] = None,
    ):
        """
        Initialize the operator.

        Args:
            p: Growth exponent, p > 1
            A: Scalar law or 2x2 matrix of scalar laws
            alpha: Ellipticity lower bound (sampled when omitted)
            beta: Ellipticity upper bound (sampled when omitted)
            dim: Spatial dimension, 1 or 2
            box: Domain extents used when sampling bounds (unit cell by default)
        """
        p = float(p)
        if not p > 1.0:
            raise ConfigError(f"p: exponent must exceed 1, got {p}")
        if dim not in (1, 2):
            raise ConfigError(f"dim: only dimensions 1 and 2 are supported, got {dim}")
        self.p = p
        self.dim = dim
        self.box = tuple(box) if box is not None else (1.0,) * dim
        self.matrix = isinstance(A, (list, tuple)) and not isinstance(A, CoefficientField)
        if self.matrix:
            if dim != 2 or len(A) != 2 or any(len(row) != 2 for row in A):
                raise ConfigError("A: matrix coefficient must be 2x2 in dimension 2")
            if p != 2.0:
                raise ConfigError("A: matrix-valued coefficient requires p = 2")
            self._entries = [[_scalar_law(a, dim) for a in row] for row in A]
        else:
            self._scalar = _scalar_law(A, dim)
        self.A = A

        sampled_lo, sampled_hi = self._sampled_bounds()
        if sampled_lo <= 0.0:
            raise ConfigError(f"A: coefficient must be positive definite, min {sampled_lo:.3g}")
        self.alpha = sampled_lo if alpha is None else float(alpha)
        self.beta = sampled_hi if beta is None else float(beta)
        if not 0.0 < self.alpha <= self.beta:
            raise ConfigError(f"alpha: need 0 < alpha <= beta, got {self.alpha}, {self.beta}")
        slack = 1e-12 * self.beta
        if sampled_lo < self.alpha - slack or sampled_hi > self.beta + slack:
            raise ConfigError(
                f"alpha: sampled ellipticity [{sampled_lo:.6g}, {sampled_hi:.6g}] "
                f"violates declared [{self.alpha:.6g}, {self.beta:.6g}]"
            )

    def coefficient(self, x: np.ndarray) -> np.ndarray:
        """A(x) as scalars (..., ) or matrices (..., 2, 2)."""
        coords = _coords(x, self.dim)
        if not self.matrix:
            return np.asarray(self._scalar(*coords), dtype=float)
        rows = [np.stack([np.asarray(a(*coords), float) for a in row], -1) for row in self._entries]
        return np.stack(rows, -2)

    def _sampled_bounds(self) -> Tuple[float, float]:
        rng = np.random.default_rng(0)
        n = 2048
        x = np.stack([rng.random(n) * L for L in self.box], -1)
        A = self.coefficient(x)
        if self.matrix:
            sym = 0.5 * (A + np.swapaxes(A, -1, -2))
            if np.max(np.abs(A - sym)) > 1e-12 * max(1.0, np.max(np.abs(A))):
                raise ConfigError("A: matrix coefficient must be symmetric")
            eig = np.linalg.eigvalsh(sym)
            return float(eig[:, 0].min()), float(eig[:, -1].max())
        if isinstance(self._scalar, CoefficientField):
            return self._scalar.lo, self._scalar.hi
        return float(A.min()), float(A.max())

    def apply(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        A = self.coefficient(x)
        if self.matrix:
            return np.einsum("...ij,...j->...i", A * np.ones(xi.shape[:-1] + (1, 1)), xi)
        norm = _norm(xi, self.dim)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norm > 0.0, norm ** (self.p - 2.0), 0.0)
        scale = A * scale
        return scale * xi if self.dim == 1 else scale[..., None] * xi

    def potential(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        A = self.coefficient(x)
        if self.matrix:
            return np.einsum("...i,...ij,...j->...", xi, A * np.ones(xi.shape[:-1] + (1, 1)), xi)
        return A * _norm(xi, self.dim) ** self.p

    def to_spec(self) -> Dict:
        spec: Dict = {"p": self.p, "alpha": self.alpha, "beta": self.beta}
        if self.matrix:
            spec["A"] = [[_law_spec(a) for a in row] for row in self.A]
        else:
            spec["A"] = _law_spec(self.A)
        return spec

    def __repr__(self) -> str:
        kind = "matrix" if self.matrix else "scalar"
        return f"OperatorSpec(p={self.p}, {kind} A, alpha={self.alpha:.6g}, beta={self.beta:.6g})"


def _law_spec(law) -> Union[Dict, str]:
    if isinstance(law, CoefficientField):
        return law.to_spec()
    if callable(law):
        return getattr(law, "__name__", "callable")
    return {"kind": "constant", "value": float(law)}


class CallableOperator:
    """A user-supplied law a(x, xi) checked against the structural hypotheses."""

    def __init__(
        self,
        law: Callable[[np.ndarray, np.ndarray], np.ndarray],
        p: float,
        alpha: float,
        beta: float,
        dim: int = 1,
        box: Optional[Sequence[float]] = None,
        potential: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    ):
        self.law = law
        self.p = float(p)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.dim = dim
        self.box = tuple(box) if box is not None else (1.0,) * dim
        self.matrix = False
        self._potential = potential

    def apply(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return np.asarray(self.law(x, np.asarray(xi, dtype=float)), dtype=float)

    def potential(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        if self._potential is None:
            raise NotImplementedError("no potential supplied for this law")
        return np.asarray(self._potential(x, xi), dtype=float)


Operator = Union[OperatorSpec, CallableOperator]


def apply(op: Operator, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Evaluate a(x, xi)."""
    return op.apply(x, xi)


def potential(op: Operator, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Evaluate the potential with Phi(x, 0) = 0 and grad Phi = p a."""
    return op.potential(x, xi)


@dataclass
class HypothesisReport:
    """Worst sampled violation of each hypothesis, clamped at zero."""

    residuals: Dict[str, float]
    n_samples: int
    seed: int
    h8_alpha: float
    h6_ratio: Dict[str, float] = field(default_factory=dict)
    h0: str = "vacuous"

    @property
    def rejected(self) -> Tuple[str, ...]:
        return tuple(h for h in HYPOTHESES if self.residuals[h] > REJECT_THRESHOLD)

    @property
    def passed(self) -> bool:
        return not self.rejected

    def to_dict(self) -> Dict:
        return {
            "residuals": dict(self.residuals),
            "n_samples": self.n_samples,
            "seed": self.seed,
            "h8_alpha": self.h8_alpha,
            "h6_ratio": dict(self.h6_ratio),
            "h0": self.h0,
            "rejected": list(self.rejected),
        }


def _sample_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    magnitude = 10.0 ** rng.uniform(-2.0, 2.0, n)
    if dim == 1:
        return magnitude * rng.choice([-1.0, 1.0], n)
    angle = rng.uniform(0.0, 2.0 * np.pi, n)
    return magnitude[:, None] * np.stack([np.cos(angle), np.sin(angle)], -1)


def check_hypotheses(
    op: Operator, n_samples: int, seed: int = 0, raise_on_reject: bool = True
) -> HypothesisReport:
    """
    Sample the structural hypotheses of a diffusion law.

    Every residual is a relative violation, zero when the inequality holds.

    Args:
        op: The law to check
        n_samples: Number of sampled (x, xi1, xi2, t) tuples
        seed: Seed of the sampler
        raise_on_reject: Raise HypothesisRejected when a residual exceeds 1e-6

    Returns:
        The hypothesis report
    """
    if n_samples < 1:
        raise ConfigError(f"n_samples: need at least one sample, got {n_samples}")
    dim, p = op.dim, op.p
    rng = np.random.default_rng(seed)
    x = np.stack([rng.random(n_samples) * L for L in op.box], -1)
    if dim == 1:
        x = x[:, 0]
    xi1 = _sample_vectors(rng, n_samples, dim)
    xi2 = _sample_vectors(rng, n_samples, dim)
    t = 10.0 ** rng.uniform(-1.0, 1.0, n_samples)

    a1, a2 = op.apply(x, xi1), op.apply(x, xi2)
    n1, n2 = _norm(xi1, dim), _norm(xi2, dim)
    na1, na2 = _norm(a1, dim), _norm(a2, dim)
    diff_a, diff_xi = a1 - a2, xi1 - xi2
    mono = _dot(diff_a, diff_xi, dim)
    mono_scale = (na1 + na2) * (n1 + n2) + _TINY

    residuals: Dict[str, float] = {}
    residuals["H1"] = float(np.max(np.maximum(0.0, -mono) / mono_scale))
    coercive = _dot(a1, xi1, dim)
    floor = op.alpha * n1**p
    residuals["H2"] = float(np.max(np.maximum(0.0, floor - coercive) / (floor + _TINY)))
    cap = op.beta * n1 ** (p - 1.0)
    residuals["H3"] = float(np.max(np.maximum(0.0, na1 - cap) / (cap + _TINY)))

    scaled = op.apply(x, xi1 * (t if dim == 1 else t[:, None]))
    expected = (t ** (p - 1.0) if dim == 1 else t[:, None] ** (p - 1.0)) * a1
    residuals["H4"] = float(
        np.max(_norm(scaled - expected, dim) / (_norm(expected, dim) + _TINY))
    )

    odd = _norm(op.apply(x, -xi1) + a1, dim) / (na1 + _norm(op.apply(x, -xi1), dim) + _TINY)
    zero = np.zeros_like(xi1)
    at_zero = _norm(op.apply(x, zero), dim) / (np.median(na1) + _TINY)
    residuals["H5"] = float(max(odd.max(), at_zero.max()))

    # cycle xi1 -> xi2 -> xi1
    cycle = _dot(a1, xi2 - xi1, dim) + _dot(a2, xi1 - xi2, dim)
    residuals["H7"] = float(np.max(np.maximum(0.0, cycle) / mono_scale))

    gamma = max(2.0, p)
    psi = _dot(a1, xi1, dim) + _dot(a2, xi2, dim)
    dist = _norm(diff_xi, dim)
    usable = (dist > 0.0) & (psi > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = mono[usable] / (dist[usable] ** gamma * psi[usable] ** (1.0 - gamma / p))
    h8_alpha = float(ratio.min()) if ratio.size else 0.0
    residuals["H8"] = max(0.0, -h8_alpha) / (abs(h8_alpha) + 1.0) if h8_alpha < 0 else 0.0

    delta = min(p / 2.0, p - 1.0)
    positive = usable & (mono > 0.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        h6 = _norm(diff_a, dim)[positive] / (
            psi[positive] ** ((p - 1.0 - delta) / p) * mono[positive] ** (delta / p)
        )
    h6 = h6[np.isfinite(h6)]
    h6_ratio = {"delta": delta}
    if h6.size:
        h6_ratio.update(
            {"min": float(h6.min()), "median": float(np.median(h6)), "max": float(h6.max())}
        )

    report = HypothesisReport(
        residuals=residuals, n_samples=n_samples, seed=seed, h8_alpha=h8_alpha, h6_ratio=h6_ratio
    )
    logger.info("hypothesis check (n=%d, seed=%d): rejected=%s", n_samples, seed, report.rejected)
    if raise_on_reject and report.rejected:
        raise HypothesisRejected(report.rejected, residuals)
    return report
