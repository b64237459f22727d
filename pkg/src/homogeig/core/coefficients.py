"""Q-periodic coefficient fields and their ε-scalings."""
import enum
import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from homogeig.core.errors import ConfigError

logger = logging.getLogger(__name__)

FIELD_KINDS = ("constant", "piecewise", "trig")
BOUNDS_SAMPLE = 4096
BOUNDS_SLACK = 1e-12


class Averaged(enum.Enum):
    """Sentinel for the homogenized limit ε → 0."""

    AVERAGED = "averaged"

    def __repr__(self) -> str:
        return "AVERAGED"


AVERAGED = Averaged.AVERAGED
Epsilon = Union[float, Averaged]


def _frac(y: np.ndarray) -> np.ndarray:
    return y - np.floor(y)


class CoefficientField:
    """A bounded Q-periodic scalar field on R^N, N in {1, 2}.

    Three kinds are supported, all with closed-form cell averages:

    * ``constant``: a single value.
    * ``piecewise``: constant on a uniform grid of the unit cell. In 2D the
      grid is indexed ``values[i][j]`` with ``i`` along x and ``j`` along y.
    * ``trig``: a finite sum of ``cos * cos(2 pi k.y) + sin * sin(2 pi k.y)``
      with integer frequency vectors ``k``.

    Instances are immutable once built.
    """

    def __init__(
        self,
        kind: str,
        dim: int = 1,
        value: float = 0.0,
        values: Optional[Sequence] = None,
        terms: Optional[Iterable[Dict]] = None,
        lo: Optional[float] = None,
        hi: Optional[float] = None,
    ):
        """
        Initialize a coefficient field.

        Args:
            kind: One of "constant", "piecewise" or "trig"
            dim: Spatial dimension, 1 or 2
            value: Value of a constant field
            values: Grid values of a piecewise field
            terms: Trigonometric terms as dicts with keys k, cos, sin
            lo: Declared lower bound (inferred when omitted)
            hi: Declared upper bound (inferred when omitted)
        """
        if kind not in FIELD_KINDS:
            raise ConfigError(f"kind: unknown field kind {kind!r}")
        if dim not in (1, 2):
            raise ConfigError(f"dim: only dimensions 1 and 2 are supported, got {dim}")
        self.kind = kind
        self.dim = dim
        self.value = float(value)
        self._grid = None
        self._freqs = np.zeros((0, dim), dtype=int)
        self._cos = np.zeros(0)
        self._sin = np.zeros(0)

        if kind == "piecewise":
            grid = np.asarray(values, dtype=float)
            if grid.ndim != dim or grid.size == 0:
                raise ConfigError(
                    f"values: piecewise field in {dim}D needs a {dim}-dimensional grid"
                )
            if not np.all(np.isfinite(grid)):
                raise ConfigError("values: grid values must be finite")
            grid.flags.writeable = False
            self._grid = grid
        elif kind == "trig":
            freqs, cos, sin = [], [], []
            for n, term in enumerate(terms or ()):
                k = term.get("k", [0] * dim)
                k = [k] if np.isscalar(k) else list(k)
                if len(k) != dim or any(int(kk) != kk for kk in k):
                    raise ConfigError(
                        f"terms[{n}].k: needs {dim} integer frequencies, got {k}"
                    )
                freqs.append([int(kk) for kk in k])
                cos.append(float(term.get("cos", 0.0)))
                sin.append(float(term.get("sin", 0.0)))
            if not freqs:
                raise ConfigError("terms: trig field needs at least one term")
            self._freqs = np.asarray(freqs, dtype=int).reshape(-1, dim)
            self._cos = np.asarray(cos)
            self._sin = np.asarray(sin)
            for arr in (self._freqs, self._cos, self._sin):
                arr.flags.writeable = False
        elif not np.isfinite(self.value):
            raise ConfigError("value: constant field value must be finite")

        inferred_lo, inferred_hi = self._inferred_bounds()
        self.lo = inferred_lo if lo is None else float(lo)
        self.hi = inferred_hi if hi is None else float(hi)
        if self.lo > self.hi:
            raise ConfigError(f"lo: lower bound {self.lo} exceeds upper bound {self.hi}")
        self._check_bounds()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def constant(cls, value: float, dim: int = 1, **kwargs) -> "CoefficientField":
        return cls("constant", dim=dim, value=value, **kwargs)

    @classmethod
    def piecewise(cls, values: Sequence, **kwargs) -> "CoefficientField":
        dim = np.asarray(values).ndim
        return cls("piecewise", dim=dim, values=values, **kwargs)

    @classmethod
    def trig(cls, terms: Iterable[Dict], dim: int = 1, **kwargs) -> "CoefficientField":
        return cls("trig", dim=dim, terms=list(terms), **kwargs)

    @classmethod
    def from_spec(cls, spec: Dict, dim: int, path: str = "field") -> "CoefficientField":
        """
        Build a field from a run-config record.

        Args:
            spec: Mapping with key ``kind`` and the kind's parameters
            dim: Spatial dimension the field lives in
            path: Config path used in error messages

        Returns:
            The constructed field
        """
        if not isinstance(spec, dict):
            raise ConfigError(f"{path}: expected a field record, got {type(spec).__name__}")
        allowed = {"kind", "value", "values", "terms", "lo", "hi"}
        unknown = sorted(set(spec) - allowed)
        if unknown:
            raise ConfigError(f"{path}.{unknown[0]}: unknown key")
        kind = spec.get("kind")
        try:
            if kind == "constant":
                return cls.constant(spec["value"], dim=dim, lo=spec.get("lo"), hi=spec.get("hi"))
            if kind == "piecewise":
                field = cls.piecewise(spec["values"], lo=spec.get("lo"), hi=spec.get("hi"))
                if field.dim != dim:
                    raise ConfigError(f"values: expected a {dim}D grid")
                return field
            if kind == "trig":
                return cls.trig(spec["terms"], dim=dim, lo=spec.get("lo"), hi=spec.get("hi"))
        except KeyError as exc:
            raise ConfigError(f"{path}.{exc.args[0]}: missing for kind {kind!r}") from None
        except ConfigError as exc:
            raise ConfigError(f"{path}.{exc}") from None
        raise ConfigError(f"{path}.kind: unknown field kind {kind!r}")

    def to_spec(self) -> Dict:
        """Return the run-config record describing this field."""
        spec: Dict = {"kind": self.kind, "lo": self.lo, "hi": self.hi}
        if self.kind == "constant":
            spec["value"] = self.value
        elif self.kind == "piecewise":
            spec["values"] = self._grid.tolist()
        else:
            spec["terms"] = [
                {"k": [int(v) for v in k], "cos": float(a), "sin": float(b)}
                for k, a, b in zip(self._freqs, self._cos, self._sin)
            ]
        return spec

    # -- evaluation -----------------------------------------------------------

    def __call__(self, *coords) -> np.ndarray:
        """Evaluate at cell coordinates, one array per axis (broadcast)."""
        if len(coords) != self.dim:
            raise ValueError(f"expected {self.dim} coordinate arrays, got {len(coords)}")
        coords = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
        if self.kind == "constant":
            return np.full(coords[0].shape, self.value)
        if self.kind == "piecewise":
            index = []
            for axis, c in enumerate(coords):
                n = self._grid.shape[axis]
                index.append(np.minimum((_frac(c) * n).astype(int), n - 1))
            return self._grid[tuple(index)]
        phase = np.zeros(coords[0].shape + (len(self._cos),))
        for axis, c in enumerate(coords):
            phase = phase + c[..., None] * self._freqs[:, axis]
        phase *= 2.0 * np.pi
        return np.cos(phase) @ self._cos + np.sin(phase) @ self._sin

    @property
    def average(self) -> float:
        """Exact cell average of the field."""
        if self.kind == "constant":
            return self.value
        if self.kind == "piecewise":
            return float(self._grid.mean())
        zero = np.all(self._freqs == 0, axis=1)
        return float(self._cos[zero].sum())

    @property
    def grid(self) -> Optional[np.ndarray]:
        return self._grid

    def cell_lines(self, axis: int = 0) -> np.ndarray:
        """Jump positions of a piecewise field inside one cell along an axis."""
        if self.kind != "piecewise":
            return np.zeros(0)
        n = self._grid.shape[axis]
        return np.arange(1, n) / n

    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "piecewise":
            return bool(np.ptp(self._grid) == 0.0)
        nonzero = ~np.all(self._freqs == 0, axis=1)
        return bool(np.all(self._cos[nonzero] == 0.0) and np.all(self._sin[nonzero] == 0.0))

    # -- arithmetic -----------------------------------------------------------

    def __mul__(self, scale: float) -> "CoefficientField":
        scale = float(scale)
        if self.kind == "constant":
            return CoefficientField.constant(scale * self.value, dim=self.dim)
        if self.kind == "piecewise":
            return CoefficientField.piecewise(scale * self._grid)
        return CoefficientField.trig(
            self._terms(scale_cos=scale, scale_sin=scale), dim=self.dim
        )

    __rmul__ = __mul__

    def __add__(self, other: "CoefficientField") -> "CoefficientField":
        if not isinstance(other, CoefficientField):
            return NotImplemented
        if other.dim != self.dim:
            raise ConfigError("dim: cannot combine fields of different dimension")
        if self.kind == "constant" and other.kind != "constant":
            return other + self
        if other.kind == "constant":
            if self.kind == "constant":
                return CoefficientField.constant(self.value + other.value, dim=self.dim)
            if self.kind == "piecewise":
                return CoefficientField.piecewise(self._grid + other.value)
            offset = {"k": [0] * self.dim, "cos": other.value, "sin": 0.0}
            return CoefficientField.trig(self._terms() + [offset], dim=self.dim)
        if self.kind == "piecewise" and other.kind == "piecewise":
            if self._grid.shape != other._grid.shape:
                raise ConfigError("values: piecewise grids must share a shape to combine")
            return CoefficientField.piecewise(self._grid + other._grid)
        if self.kind == "trig" and other.kind == "trig":
            return CoefficientField.trig(self._terms() + other._terms(), dim=self.dim)
        raise ConfigError(f"kind: cannot combine {self.kind} with {other.kind}")

    def _terms(self, scale_cos: float = 1.0, scale_sin: float = 1.0) -> List[Dict]:
        return [
            {"k": [int(v) for v in k], "cos": scale_cos * a, "sin": scale_sin * b}
            for k, a, b in zip(self._freqs, self._cos, self._sin)
        ]

    # -- bounds ---------------------------------------------------------------

    def _inferred_bounds(self) -> Tuple[float, float]:
        if self.kind == "constant":
            return self.value, self.value
        if self.kind == "piecewise":
            return float(self._grid.min()), float(self._grid.max())
        zero = np.all(self._freqs == 0, axis=1)
        offset = float(self._cos[zero].sum())
        spread = float(np.hypot(self._cos[~zero], self._sin[~zero]).sum())
        return offset - spread, offset + spread

    def _check_bounds(self) -> None:
        rng = np.random.default_rng(0)
        coords = [rng.random(BOUNDS_SAMPLE) for _ in range(self.dim)]
        sample = self(*coords)
        if self.kind == "piecewise":
            sample = np.concatenate([sample, self._grid.ravel()])
        tol = BOUNDS_SLACK * max(1.0, abs(self.lo), abs(self.hi))
        if sample.min() < self.lo - tol or sample.max() > self.hi + tol:
            raise ConfigError(
                f"lo: field values [{sample.min():.6g}, {sample.max():.6g}] "
                f"leave declared bounds [{self.lo:.6g}, {self.hi:.6g}]"
            )

    def __repr__(self) -> str:
        return f"CoefficientField(kind={self.kind!r}, dim={self.dim}, average={self.average:.6g})"


class ScaledField:
    """A coefficient field seen at scale ε: ``g_eps(x) = g(x / eps)``."""

    def __init__(self, base: CoefficientField, epsilon: Epsilon):
        """
        Initialize a scaled field.

        Args:
            base: The Q-periodic field
            epsilon: Positive scale or AVERAGED for the cell average
        """
        if epsilon is not AVERAGED:
            epsilon = float(epsilon)
            if not epsilon > 0.0:
                raise ConfigError(f"epsilon: must be positive or averaged, got {epsilon}")
        self.base = base
        self.epsilon = epsilon

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def is_averaged(self) -> bool:
        return self.epsilon is AVERAGED

    @property
    def average(self) -> float:
        return self.base.average

    @property
    def lo(self) -> float:
        return self.average if self.is_averaged else self.base.lo

    @property
    def hi(self) -> float:
        return self.average if self.is_averaged else self.base.hi

    def __call__(self, *coords) -> np.ndarray:
        if self.is_averaged:
            shape = np.broadcast_shapes(*[np.shape(c) for c in coords])
            return np.full(shape, self.average)
        return self.base(*[np.asarray(c, dtype=float) / self.epsilon for c in coords])

    def is_constant(self) -> bool:
        return self.is_averaged or self.base.is_constant()

    def breakpoints(self, length: float, axis: int = 0) -> np.ndarray:
        """Discontinuity coordinates in (0, length) along an axis."""
        if self.is_averaged or self.base.kind != "piecewise":
            return np.zeros(0)
        lines = np.concatenate([[0.0], self.base.cell_lines(axis)])
        periods = np.arange(0, int(np.ceil(length / self.epsilon)) + 1)
        points = ((periods[:, None] + lines[None, :]) * self.epsilon).ravel()
        points = points[(points > 0.0) & (points < length)]
        return np.unique(points)

    def __repr__(self) -> str:
        return f"ScaledField({self.base!r}, epsilon={self.epsilon!r})"


def eval_scaled(f: ScaledField, *x) -> np.ndarray:
    """Evaluate ``f`` at physical point(s) ``x``."""
    return f(*x)


def cell_average(f: CoefficientField) -> float:
    """Return the exact cell average of ``f``."""
    return f.average


def sample_periodicity(f: CoefficientField, n: int, seed: int = 0) -> float:
    """
    Largest periodicity violation |f(y + e_i) - f(y)| over random samples.

    Args:
        f: Field to test
        n: Number of random points
        seed: Seed of the sampler

    Returns:
        Maximum violation over the sample and every unit direction
    """
    if n < 1:
        raise ConfigError(f"n: need at least one sample, got {n}")
    rng = np.random.default_rng(seed)
    coords = [rng.uniform(-2.0, 2.0, n) for _ in range(f.dim)]
    base = f(*coords)
    worst = 0.0
    for axis in range(f.dim):
        shifted = [c + 1.0 if i == axis else c for i, c in enumerate(coords)]
        worst = max(worst, float(np.max(np.abs(f(*shifted) - base))))
    logger.debug("periodicity sample of %d points: worst violation %.3g", n, worst)
    return worst
