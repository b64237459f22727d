"""Generalized trigonometric functions sin_p, cos_p and the constant pi_p.

sin_p is the inverse of ``arcsin_p(y) = integral_0^y (1 - s^p)^(-1/p) ds`` on
[0, pi_p / 2], continued to the line by the reflections
``sin_p(pi_p - t) = sin_p(t)`` and ``sin_p(t + pi_p) = -sin_p(t)``.
``cos_p`` is its derivative and ``|sin_p|^p + |cos_p|^p = 1``.

The inverse is evaluated through the regularized incomplete beta function:
``|sin_p(t)|^p = I^{-1}(2 t / pi_p; 1/p, 1 - 1/p)`` on the first quarter.
"""
import math
from typing import Tuple

import numpy as np
from scipy import integrate, special

from homogeig.core.errors import ConfigError


def pi_p(p: float) -> float:
    """Half period of sin_p: 2 pi / (p sin(pi / p))."""
    if not p > 1.0:
        raise ConfigError(f"p: exponent must exceed 1, got {p}")
    return 2.0 * math.pi / (p * math.sin(math.pi / p))


def pi_p_quadrature(p: float) -> float:
    """pi_p as 2 * integral_0^1 (1 - s^p)^(-1/p) ds, by adaptive quadrature."""
    if not p > 1.0:
        raise ConfigError(f"p: exponent must exceed 1, got {p}")

    def regular_part(s: float) -> float:
        if s >= 1.0:
            return p ** (-1.0 / p)
        return ((1.0 - s**p) / (1.0 - s)) ** (-1.0 / p)

    value, _ = integrate.quad(
        regular_part, 0.0, 1.0, weight="alg", wvar=(0.0, -1.0 / p), epsabs=1e-14, epsrel=1e-13
    )
    return 2.0 * value


class PTrig:
    """p-trigonometric functions for a fixed exponent p."""

    def __init__(self, p: float):
        """
        Initialize the function family.

        Args:
            p: Exponent, p > 1
        """
        self.p = float(p)
        self.pi_p = pi_p(self.p)
        self.half = 0.5 * self.pi_p
        self._a = 1.0 / self.p
        self._b = 1.0 - 1.0 / self.p

    # -- first quarter --------------------------------------------------------

    def quarter_powers(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(|sin_p|^p, |cos_p|^p) for t in [0, pi_p / 2]."""
        x = np.clip(np.asarray(t, dtype=float) / self.half, 0.0, 1.0)
        low = x <= 0.5
        sp = np.where(low, special.betaincinv(self._a, self._b, np.where(low, x, 0.5)), 0.0)
        cp = np.where(~low, special.betaincinv(self._b, self._a, np.where(low, 0.5, 1.0 - x)), 0.0)
        sp = np.where(low, sp, 1.0 - cp)
        cp = np.where(low, 1.0 - sp, cp)
        return sp, cp

    def phase_from_powers(self, sp: np.ndarray, cp: np.ndarray) -> np.ndarray:
        """Angle in [0, pi_p / 2] with the given (|sin_p|^p, |cos_p|^p)."""
        sp = np.clip(np.asarray(sp, dtype=float), 0.0, 1.0)
        cp = np.clip(np.asarray(cp, dtype=float), 0.0, 1.0)
        low = sp <= 0.5
        direct = special.betainc(self._a, self._b, sp)
        complement = 1.0 - special.betainc(self._b, self._a, cp)
        return self.half * np.where(low, direct, complement)

    def arcsin_p(self, y: np.ndarray) -> np.ndarray:
        """Inverse of sin_p on [0, 1]."""
        y = np.clip(np.abs(np.asarray(y, dtype=float)), 0.0, 1.0)
        return self.half * special.betainc(self._a, self._b, y**self.p)

    # -- whole line -----------------------------------------------------------

    def reduce(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Split theta into (quarter index n, in-quarter offset r)."""
        theta = np.asarray(theta, dtype=float)
        n = np.floor(theta / self.half)
        return n.astype(int), theta - n * self.half

    def powers(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(|sin_p|^p, |cos_p|^p, sign sin_p, sign cos_p) anywhere on the line."""
        n, r = self.reduce(theta)
        odd = (n % 2) == 1
        sp, cp = self.quarter_powers(np.where(odd, self.half - r, r))
        quarter = n % 4
        sign_s = np.where(quarter < 2, 1.0, -1.0)
        sign_c = np.where((quarter == 0) | (quarter == 3), 1.0, -1.0)
        return sp, cp, sign_s, sign_c

    def sin(self, theta: np.ndarray) -> np.ndarray:
        sp, _, sign_s, _ = self.powers(theta)
        return sign_s * sp ** (1.0 / self.p)

    def cos(self, theta: np.ndarray) -> np.ndarray:
        _, cp, _, sign_c = self.powers(theta)
        return sign_c * cp ** (1.0 / self.p)

    def from_quarter(self, n: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Angle in quarter n whose mirrored offset is t (inverse of powers)."""
        n = np.asarray(n)
        return n * self.half + np.where((n % 2) == 1, self.half - t, t)

    def stretch(self, theta: np.ndarray, sigma: float) -> np.ndarray:
        """Angle phi in the quarter of theta with tan_p(phi) = sigma * tan_p(theta)."""
        n, _ = self.reduce(theta)
        sp, cp, _, _ = self.powers(theta)
        scaled = sigma**self.p * sp
        total = scaled + cp
        t = self.phase_from_powers(scaled / total, cp / total)
        return self.from_quarter(n, t)
