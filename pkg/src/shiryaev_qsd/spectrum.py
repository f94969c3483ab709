"""Principal eigenvalue of the killed Shiryaev generator as a function of A.

The eigenvalue lambda is parameterized by xi = sqrt(1 - 8 lambda).  For a
kill level A below the critical threshold A*, lambda_A < 1/8 is the unique
xi in (0, 1) with M_{1,xi/2}(2/A) = 0; for A >= A* it sticks at the spectrum
edge 1/8.

Root finding is done in delta = 1 - xi rather than xi.  With
M_{1,xi/2}(z) proportional to M(-delta/2; 2 - delta; z), small A pushes the
root to delta ~ e^{-2/A}, far below any fixed bracket in xi (about 1e-14 at
A = 0.05), while delta keeps full relative precision there.
"""
from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .special import kummer_m, whittaker_M

LAMBDA_EDGE = 0.125
CRITICAL_BRACKET = (1.0, 1.6)
CRITICAL_XTOL = 1e-13
CRITICAL_RTOL = 1e-12


class SpectrumError(ArithmeticError):
    """Root not bracketed; points at a special-function problem."""


class Regime(str, enum.Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL_OR_SUPERCRITICAL = "Critical-or-Supercritical"


@dataclass(frozen=True)
class SpectralPoint:
    A: float
    lam: float
    xi: float
    regime: Regime
    one_minus_xi: float

    def as_dict(self):
        return {
            "A": self.A,
            "lambda": self.lam,
            "xi": self.xi,
            "regime": self.regime.value,
        }


def xi_of_lambda(lam):
    """xi = sqrt(1 - 8 lambda) for lambda in (0, 1/8]."""
    lam = float(lam)
    if not 0.0 < lam <= LAMBDA_EDGE:
        raise ValueError(f"lambda must lie in (0, 1/8], got {lam}")
    return math.sqrt(max(1.0 - 8.0 * lam, 0.0))


def lambda_of_xi(xi):
    xi = float(xi)
    if not 0.0 <= xi < 1.0:
        raise ValueError(f"xi must lie in [0, 1), got {xi}")
    return (1.0 - xi * xi) / 8.0


def _lambda_of_delta(delta):
    # (1 - xi^2)/8 with xi = 1 - delta, without the cancellation
    return delta * (2.0 - delta) / 8.0


def _edge_kummer(A):
    # M(-1/2; 1; 2/A) has the sign of M_{1,0}(2/A)
    return kummer_m(-0.5, 1.0, 2.0 / A).value


_critical_lock = threading.Lock()
_critical_value = None


def critical_threshold():
    """A* with M_{1,0}(2/A*) = 0, computed once and cached."""
    global _critical_value
    if _critical_value is None:
        with _critical_lock:
            if _critical_value is None:
                lo, hi = CRITICAL_BRACKET
                f_lo, f_hi = _edge_kummer(lo), _edge_kummer(hi)
                if f_lo * f_hi > 0:
                    raise SpectrumError("critical threshold not bracketed on [1, 1.6]")
                _critical_value = brentq(
                    _edge_kummer, lo, hi, xtol=CRITICAL_XTOL, rtol=4 * np.finfo(float).eps
                )
    return _critical_value


def _eigen_fn(delta, z):
    return kummer_m(-0.5 * delta, 2.0 - delta, z).value


def _bracket_delta(z):
    """Largest power-of-ten step [lo, hi] in delta where the sign flips."""
    hi = 1.0
    f_hi = _eigen_fn(hi, z)
    if f_hi >= 0:
        raise SpectrumError("eigenvalue equation has no sign change at xi = 0")
    lo = hi
    for _ in range(320):
        lo = hi * 0.1
        f_lo = _eigen_fn(lo, z)
        if f_lo > 0:
            return lo, hi
        if f_lo == 0:
            return lo, lo
        hi = lo
    raise SpectrumError(f"eigenvalue root not bracketed at z = {z}")


def principal_eigenvalue(A):
    """Smallest eigenvalue lambda_A for kill level A > 0."""
    A = float(A)
    if not A > 0 or not math.isfinite(A):
        raise ValueError(f"A must be positive and finite, got {A}")
    a_star = critical_threshold()
    if A >= a_star * (1.0 - CRITICAL_RTOL):
        return SpectralPoint(A, LAMBDA_EDGE, 0.0, Regime.CRITICAL_OR_SUPERCRITICAL, 1.0)
    z = 2.0 / A
    lo, hi = _bracket_delta(z)
    if lo == hi:
        delta = lo
    else:
        delta = brentq(_eigen_fn, lo, hi, args=(z,), xtol=1e-300, rtol=8 * np.finfo(float).eps)
    xi = 1.0 - delta
    return SpectralPoint(A, _lambda_of_delta(delta), xi, Regime.SUBCRITICAL, delta)


def eigenvalue_curve(A_grid):
    """principal_eigenvalue over a strictly ascending grid of positive A."""
    grid = [float(a) for a in A_grid]
    if not grid:
        raise ValueError("A grid is empty")
    if any(a <= 0 for a in grid):
        raise ValueError("A grid must be positive")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("A grid must be strictly ascending")
    return [principal_eigenvalue(a) for a in grid]


def eigen_residual(point):
    """|M_{1,xi/2}(2/A)| at a computed spectral point."""
    return abs(whittaker_M(1.0, 0.5 * point.xi, 2.0 / point.A).value)


def sign_changes(A, n=200):
    """Number of sign changes of M_{1,xi/2}(2/A) over an n-point xi scan of (0, 1)."""
    z = 2.0 / float(A)
    xs = np.linspace(0.0, 1.0, n + 2)[1:-1]
    signs = np.sign([_eigen_fn(1.0 - x, z) for x in xs])
    signs = signs[signs != 0]
    return int(np.count_nonzero(np.diff(signs)))
