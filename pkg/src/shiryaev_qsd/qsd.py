"""Quasi-stationary density, distribution and eigenfunction for the killed process.

All evaluations work in z = 2/x.  Three closed forms are used:

* ``"subcritical"``: principal QSD for A < A*, a ratio of M functions,
* ``"critical"``: principal QSD for A >= A* (xi = 0), the general
  Whittaker combination with C = sqrt(pi) (A/4) e^{1/A},
* ``"general"``: the general combination
  q(x) = (C/x) e^{-1/x} {W_{1,b}(2/A) M_{1,b}(2/x) - M_{1,b}(2/A) W_{1,b}(2/x)}
  for any lambda, used by the continuum family.

Here b = xi/2.  The density is zero below A and vanishes at x = A.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .spectrum import LAMBDA_EDGE, principal_eigenvalue, xi_of_lambda
from .special import (
    gamma,
    whittaker_M,
    whittaker_M_values,
    whittaker_W,
    whittaker_W_values,
)

CLAMP_REL = 1e-13
CDF_SLACK = 1e-12
QUANTILE_TOL = 1e-9
QUANTILE_MAX_DOUBLINGS = 200

FORMS = ("subcritical", "critical", "general")


class QsdError(ArithmeticError):
    """Internal consistency failure (large negative pdf, cdf out of range)."""


@dataclass(frozen=True)
class QsdModel:
    """Immutable description of one quasi-stationary density.

    ``K`` is the prefactor actually used by the chosen form: the reduced
    constant (xi+1)/(2 e^{-1/A} M_{0,b}(2/A)) for ``"subcritical"``, and C for
    the other two.
    """

    A: float
    lam: float
    xi: float
    C: float
    family_flag: bool
    form: str
    K: float
    m0A: float
    m1A: float
    w0A: float
    w1A: float
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def b(self):
        return 0.5 * self.xi

    def pdf(self, x):
        return qsd_pdf(self, x)

    def cdf(self, x):
        return qsd_cdf(self, x)


def _check_A(A):
    A = float(A)
    if not A > 0 or not math.isfinite(A):
        raise ValueError(f"A must be positive and finite, got {A}")
    return A


def _boundary(A, b):
    z = 2.0 / A
    return (
        whittaker_M(0.0, b, z).value,
        whittaker_M(1.0, b, z).value,
        whittaker_W(0.0, b, z).value,
        whittaker_W(1.0, b, z).value,
    )


def speed_measure(x):
    """m(x) = (2/x^2) e^{-2/x} for x > 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("speed measure needs x > 0")
    out = 2.0 / arr**2 * np.exp(-2.0 / arr)
    return float(out) if out.ndim == 0 else out


def normalizer(A, xi):
    """C = sqrt(pi) (A/4) e^{1/A} (xi+1) / 2^xi / Gamma(xi/2 + 1)."""
    A = _check_A(A)
    xi = float(xi)
    if not 0.0 <= xi < 1.0:
        raise ValueError(f"xi must lie in [0, 1), got {xi}")
    return math.sqrt(math.pi) * (A / 4.0) * math.exp(1.0 / A) * (xi + 1.0) / 2.0**xi / gamma(0.5 * xi + 1.0)


def normalizer_unsimplified(A, xi, values=None):
    """C = e^{1/A} / {W_{0,b} M_{1,b} + 2/(xi+1) M_{0,b} W_{1,b}} at z = 2/A.

    ``values`` may supply (M0, M1, W0, W1) at 2/A from another evaluation route.
    """
    A = _check_A(A)
    xi = float(xi)
    m0, m1, w0, w1 = values if values is not None else _boundary(A, 0.5 * xi)
    return math.exp(1.0 / A) / (w0 * m1 + 2.0 / (xi + 1.0) * m0 * w1)


def _build(A, lam, xi, form, family_flag, **meta):
    b = 0.5 * xi
    m0A, m1A, w0A, w1A = _boundary(A, b)
    if form == "subcritical":
        C = normalizer(A, xi)
        K = (xi + 1.0) / (2.0 * math.exp(-1.0 / A) * m0A)
    elif form == "critical":
        C = math.sqrt(math.pi) * (A / 4.0) * math.exp(1.0 / A)
        K = C
    elif form == "general":
        C = normalizer(A, xi)
        K = C
    else:
        raise ValueError(f"unknown form {form!r}")
    return QsdModel(A, lam, xi, C, family_flag, form, K, m0A, m1A, w0A, w1A, meta)


def principal_model(A, lam_override=None):
    """Principal QSD in its reduced closed form.

    ``lam_override`` swaps in another lambda while keeping the reduced form;
    the result is then not a QSD (q(A) != 0 for A < A*), which the oracle
    uses to show its checks are not vacuous.
    """
    A = _check_A(A)
    sp = principal_eigenvalue(A)
    form = "subcritical" if sp.lam < LAMBDA_EDGE else "critical"
    if lam_override is None:
        return _build(A, sp.lam, sp.xi, form, False)
    lam = float(lam_override)
    return _build(A, lam, xi_of_lambda(lam), form, False, injected=True)


def general_model(A, lam, family_flag=False):
    """Model in the general Whittaker-combination form for any lambda in (0, 1/8]."""
    A = _check_A(A)
    lam = float(lam)
    return _build(A, lam, xi_of_lambda(lam), "general", family_flag)


def family_pdf(A, lam):
    """Member of the continuum family of quasi-stationary densities, 0 < lam < lambda_A."""
    A = _check_A(A)
    lam = float(lam)
    lam_A = principal_eigenvalue(A).lam
    if not 0.0 < lam < lam_A:
        raise ValueError(f"family needs 0 < lambda < lambda_A = {lam_A!r}, got {lam}")
    return general_model(A, lam, family_flag=True)


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _finish(out, scalar):
    return float(np.ravel(out)[0]) if scalar else out


def _pdf_terms(model, x):
    """Signed pdf and the magnitude scale of its cancelling terms, for x > A."""
    z = 2.0 / x
    pre = model.K / x * np.exp(-1.0 / x)
    b = model.b
    m1 = whittaker_M_values(1.0, b, z)
    if model.form == "subcritical":
        # M_{1,b} = e^{-z/2} z^{b+1/2} M(b - 1/2; 1 + 2b; z), whose series
        # terms sum in magnitude to at most 1 + |b - 1/2| e^z
        val = pre * m1
        bound = np.exp(-0.5 * z) * z ** (b + 0.5) * (1.0 + abs(b - 0.5) * np.exp(z))
        return val, np.abs(pre) * bound
    w1 = whittaker_W_values(1.0, b, z)
    t1 = model.w1A * m1
    t2 = model.m1A * w1
    return pre * (t1 - t2), np.abs(pre) * (np.abs(t1) + np.abs(t2))


def qsd_pdf(model, x):
    """q_A(x); zero outside [A, inf)."""
    arr, scalar = _as_array(x)
    flat = arr.reshape(-1)
    out = np.zeros_like(flat)
    inside = flat > model.A
    if inside.any():
        val, scale = _pdf_terms(model, flat[inside])
        if model.meta.get("injected"):
            # not a density; hand back the raw closed form
            out[inside] = val
            return _finish(out.reshape(arr.shape), scalar)
        neg = val < 0
        if np.any(neg & (val < -CLAMP_REL * scale)):
            worst = flat[inside][np.argmin(val / np.where(scale > 0, scale, 1.0))]
            raise QsdError(f"negative density beyond round-off at x = {worst!r}")
        out[inside] = np.where(neg, 0.0, val)
    return _finish(out.reshape(arr.shape), scalar)


def _cdf_raw(model, x):
    z = 2.0 / x
    b = model.b
    e = np.exp(-1.0 / x)
    m0 = whittaker_M_values(0.0, b, z)
    if model.form == "subcritical":
        return 1.0 - e * m0 / (math.exp(-1.0 / model.A) * model.m0A)
    w0 = whittaker_W_values(0.0, b, z)
    return 1.0 - model.K * e * (w0 * model.m1A + 2.0 / (model.xi + 1.0) * m0 * model.w1A)


def qsd_cdf(model, x):
    """Q_A(x) = integral of q_A from A to x, in closed form."""
    arr, scalar = _as_array(x)
    flat = arr.reshape(-1)
    out = np.zeros_like(flat)
    inside = flat > model.A
    if inside.any():
        val = _cdf_raw(model, flat[inside])
        if np.any((val < -CDF_SLACK) | (val > 1.0 + CDF_SLACK)) and not model.meta.get("injected"):
            raise QsdError("cdf left [0, 1] by more than round-off")
        out[inside] = np.clip(val, 0.0, 1.0)
    return _finish(out.reshape(arr.shape), scalar)


def qsd_quantile(model, p):
    """Smallest x with Q_A(x) = p, to |Q_A(x) - p| <= 1e-9."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    lo = model.A
    hi = 2.0 * model.A
    for _ in range(QUANTILE_MAX_DOUBLINGS):
        if qsd_cdf(model, hi) >= p:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise QsdError(f"quantile bracket did not close after {QUANTILE_MAX_DOUBLINGS} doublings")

    def g(t):
        return qsd_cdf(model, math.exp(t)) - p

    t = brentq(g, math.log(lo), math.log(hi), xtol=1e-15, rtol=4 * np.finfo(float).eps)
    x = math.exp(t)
    if abs(qsd_cdf(model, x) - p) > QUANTILE_TOL:
        raise QsdError(f"quantile did not reach tolerance for p = {p}")
    return x


# --- eigenfunction ----------------------------------------------------------

@dataclass(frozen=True)
class Eigenfunction:
    """phi(x, lambda) = x e^{1/x} {B1 M_{1,b}(2/x) + B2 W_{1,b}(2/x)}, b = xi/2."""

    lam: float
    xi: float
    B1: float
    B2: float

    def __call__(self, x):
        arr, scalar = _as_array(x)
        z = 2.0 / arr
        b = 0.5 * self.xi
        val = self.B1 * whittaker_M_values(1.0, b, z)
        if self.B2 != 0.0:
            val = val + self.B2 * whittaker_W_values(1.0, b, z)
        out = arr * np.exp(1.0 / arr) * val
        return _finish(np.asarray(out), scalar)


def model_eigenfunction(model):
    """Eigenfunction whose product with m(x) is proportional to the model pdf."""
    if model.form == "subcritical":
        return Eigenfunction(model.lam, model.xi, 1.0, 0.0)
    return Eigenfunction(model.lam, model.xi, model.w1A, -model.m1A)


def eigenfunction(model, x):
    """phi(x, lambda) with coefficients matching ``model``; needs x >= A."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < model.A):
        raise ValueError("eigenfunction is evaluated on x >= A only")
    return model_eigenfunction(model)(x)


def m_branch_eigenfunction(lam):
    """The M-only solution (B2 = 0) at an arbitrary lambda < 1/8."""
    return Eigenfunction(float(lam), xi_of_lambda(lam), 1.0, 0.0)


def truncated_norm(phi, A, X):
    """int_A^X m(x) phi(x)^2 dx, integrated in log x."""
    A, X = float(A), float(X)
    if X <= A:
        return 0.0

    def f(t):
        x = math.exp(t)
        return speed_measure(x) * phi(x) ** 2 * x

    edges = np.unique(np.concatenate(([math.log(A)], np.arange(math.ceil(math.log(A)), math.log(X), 1.0), [math.log(X)])))
    total = 0.0
    for lo, hi in zip(edges, edges[1:]):
        total += integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)[0]
    return total


def norm_increments(phi, A, decades=6):
    """Increments of the truncated norm over X = A*10^k, k = 1..decades."""
    marks = [float(A) * 10.0**k for k in range(decades + 1)]
    return [truncated_norm(phi, lo, hi) for lo, hi in zip(marks, marks[1:])]


# --- master equation --------------------------------------------------------

def master_equation_residual(model, x_grid, lam=None):
    """r(x) = (1/2)(x^2 q)'' - q' + lam q by 5-point central differences.

    ``model`` may be a QsdModel or any callable q(x) (then ``lam`` is
    required).  The step is h = max(1e-4, 1e-4 x).
    """
    if callable(model) and not isinstance(model, QsdModel):
        q = model
        if lam is None:
            raise ValueError("lam is required for a bare callable")
    else:
        q = model.pdf
        lam = model.lam if lam is None else lam
    x = np.asarray(x_grid, dtype=float)
    h = np.maximum(1e-4, 1e-4 * x)
    offsets = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    pts = x[:, None] + offsets[None, :] * h[:, None]
    qv = np.asarray(q(pts.ravel()), dtype=float).reshape(pts.shape)
    fv = pts**2 * qv
    d2 = (-fv[:, 0] + 16 * fv[:, 1] - 30 * fv[:, 2] + 16 * fv[:, 3] - fv[:, 4]) / (12 * h**2)
    d1 = (qv[:, 0] - 8 * qv[:, 1] + 8 * qv[:, 3] - qv[:, 4]) / (12 * h)
    return 0.5 * d2 - d1 + lam * qv[:, 2]


def tail_cutoff(model, eps=1e-10, x_max=1e300):
    """Smallest power-of-two multiple of A with 1 - Q_A(X) < eps, from the closed-form cdf."""
    X = 2.0 * model.A
    while 1.0 - qsd_cdf(model, X) >= eps:
        X *= 2.0
        if X > x_max:
            return math.inf
    return X
