"""Gamma, Kummer M, Tricomi U and the Whittaker functions M_{a,b}, W_{a,b}.

Only real arguments are supported, tuned for the indices that appear in the
quasi-stationary problem: a in {0, 1}, b = xi/2 in [0, 1/2) and z = 2/x in
(0, ~40].  Every evaluation returns an :class:`EvalResult` carrying its own
relative error estimate.

Routing for Tricomi U(alpha; beta; z):

* z > 30        large-z asymptotic series ("asymptotic")
* 1 <= z <= 30  generalized Gauss-Laguerre quadrature of the Laplace integral,
                shifted to a positive first parameter by one contiguous
                recurrence when needed ("laguerre")
* z < 1         two-term Kummer combination for non-integer beta ("series"),
                logarithmic series for integer beta ("log-case"), and an even
                interpolation in b between the two when beta is within 1e-4
                of 1, or a quartic through the log case when beta is that
                close to another integer ("log-case")
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as sps

from ._backend import kernels

EPS = 2.220446049250313e-16
EULER_GAMMA = 0.5772156649015329

LAGUERRE_Z_MIN = 1.0
ASYMPTOTIC_Z_MIN = 30.0
NEAR_INTEGER_BETA = 1e-4
CANCELLATION_DIGITS = 6.0


class SpecialFunctionError(ArithmeticError):
    """Base class for special-function failures."""


class PoleError(SpecialFunctionError):
    """Argument sits on a pole of the function."""


class ConvergenceError(SpecialFunctionError):
    """A series or expansion failed to reach its accuracy target."""


class CancellationWarning(RuntimeWarning):
    """A two-term combination lost more than six significant digits."""


@dataclass(frozen=True)
class WhittakerParams:
    a: float
    b: float
    z: float

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError(f"Whittaker argument must be positive, got z={self.z}")
        if not 1.0 + 2.0 * self.b > 0:
            raise ValueError(f"need 1 + 2b > 0, got b={self.b}")


@dataclass(frozen=True)
class EvalResult:
    value: float
    est_rel_error: float
    method: str

    def __float__(self):
        return self.value


def _is_nonpositive_int(x):
    return x <= 0 and x == math.floor(x)


def gamma(x):
    """Gamma function on the real line (stdlib Lanczos, ~1e-15 relative)."""
    if _is_nonpositive_int(x):
        raise PoleError(f"Gamma has a pole at {x}")
    return math.gamma(x)


def rgamma(x):
    """1/Gamma(x), zero at the poles."""
    if _is_nonpositive_int(x):
        return 0.0
    return 1.0 / math.gamma(x)


def _gamma_cond(x):
    """Relative error of Gamma(x) from one rounding of x, near poles included."""
    if x > 0.5:
        return 8 * EPS
    d = abs(x - round(x))
    return EPS * (8.0 + abs(x) / max(d, EPS))


def _rel(abs_err, value):
    if value == 0.0:
        return 1.0 if abs_err > 0 else 0.0
    return abs_err / abs(value)


def kummer_m(alpha, beta, z):
    """Kummer's function M(alpha; beta; z) = 1F1 by its power series."""
    if _is_nonpositive_int(beta):
        raise PoleError(f"Kummer M undefined for beta={beta}")
    if z < 0:
        raise ValueError(f"kummer_m needs z >= 0, got {z}")
    if z == 0 or alpha == 0:
        return EvalResult(1.0, 0.0, "series")
    value, abs_sum, n = kernels.kummer_series(float(alpha), float(beta), float(z))
    if n < 0:
        raise ConvergenceError(f"M({alpha}; {beta}; {z}) series did not converge")
    # each term carries ~k rounding steps from the running product
    err = EPS * (n + 2) * abs_sum
    return EvalResult(value, min(_rel(err, value), 1.0), "series")


def _two_term(alpha, beta, z):
    m1 = kummer_m(alpha, beta, z)
    m2 = kummer_m(alpha - beta + 1.0, 2.0 - beta, z)
    c1 = gamma(1.0 - beta) * rgamma(alpha - beta + 1.0)
    c2 = gamma(beta - 1.0) * rgamma(alpha) * z ** (1.0 - beta)
    t1, t2 = c1 * m1.value, c2 * m2.value
    value = t1 + t2
    scale = abs(t1) + abs(t2)
    e1 = m1.est_rel_error + _gamma_cond(1.0 - beta) + _gamma_cond(alpha - beta + 1.0)
    e2 = m2.est_rel_error + _gamma_cond(beta - 1.0) + _gamma_cond(alpha)
    err = abs(t1) * e1 + abs(t2) * e2
    if value != 0.0 and scale / abs(value) > 10.0 ** CANCELLATION_DIGITS:
        warnings.warn(
            f"U({alpha}; {beta}; {z}): two-term combination lost "
            f"{math.log10(scale / abs(value)):.1f} digits",
            CancellationWarning,
            stacklevel=3,
        )
    return EvalResult(value, _rel(err, value), "series")


def _log_case(alpha, n, z):
    """U(alpha; n+1; z) for integer n >= 0."""
    if _is_nonpositive_int(alpha):
        return tricomi_u(alpha, n + 1.0, z)
    a = alpha
    finite = 0.0
    if n > 0:
        ra = rgamma(a)
        for k in range(1, n + 1):
            poch = 1.0
            for j in range(n - k):
                poch *= 1.0 - a + k + j
            finite += math.factorial(k - 1) * poch / math.factorial(n - k) * z ** (-k)
        finite *= ra
    lead = (-1.0) ** (n + 1) * rgamma(a - n) / math.factorial(n)
    if lead == 0.0:
        return EvalResult(finite, 4 * n * EPS, "log-case")
    psi_a = float(sps.digamma(a))
    psi_1 = -EULER_GAMMA
    psi_n1 = -EULER_GAMMA + sum(1.0 / j for j in range(1, n + 1))
    if n == 0:
        s, s_abs, nt = kernels.tricomi_log_series(a, z, psi_a, psi_1)
    else:
        s, s_abs, nt = _log_series_general(a, n, z, psi_a, psi_1, psi_n1)
    if nt < 0:
        raise ConvergenceError(f"log-case series for U({alpha}; {n + 1}; {z}) did not converge")
    value = lead * s + finite
    err = EPS * (nt + 4) * abs(lead) * s_abs + 4 * EPS * abs(finite)
    return EvalResult(value, _rel(err, value), "log-case")


def _log_series_general(a, n, z, psi_a, psi_1, psi_n1):
    lz = math.log(z)
    coef = 1.0
    pa, p1, pn = psi_a, psi_1, psi_n1
    term = lz + pa - p1 - pn
    total, total_abs = term, abs(term)
    for k in range(5000):
        coef *= (a + k) / ((n + 1.0 + k) * (k + 1.0)) * z
        pa += 1.0 / (a + k)
        p1 += 1.0 / (k + 1.0)
        pn += 1.0 / (n + 1.0 + k)
        term = coef * (lz + pa - p1 - pn)
        total += term
        total_abs += abs(term)
        if coef == 0.0 or (k + 1 > z and abs(term) <= 0.5 * EPS * abs(total)):
            return total, total_abs, k + 1
    return total, total_abs, -1


def _near_one_beta(alpha, beta, z):
    """Even interpolation in b = (beta-1)/2 across the beta = 1 removable pole.

    g(b) = z^b U(b - kappa + 1/2; 1 + 2b; z) is even and analytic in b for fixed
    kappa = beta/2 - alpha, so it is interpolated as a polynomial in b^2
    through b = 0 (log-case) and b = b_s, 2 b_s (two-term).  The gap between
    the linear and quadratic fits in b^2 serves as the truncation estimate.
    """
    b = 0.5 * (beta - 1.0)
    kappa = 0.5 * beta - alpha
    b_s = 0.5 * NEAR_INTEGER_BETA
    g0 = _log_case(0.5 - kappa, 0, z)
    u1 = _two_term(b_s - kappa + 0.5, 1.0 + 2.0 * b_s, z)
    u2 = _two_term(2.0 * b_s - kappa + 0.5, 1.0 + 4.0 * b_s, z)
    g1 = z ** b_s * u1.value
    g2 = z ** (2.0 * b_s) * u2.value
    s = (b / b_s) ** 2
    linear = g0.value + s * (g1 - g0.value)
    # Newton form on nodes s = 0, 1, 4
    c2 = ((g2 - g0.value) / 4.0 - (g1 - g0.value)) / 3.0
    quad = linear + c2 * s * (s - 1.0)
    value = z ** (-b) * quad
    err = abs(g0.value) * g0.est_rel_error + abs(g1) * u1.est_rel_error + abs(g2) * u2.est_rel_error
    err = z ** (-b) * (3.0 * err + abs(quad - linear)) + 4 * EPS * abs(value)
    return EvalResult(value, _rel(err, value), "log-case")


def _near_integer_beta(alpha, beta, z, n):
    """Interpolation in b across the removable pole at beta = n + 1, n >= 1.

    Moves along the fixed-kappa line alpha = b - kappa + 1/2, beta = 1 + 2b
    through the log-case value at beta = n + 1 and two-term values at
    +-h, +-2h.  The quartic fit is returned; its gap to the quadratic fit is
    the truncation estimate.
    """
    kappa = 0.5 * beta - alpha
    b0 = 0.5 * n
    h = 0.5 * NEAR_INTEGER_BETA
    t = (0.5 * (beta - 1.0) - b0) / h
    f0 = _log_case(b0 - kappa + 0.5, n, z)
    side = {}
    for j in (-2, -1, 1, 2):
        bj = b0 + j * h
        side[j] = _two_term(bj - kappa + 0.5, 1.0 + 2.0 * bj, z)
    fm2, fm1, fp1, fp2 = (side[j].value for j in (-2, -1, 1, 2))
    v0 = f0.value
    d1 = (fp1 - fm1) / 2.0
    d2 = fp1 - 2.0 * v0 + fm1
    quad = v0 + t * d1 + 0.5 * t * t * d2
    # five-point Lagrange on nodes -2..2 (in units of h)
    nodes = (-2.0, -1.0, 0.0, 1.0, 2.0)
    vals = (fm2, fm1, v0, fp1, fp2)
    quart = 0.0
    for i, (xi_, yi) in enumerate(zip(nodes, vals)):
        w = 1.0
        for j, xj in enumerate(nodes):
            if j != i:
                w *= (t - xj) / (xi_ - xj)
        quart += w * yi
    amp = max(abs(v) * r.est_rel_error for v, r in zip((fm2, fm1, fp1, fp2), side.values()))
    err = 8.0 * amp + abs(v0) * f0.est_rel_error * 2.0 + abs(quart - quad) + 4 * EPS * abs(quart)
    return EvalResult(quart, _rel(err, quart), "log-case")


@lru_cache(maxsize=128)
def _laguerre_rule(alpha, n):
    nodes, weights = sps.roots_genlaguerre(n, alpha - 1.0)
    return nodes, weights


def _laguerre_positive(alpha, beta, z, n):
    nodes, weights = _laguerre_rule(alpha, n)
    s = float(np.dot(weights, (1.0 + nodes / z) ** (beta - alpha - 1.0)))
    return z ** (-alpha) * s * rgamma(alpha)


def _laguerre(alpha, beta, z):
    def pos(a):
        hi = _laguerre_positive(a, beta, z, 100)
        lo = _laguerre_positive(a, beta, z, 64)
        return hi, abs(hi - lo) + 20 * EPS * abs(hi)

    if alpha > 0:
        v, e = pos(alpha)
        return EvalResult(v, _rel(e, v), "laguerre")
    if alpha <= -1.0:
        raise ValueError("laguerre route supports alpha > -1 only")
    # U(a-1) = (z + 2a - beta) U(a) - a (a - beta + 1) U(a+1), a = alpha + 1
    a = alpha + 1.0
    u1, e1 = pos(a)
    u2, e2 = pos(a + 1.0)
    t1 = (z + 2.0 * a - beta) * u1
    t2 = -a * (a - beta + 1.0) * u2
    v = t1 + t2
    e = abs(t1) * (_rel(e1, u1) + 4 * EPS) + abs(t2) * (_rel(e2, u2) + 4 * EPS)
    return EvalResult(v, _rel(e, v), "laguerre")


def _asymptotic(alpha, beta, z):
    """U ~ z^-alpha sum_k (alpha)_k (alpha-beta+1)_k / k! (-z)^-k."""
    term = 1.0
    total = 1.0
    smallest = 1.0
    for k in range(200):
        nxt = term * (alpha + k) * (alpha - beta + 1.0 + k) / (k + 1.0) * (-1.0 / z)
        if abs(nxt) > abs(term) and k > 0:
            break
        term = nxt
        total += term
        smallest = abs(term)
        if term == 0.0 or smallest <= 0.5 * EPS * abs(total):
            break
    value = z ** (-alpha) * total
    est = _rel(smallest, total) + (k + 2) * EPS
    return EvalResult(value, est, "asymptotic")


def tricomi_u(alpha, beta, z):
    """Tricomi's confluent hypergeometric function U(alpha; beta; z), z > 0."""
    if not z > 0:
        raise ValueError(f"tricomi_u needs z > 0, got {z}")
    alpha, beta, z = float(alpha), float(beta), float(z)
    if _is_nonpositive_int(alpha):
        # terminating case: U(-n; beta; z) = (-1)^n (beta)_n M(-n; beta; z)
        n = int(-alpha)
        poch = 1.0
        for j in range(n):
            poch *= beta + j
        if _is_nonpositive_int(beta) and poch == 0.0:
            raise PoleError(f"U({alpha}; {beta}; {z}) needs the limiting form")
        m = kummer_m(alpha, beta, z) if not _is_nonpositive_int(beta) else None
        if m is None:
            raise PoleError(f"U({alpha}; {beta}; {z}) with nonpositive integer beta")
        return EvalResult((-1.0) ** n * poch * m.value, m.est_rel_error + n * EPS, "series")
    if z > ASYMPTOTIC_Z_MIN:
        res = _asymptotic(alpha, beta, z)
        if res.est_rel_error <= 1e-12:
            return res
    if z >= LAGUERRE_Z_MIN and alpha > -1.0:
        return _laguerre(alpha, beta, z)
    if z >= LAGUERRE_Z_MIN and alpha <= -1.0:
        # lift alpha into (-1, 0] with the same contiguous recurrence, repeatedly
        return _lift_alpha(alpha, beta, z)
    nearest = round(beta)
    if beta == nearest:
        if nearest < 1:
            # Kummer transformation U(a;b;z) = z^(1-b) U(a-b+1; 2-b; z)
            inner = tricomi_u(alpha - beta + 1.0, 2.0 - beta, z)
            return EvalResult(z ** (1.0 - beta) * inner.value, inner.est_rel_error + 4 * EPS, inner.method)
        return _log_case(alpha, int(nearest) - 1, z)
    if abs(beta - nearest) < NEAR_INTEGER_BETA:
        if nearest == 1:
            return _near_one_beta(alpha, beta, z)
        if nearest > 1:
            return _near_integer_beta(alpha, beta, z, int(nearest) - 1)
    return _two_term(alpha, beta, z)


def _lift_alpha(alpha, beta, z):
    # walk U(a-1) = (z + 2a - beta) U(a) - a (a - beta + 1) U(a+1) down from
    # two positive-parameter anchors at the fractional part of alpha
    a = alpha - math.floor(alpha)
    mid = _laguerre(a, beta, z)
    hi = _laguerre(a + 1.0, beta, z)
    err = max(mid.est_rel_error, hi.est_rel_error)
    u_mid, u_hi = mid.value, hi.value
    while a - 1.0 >= alpha - 1e-9:
        low = (z + 2.0 * a - beta) * u_mid - a * (a - beta + 1.0) * u_hi
        u_hi, u_mid = u_mid, low
        a -= 1.0
        err += 4 * EPS
    return EvalResult(u_mid, err, "laguerre")


def whittaker_M(p, b=None, z=None):
    """Whittaker M_{a,b}(z) = e^{-z/2} z^{b+1/2} M(b-a+1/2; 1+2b; z).

    Accepts a :class:`WhittakerParams` or the three numbers ``(a, b, z)``.
    Negative b with 1 + 2b > 0 is allowed; it gives the second solution
    M_{a,-|b|} that appears in the connection formula.
    """
    p = _params(p, b, z)
    k = kummer_m(p.b - p.a + 0.5, 1.0 + 2.0 * p.b, p.z)
    pref = math.exp(-0.5 * p.z) * p.z ** (p.b + 0.5)
    return EvalResult(pref * k.value, k.est_rel_error + 4 * EPS, k.method)


def whittaker_W(p, b=None, z=None):
    """Whittaker W_{a,b}(z) = e^{-z/2} z^{b+1/2} U(b-a+1/2; 1+2b; z).

    W is even in b, so the sign of b is dropped first.
    """
    p = _params(p, b, z)
    bb = abs(p.b)
    u = tricomi_u(bb - p.a + 0.5, 1.0 + 2.0 * bb, p.z)
    pref = math.exp(-0.5 * p.z) * p.z ** (bb + 0.5)
    return EvalResult(pref * u.value, u.est_rel_error + 4 * EPS, u.method)


# --- vectorized values (no error estimates) --------------------------------

def kummer_m_values(alpha, beta, z):
    """M(alpha; beta; z) over an array of z >= 0, same series as :func:`kummer_m`."""
    z = np.ascontiguousarray(z, dtype=float)
    if _is_nonpositive_int(beta):
        raise PoleError(f"Kummer M undefined for beta={beta}")
    if np.any(z < 0):
        raise ValueError("kummer_m_values needs z >= 0")
    if alpha == 0:
        return np.ones_like(z)
    out, bad = kernels.kummer_series_array(float(alpha), float(beta), z.ravel())
    if bad:
        raise ConvergenceError(f"M({alpha}; {beta}; z) series did not converge")
    return out.reshape(z.shape)


def _laguerre_values(alpha, beta, z, n=100):
    def pos(a):
        nodes, weights = _laguerre_rule(a, n)
        f = (1.0 + nodes[:, None] / z[None, :]) ** (beta - a - 1.0)
        return z ** (-a) * (weights @ f) * rgamma(a)

    if alpha > 0:
        return pos(alpha)
    a = alpha + 1.0
    return (z + 2.0 * a - beta) * pos(a) - a * (a - beta + 1.0) * pos(a + 1.0)


def _log_case_values(alpha, z):
    lead = -rgamma(alpha)
    if lead == 0.0:
        return np.zeros_like(z)
    s, bad = kernels.tricomi_log_series_array(alpha, z, float(sps.digamma(alpha)), -EULER_GAMMA)
    if bad:
        raise ConvergenceError(f"log-case series for U({alpha}; 1; z) did not converge")
    return lead * s


def _two_term_values(alpha, beta, z):
    c1 = gamma(1.0 - beta) * rgamma(alpha - beta + 1.0)
    c2 = gamma(beta - 1.0) * rgamma(alpha)
    return c1 * kummer_m_values(alpha, beta, z) + c2 * z ** (1.0 - beta) * kummer_m_values(
        alpha - beta + 1.0, 2.0 - beta, z
    )


def tricomi_u_values(alpha, beta, z):
    """U(alpha; beta; z) over an array of z > 0, routed like :func:`tricomi_u`."""
    alpha, beta = float(alpha), float(beta)
    z = np.ascontiguousarray(z, dtype=float)
    shape = z.shape
    z = z.ravel()
    if np.any(z <= 0):
        raise ValueError("tricomi_u_values needs z > 0")
    out = np.empty_like(z)
    small = z < LAGUERRE_Z_MIN
    mid = (z >= LAGUERRE_Z_MIN) & (z <= ASYMPTOTIC_Z_MIN)
    scalar = z > ASYMPTOTIC_Z_MIN
    simple_small = (
        not _is_nonpositive_int(alpha)
        and (abs(beta - 1.0) < NEAR_INTEGER_BETA or abs(beta - round(beta)) >= NEAR_INTEGER_BETA)
    )
    if not simple_small:
        scalar |= small
    if alpha <= -1.0 or _is_nonpositive_int(alpha):
        scalar |= mid
    elif mid.any():
        out[mid] = _laguerre_values(alpha, beta, z[mid])
    if simple_small and small.any():
        zs = z[small]
        if beta == 1.0:
            out[small] = _log_case_values(alpha, zs)
        elif abs(beta - 1.0) < NEAR_INTEGER_BETA:
            b = 0.5 * (beta - 1.0)
            kappa = 0.5 * beta - alpha
            b_s = 0.5 * NEAR_INTEGER_BETA
            g0 = _log_case_values(0.5 - kappa, zs)
            g1 = zs ** b_s * _two_term_values(b_s - kappa + 0.5, 1.0 + 2.0 * b_s, zs)
            g2 = zs ** (2.0 * b_s) * _two_term_values(2.0 * b_s - kappa + 0.5, 1.0 + 4.0 * b_s, zs)
            s = (b / b_s) ** 2
            c2 = ((g2 - g0) / 4.0 - (g1 - g0)) / 3.0
            out[small] = zs ** (-b) * (g0 + s * (g1 - g0) + c2 * s * (s - 1.0))
        else:
            out[small] = _two_term_values(alpha, beta, zs)
    for i in np.flatnonzero(scalar):
        out[i] = tricomi_u(alpha, beta, z[i]).value
    return out.reshape(shape)


def whittaker_M_values(a, b, z):
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0) or not 1.0 + 2.0 * b > 0:
        raise ValueError("whittaker_M_values needs z > 0 and 1 + 2b > 0")
    return np.exp(-0.5 * z) * z ** (b + 0.5) * kummer_m_values(b - a + 0.5, 1.0 + 2.0 * b, z)


def whittaker_W_values(a, b, z):
    z = np.asarray(z, dtype=float)
    b = abs(b)
    return np.exp(-0.5 * z) * z ** (b + 0.5) * tricomi_u_values(b - a + 0.5, 1.0 + 2.0 * b, z)


def _params(p, b, z):
    if isinstance(p, WhittakerParams):
        return p
    return WhittakerParams(float(p), float(b), float(z))


# --- modified-Bessel route (second path, a in {0, 1}) -----------------------

def whittaker_M_bessel(a, b, z):
    """M_{0,b}(z) = 4^b Gamma(1+b) sqrt(z) I_b(z/2); M_{1,b} by the kappa-recurrence.

    z M'_{0,b} = (z/2) M_{0,b} + (1/2 + b) M_{1,b}.
    """
    if a not in (0, 1):
        raise ValueError("Bessel route covers a in {0, 1} only")
    h = 0.5 * z
    c = 4.0 ** b * gamma(1.0 + b)
    ib = float(sps.iv(b, h))
    m0 = c * math.sqrt(z) * ib
    if a == 0:
        return EvalResult(m0, 1e-14, "bessel-route")
    dib = float(sps.iv(b + 1.0, h)) + (b / h) * ib
    dm0 = c * (ib / (2.0 * math.sqrt(z)) + 0.5 * math.sqrt(z) * dib)
    m1 = (z * dm0 - h * m0) / (0.5 + b)
    scale = (abs(z * dm0) + abs(h * m0)) / (0.5 + b)
    return EvalResult(m1, _rel(1e-14 * scale, m1), "bessel-route")


def whittaker_W_bessel(a, b, z):
    """W_{0,b}(z) = sqrt(z/pi) K_b(z/2); W_{1,b} = (z/2) W_{0,b} - z W'_{0,b}."""
    if a not in (0, 1):
        raise ValueError("Bessel route covers a in {0, 1} only")
    b = abs(b)
    h = 0.5 * z
    kb = float(sps.kv(b, h))
    w0 = math.sqrt(z / math.pi) * kb
    if a == 0:
        return EvalResult(w0, 1e-14, "bessel-route")
    dkb = -float(sps.kv(b + 1.0, h)) + (b / h) * kb
    dw0 = (kb / (2.0 * math.sqrt(z)) + 0.5 * math.sqrt(z) * dkb) / math.sqrt(math.pi)
    w1 = h * w0 - z * dw0
    scale = abs(h * w0) + abs(z * dw0)
    return EvalResult(w1, _rel(1e-14 * scale, w1), "bessel-route")
