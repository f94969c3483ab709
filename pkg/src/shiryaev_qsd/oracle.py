"""Independent checks for the analytic modules.

Two kinds of reference are used:

* adaptive quadrature (``scipy.integrate.quad``) of the library's own pdf and
  Whittaker integrands, for integral statements;
* extended-precision series evaluated here in mpmath arithmetic (not through
  the fast kernels), for function values and the eigenvalue.

Failures are reported as data in a :class:`ValidationReport`, never raised.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from scipy import integrate

from . import qsd as _qsd
from .special import (
    whittaker_M,
    whittaker_M_bessel,
    whittaker_W,
    whittaker_W_bessel,
)
from .spectrum import LAMBDA_EDGE, principal_eigenvalue

MP_DPS = 60
SERIES_REL = mp.mpf("1e-30")

# tolerances, each tied to an acceptance target
TOL_BOUNDARY = 1e-10
TOL_NORMALIZATION = 1e-8
TOL_CDF = 1e-8
TOL_MASTER = 1e-6
TOL_FORMS = 1e-9
TOL_EIGEN = 1e-9
TOL_NORMALIZER = 1e-9
TOL_IDENTITY = 1e-9
TOL_INTEGRAL = 1e-8
TOL_KS = 0.02
TOL_RATE = 0.15


class IntegrationError(RuntimeError):
    pass


# --- quadrature -------------------------------------------------------------

def integrate_adaptive(f, lo, hi, tol=1e-9, limit=500):
    """Adaptive Gauss-Kronrod quadrature of f over [lo, hi]; returns (value, error)."""
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ValueError("need lo < hi")
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=limit)
        except integrate.IntegrationWarning as exc:
            raise IntegrationError(str(exc).splitlines()[0]) from None
    return val, err


def integrate_pdf(model, x_hi=math.inf, tol=1e-12):
    """int_A^x_hi q(y) dy by quadrature in u = 1/y on [1/x_hi, 1/A].

    The density has algebraic tails (x^{-1-(1-xi)/2} at worst), which become
    integrable endpoint singularities at u = 0 after the substitution.
    """
    u_lo = 0.0 if math.isinf(x_hi) else 1.0 / x_hi

    def g(u):
        return model.pdf(1.0 / u) / (u * u) if u > 0 else 0.0

    return integrate_adaptive(g, u_lo, 1.0 / model.A, tol=tol)


# --- extended-precision series ----------------------------------------------

def mp_kummer(alpha, beta, z, dps=MP_DPS):
    """M(alpha; beta; z) by direct series summation at ``dps`` digits."""
    with mp.workdps(dps):
        a, b, z = mp.mpf(alpha), mp.mpf(beta), mp.mpf(z)
        term = mp.mpf(1)
        total = mp.mpf(1)
        k = 0
        while True:
            term *= (a + k) / (b + k) * z / (k + 1)
            total += term
            k += 1
            if term == 0 or (k > z and abs(term) < SERIES_REL * abs(total)):
                return +total
            if k > 100000:
                raise RuntimeError("oracle series did not converge")


def _mp_log_u(a, n, z):
    # U(a; n+1; z) for integer n >= 0, logarithmic series
    s = mp.mpf(0)
    k = 0
    lz = mp.log(z)
    while True:
        coef = mp.rf(a, k) / (mp.rf(n + 1, k) * mp.factorial(k)) * z**k
        t = coef * (lz + mp.digamma(a + k) - mp.digamma(1 + k) - mp.digamma(n + k + 1))
        s += t
        k += 1
        if k > z and abs(t) < SERIES_REL * abs(s) and abs(coef) < SERIES_REL * abs(s):
            break
    out = (-1) ** (n + 1) / (mp.factorial(n) * mp.gamma(a - n)) * s
    for j in range(1, n + 1):
        out += mp.factorial(j - 1) * mp.rf(1 - a + j, n - j) / mp.factorial(n - j) * z ** (-j) / mp.gamma(a)
    return out


def mp_tricomi_u(alpha, beta, z, dps=MP_DPS):
    """U(alpha; beta; z) from the Kummer connection, or the log series for integer beta."""
    with mp.workdps(dps):
        a, b, z = mp.mpf(alpha), mp.mpf(beta), mp.mpf(z)
        if b == int(b) and b >= 1:
            return +_mp_log_u(a, int(b) - 1, z)
        c1 = mp.gamma(1 - b) * mp.rgamma(a - b + 1)
        c2 = mp.gamma(b - 1) * mp.rgamma(a)
        return +(c1 * mp_kummer(a, b, z, dps) + c2 * z ** (1 - b) * mp_kummer(a - b + 1, 2 - b, z, dps))


def mp_whittaker_M(a, b, z, dps=MP_DPS):
    with mp.workdps(dps):
        z = mp.mpf(z)
        b = mp.mpf(b)
        return +(mp.exp(-z / 2) * z ** (b + mp.mpf(1) / 2) * mp_kummer(b - a + mp.mpf(1) / 2, 1 + 2 * b, z, dps))


def mp_whittaker_W(a, b, z, dps=MP_DPS):
    with mp.workdps(dps):
        z = mp.mpf(z)
        b = abs(mp.mpf(b))
        return +(mp.exp(-z / 2) * z ** (b + mp.mpf(1) / 2) * mp_tricomi_u(b - a + mp.mpf(1) / 2, 1 + 2 * b, z, dps))


def mp_principal_eigenvalue(A, steps=60, dps=MP_DPS):
    """lambda_A by plain bisection on xi in (0, 1) against the extended-precision series.

    Returns (lambda, xi).  Only meaningful for A below the critical threshold,
    where M(xi/2 - 1/2; 1 + xi; 2/A) changes sign on (0, 1).
    """
    with mp.workdps(dps):
        z = 2 / mp.mpf(A)

        def f(xi):
            return mp_kummer(xi / 2 - mp.mpf(1) / 2, 1 + xi, z, dps)

        lo, hi = mp.mpf(0), mp.mpf(1)
        f_lo = f(lo)
        if f_lo * f(hi) > 0:
            raise ValueError("no sign change on (0, 1)")
        for _ in range(steps):
            mid = (lo + hi) / 2
            f_mid = f(mid)
            if f_mid * f_lo > 0:
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        xi = (lo + hi) / 2
        return float((1 - xi * xi) / 8), float(xi)


# --- identity checks ----------------------------------------------------------

def _rel_err(x, ref):
    ref = float(ref)
    return abs(float(x) - ref) / abs(ref) if ref != 0 else abs(float(x))


def connection_residual(a, b, z):
    """Relative gap between the library W_{a,b}(z) and its connection formula.

    For b > 0 the right side Gamma(-2b)/Gamma(1/2-b-a) M_{a,b} +
    Gamma(2b)/Gamma(1/2+b-a) M_{a,-b} is evaluated in extended precision
    (it cancels heavily for large z).  At b = 0 the formula degenerates and the
    library's logarithmic route is compared with the modified-Bessel route.
    """
    w = whittaker_W(a, b, z).value
    if b == 0:
        return _rel_err(w, whittaker_W_bessel(a, 0.0, z).value)
    with mp.workdps(MP_DPS):
        bb, aa = mp.mpf(b), mp.mpf(a)
        half = mp.mpf(1) / 2
        rhs = mp.gamma(-2 * bb) * mp.rgamma(half - bb - aa) * mp_whittaker_M(a, b, z) + mp.gamma(
            2 * bb
        ) * mp.rgamma(half + bb - aa) * mp_whittaker_M(a, -bb, z)
    return _rel_err(w, rhs)


def simplification_rhs(b, z):
    """z 2^{2b} Gamma(1+b) / (sqrt(pi) (b + 1/2))."""
    return z * 4.0**b * math.gamma(1.0 + b) / (math.sqrt(math.pi) * (b + 0.5))


def simplification_lhs(b, z, route="default"):
    if route == "bessel":
        m0, m1 = whittaker_M_bessel(0, b, z).value, whittaker_M_bessel(1, b, z).value
        w0, w1 = whittaker_W_bessel(0, b, z).value, whittaker_W_bessel(1, b, z).value
    else:
        m0, m1 = whittaker_M(0.0, b, z).value, whittaker_M(1.0, b, z).value
        w0, w1 = whittaker_W(0.0, b, z).value, whittaker_W(1.0, b, z).value
    return w0 * m1 + m0 * w1 / (b + 0.5)


def check_simplification_identity(b_grid, z_grid, route="default"):
    """Max relative residual of W_0 M_1 + M_0 W_1/(b+1/2) = z 2^{2b} Gamma(1+b)/(sqrt(pi)(b+1/2)).

    Returns (max residual, worst (b, z)).
    """
    worst, where = 0.0, None
    for b in b_grid:
        for z in z_grid:
            r = _rel_err(simplification_lhs(float(b), float(z), route), simplification_rhs(float(b), float(z)))
            if r >= worst:
                worst, where = r, (float(b), float(z))
    return worst, where


def check_connection_identity(b_grid, z_grid, a_values=(0.0, 1.0)):
    worst, where = 0.0, None
    for a in a_values:
        for b in b_grid:
            for z in z_grid:
                r = connection_residual(a, float(b), float(z))
                if r >= worst:
                    worst, where = r, (a, float(b), float(z))
    return worst, where


def check_normalizer_equivalence(A_grid, xi_grid):
    """Relative gap between the simplified and the unsimplified normalizer per (A, xi) cell."""
    cells = {}
    for A in A_grid:
        for xi in xi_grid:
            c1 = _qsd.normalizer(A, xi)
            c2 = _qsd.normalizer_unsimplified(A, xi)
            cells[(float(A), float(xi))] = abs(c1 - c2) / abs(c2)
    return cells


def check_gr_integrals(xi, A, x):
    """Residuals of the two Whittaker integral identities over s in [2/x, 2/A].

    int s^{-1} e^{-s/2} M_{1,b}(s) ds = [2/(xi+1) e^{-s/2} M_{0,b}(s)]
    int s^{-1} e^{-s/2} W_{1,b}(s) ds = [-e^{-s/2} W_{0,b}(s)]

    with b = xi/2.  The left sides are integrated numerically in log s.
    Returns a dict of relative residuals keyed "m_integral" and "w_integral".
    """
    xi, A, x = float(xi), float(A), float(x)
    if not x > A:
        raise ValueError("need x > A")
    b = 0.5 * xi
    s_lo, s_hi = 2.0 / x, 2.0 / A

    def m_int(s):
        return math.exp(-0.5 * s) * whittaker_M(1.0, b, s).value / s

    def w_int(s):
        return math.exp(-0.5 * s) * whittaker_W(1.0, b, s).value / s

    def m_prim(s):
        return 2.0 / (xi + 1.0) * math.exp(-0.5 * s) * whittaker_M(0.0, b, s).value

    def w_prim(s):
        return -math.exp(-0.5 * s) * whittaker_W(0.0, b, s).value

    out = {}
    for name, f, F in (("m_integral", m_int, m_prim), ("w_integral", w_int, w_prim)):
        # integrate in log s, the integrands are power-like at the small end
        val, _ = integrate_adaptive(lambda t: f(math.exp(t)) * math.exp(t), math.log(s_lo), math.log(s_hi), tol=1e-13)
        ref = F(s_hi) - F(s_lo)
        out[name] = abs(val - ref) / max(abs(ref), abs(F(s_hi)), abs(F(s_lo)))
    return out


# --- report -------------------------------------------------------------------

@dataclass
class Check:
    name: str
    residual: float
    tol: float
    passed: bool
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "residual": self.residual, "tol": self.tol, "pass": self.passed}


@dataclass
class ValidationReport:
    A: float
    checks: list = field(default_factory=list)

    def add(self, name, residual, tol, detail=""):
        residual = float(residual)
        ok = bool(np.isfinite(residual) and residual <= tol)
        self.checks.append(Check(name, residual, float(tol), ok, detail))

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def worst_offender(self):
        if not self.checks:
            return None

        def score(c):
            if not np.isfinite(c.residual):
                return math.inf
            if c.tol == 0:
                return math.inf if c.residual > 0 else 0.0
            return c.residual / c.tol

        return max(self.checks, key=score).name

    def as_dict(self):
        return {
            "A": self.A,
            "checks": [c.as_dict() for c in self.checks],
            "worst_offender": self.worst_offender,
            "pass": self.passed,
        }

    def to_json(self, **kw):
        return json.dumps(self.as_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        rep = cls(d["A"])
        for c in d["checks"]:
            rep.checks.append(Check(c["name"], c["residual"], c["tol"], c["pass"]))
        return rep


def _guard(report, name, tol, fn):
    try:
        residual, detail = fn()
    except Exception as exc:  # failures are data here
        report.add(name, math.inf, tol, f"{type(exc).__name__}: {exc}")
        return
    report.add(name, residual, tol, detail)


def _pdf_at_boundary(model):
    # the closed form evaluated at x = A itself, bypassing the support indicator
    val, scale = _qsd._pdf_terms(model, np.array([model.A]))
    return float(val[0])


def _peak(model):
    xs = model.A * np.geomspace(1.0 + 1e-6, 1e3, 600)
    return float(np.max(np.abs(model.pdf(xs))))


def run_suite(A, lam_override=None, include_mc=False, mc_config=None):
    """Run every analytic check at kill level A and collect a report.

    ``lam_override`` builds the reduced closed form with a wrong lambda (fault
    injection).  ``include_mc`` adds the Monte-Carlo checks, with
    ``mc_config`` a :class:`~shiryaev_qsd.sde.SimConfig` (default: x0 = 2A,
    dt = 1e-3, horizon 40, 200000 paths, seed 7).
    """
    A = float(A)
    rep = ValidationReport(A)
    model = _qsd.principal_model(A, lam_override=lam_override)
    sp = principal_eigenvalue(A)
    peak = _peak(model)
    b = model.b

    _guard(rep, "boundary_zero", TOL_BOUNDARY, lambda: (abs(_pdf_at_boundary(model)) / peak, ""))

    def norm():
        val, err = integrate_pdf(model)
        return abs(val - 1.0), f"quadrature error {err:.2e}"

    _guard(rep, "normalization", TOL_NORMALIZATION, norm)

    def cdf_pdf():
        xs = A * np.geomspace(1.001, 200.0, 50)
        diffs = [abs(integrate_pdf(model, x)[0] - model.cdf(x)) for x in xs]
        return max(diffs), ""

    _guard(rep, "cdf_vs_quadrature", TOL_CDF, cdf_pdf)

    def master():
        xs = A * np.geomspace(1.05, 50.0, 100)
        r = _qsd.master_equation_residual(model, xs)
        return float(np.max(np.abs(r))) / peak, ""

    _guard(rep, "master_equation", TOL_MASTER, master)

    def forms():
        gen = _qsd.general_model(A, model.lam)
        xs = A * np.geomspace(1.01, 1e3, 80)
        p, g = model.pdf(xs), gen.pdf(xs)
        rp = float(np.max(np.abs(p - g) / np.abs(g)))
        rc = float(np.max(np.abs(model.cdf(xs) - gen.cdf(xs))))
        return max(rp, rc), f"pdf {rp:.2e}, cdf {rc:.2e}"

    _guard(rep, "closed_form_vs_general", TOL_FORMS, forms)

    if model.lam < LAMBDA_EDGE:
        _guard(rep, "eigen_equation", TOL_EIGEN, lambda: (abs(model.m1A), ""))
    else:
        _guard(rep, "eigen_equation", TOL_EIGEN, lambda: (abs(model.lam - sp.lam), "edge value"))

    def normalizer():
        cells = check_normalizer_equivalence([A], [model.xi])
        return max(cells.values()), ""

    _guard(rep, "normalizer_equivalence", TOL_NORMALIZER, normalizer)

    def integrals(key):
        return check_gr_integrals(model.xi, A, 4.0 * A)[key], ""

    _guard(rep, "m_integral_identity", TOL_INTEGRAL, lambda: integrals("m_integral"))
    _guard(rep, "w_integral_identity", TOL_INTEGRAL, lambda: integrals("w_integral"))

    zs = [2.0 / A, 0.5 / A, 2.0]
    _guard(rep, "simplification_identity", TOL_IDENTITY, lambda: (check_simplification_identity([b], zs)[0], ""))
    _guard(rep, "connection_identity", TOL_IDENTITY, lambda: (check_connection_identity([b], zs)[0], ""))

    def positivity():
        xs = A * np.geomspace(1.0 + 1e-6, 1e4 / A if A < 1 else 1e4, 300)
        q = model.pdf(xs)
        return float(np.count_nonzero(q <= 0)), "nonpositive grid points"

    _guard(rep, "positivity", 0.0, positivity)

    if include_mc:
        _mc_checks(rep, model, sp, mc_config)
    return rep


def _mc_checks(rep, model, sp, cfg):
    from . import sde

    if cfg is None:
        cfg = sde.SimConfig(A=model.A, x0=2.0 * model.A, dt=1e-3, horizon=40.0, n_paths=200000, seed=7)
    try:
        ens = sde.simulate(cfg)
    except Exception as exc:
        rep.add("mc_ks_distance", math.inf, TOL_KS, f"{type(exc).__name__}: {exc}")
        rep.add("mc_kill_rate", math.inf, TOL_RATE, f"{type(exc).__name__}: {exc}")
        return
    _guard(rep, "mc_ks_distance", TOL_KS, lambda: (sde.ks_distance(ens, model), f"{ens.n_survivors} survivors"))
    _guard(
        rep, "mc_kill_rate", TOL_RATE,
        lambda: (abs(sde.estimate_kill_rate(ens) / sp.lam - 1.0), "relative gap to lambda_A"),
    )


__all__ = [
    "Check",
    "IntegrationError",
    "ValidationReport",
    "check_connection_identity",
    "check_gr_integrals",
    "check_normalizer_equivalence",
    "check_simplification_identity",
    "connection_residual",
    "integrate_adaptive",
    "integrate_pdf",
    "mp_kummer",
    "mp_principal_eigenvalue",
    "mp_tricomi_u",
    "mp_whittaker_M",
    "mp_whittaker_W",
    "run_suite",
    "simplification_lhs",
    "simplification_rhs",
]
