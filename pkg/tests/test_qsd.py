import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shiryaev_qsd import oracle, qsd
from shiryaev_qsd.spectrum import principal_eigenvalue

# 40-digit mpmath evaluations of the closed forms, term by term
C_A2_XI0 = 1.4611411826611389323
PDF_A2_X3 = 0.032014090638896434317
CDF_A2_X3 = 0.019991129346479780467
PDF_A1_X2 = 0.091313322216272182431
CDF_A1_X2 = 0.064096647884515963497
FAMILY_PDF_A2_L006_X5 = 0.017722571913116815856


@pytest.fixture(scope="module")
def m1():
    return qsd.principal_model(1.0)


@pytest.fixture(scope="module")
def m2():
    return qsd.principal_model(2.0)


def test_speed_measure():
    assert qsd.speed_measure(2.0) == pytest.approx(0.5 * math.exp(-1), rel=1e-15)
    assert qsd.speed_measure(1.0) == pytest.approx(2 * math.exp(-2), rel=1e-15)
    for x in (0.5, 1.0, 3.0):
        assert x * math.log(2 / (x * x * qsd.speed_measure(x))) == pytest.approx(2.0, rel=1e-13)
    with pytest.raises(ValueError):
        qsd.speed_measure(0.0)
    assert np.all(qsd.speed_measure(np.geomspace(1e-2, 1e3, 50)) > 0)


def test_normalizer_values():
    assert qsd.normalizer(2.0, 0.0) == pytest.approx(C_A2_XI0, rel=1e-14)
    assert qsd.normalizer_unsimplified(2.0, 0.0) == pytest.approx(C_A2_XI0, rel=1e-13)
    with pytest.raises(ValueError):
        qsd.normalizer(1.0, 1.0)


def test_normalizer_positive_random():
    rng = np.random.default_rng(3)
    for A, xi in zip(rng.uniform(0.1, 10, 20), rng.uniform(0, 0.999, 20)):
        assert qsd.normalizer(A, xi) > 0


@given(st.floats(0.1, 20.0), st.floats(0.0, 0.999))
def test_normalizer_ratio_identity(A, xi):
    c = qsd.normalizer(A, xi)
    ratio = c * math.gamma(xi / 2 + 1) * 2**xi / ((xi + 1) * A * math.exp(1 / A))
    assert ratio == pytest.approx(math.sqrt(math.pi) / 4, rel=1e-14)


@given(st.floats(0.1, 10.0), st.floats(0.0, 0.99))
def test_normalizer_two_ways(A, xi):
    assert qsd.normalizer(A, xi) == pytest.approx(qsd.normalizer_unsimplified(A, xi), rel=1e-9)


def test_pdf_support_and_boundary(m1, m2):
    assert qsd.qsd_pdf(m1, 1.0) == 0.0
    assert qsd.qsd_pdf(m2, 1.5) == 0.0
    assert qsd.qsd_cdf(m2, 2.0) == 0.0


def test_pdf_reference_values(m1, m2):
    assert m2.form == "critical"
    assert qsd.qsd_pdf(m2, 3.0) == pytest.approx(PDF_A2_X3, rel=1e-12)
    assert qsd.qsd_cdf(m2, 3.0) == pytest.approx(CDF_A2_X3, rel=1e-12)
    assert m1.form == "subcritical"
    assert qsd.qsd_pdf(m1, 2.0) == pytest.approx(PDF_A1_X2, rel=1e-12)
    assert qsd.qsd_cdf(m1, 2.0) == pytest.approx(CDF_A1_X2, rel=1e-12)


def test_pdf_array_and_scalar(m1):
    xs = np.array([0.5, 1.0, 1.5, 4.0, 100.0])
    arr = qsd.qsd_pdf(m1, xs)
    assert arr.shape == xs.shape
    assert [qsd.qsd_pdf(m1, x) for x in xs] == pytest.approx(list(arr), rel=1e-13, abs=0)


def test_cdf_tail_is_power_law():
    # 1 - Q ~ x^{-(1+xi)/2} far out, so Q creeps to 1
    m = qsd.principal_model(1.0)
    assert qsd.qsd_cdf(m, 1e9) == pytest.approx(1.0, abs=1e-4)
    ratio = (1 - qsd.qsd_cdf(m, 1e10)) / (1 - qsd.qsd_cdf(m, 1e9))
    assert ratio == pytest.approx(10 ** (-(1 + m.xi) / 2), rel=1e-6)


def test_cdf_against_quadrature():
    m = qsd.principal_model(0.5)
    for x in np.linspace(0.51, 20.0, 50):
        q, _ = oracle.integrate_pdf(m, x)
        assert abs(q - qsd.qsd_cdf(m, x)) <= 1e-8


@pytest.mark.parametrize("A", [0.3, 1.0, 2.0, 5.0])
def test_cdf_derivative_is_pdf(A):
    m = qsd.principal_model(A)
    for x in A * np.array([1.2, 2.0, 5.0, 30.0]):
        h = 1e-5 * x
        d = (qsd.qsd_cdf(m, x + h) - qsd.qsd_cdf(m, x - h)) / (2 * h)
        assert d == pytest.approx(qsd.qsd_pdf(m, x), rel=1e-6)


@pytest.mark.parametrize("A", [0.1, 0.5, 1.0, 2.0, 5.0, 10.0])
def test_boundary_zero_and_positivity(A):
    m = qsd.principal_model(A)
    xs = A * np.geomspace(1 + 1e-6, 1e4 / A if A < 1 else 1e4, 300)
    q = m.pdf(xs)
    assert np.all(q > 0)
    val, _ = qsd._pdf_terms(m, np.array([A]))
    assert abs(val[0]) <= 1e-10 * q.max()


@pytest.mark.parametrize("A", [0.1, 0.5, 1.0, 1.2])
def test_reduced_form_matches_general(A):
    p = qsd.principal_model(A)
    g = qsd.general_model(A, p.lam)
    xs = A * np.geomspace(1.01, 1e3, 60)
    np.testing.assert_allclose(p.pdf(xs), g.pdf(xs), rtol=1e-9)
    np.testing.assert_allclose(p.cdf(xs), g.cdf(xs), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("A", [2.0, 5.0])
def test_edge_form_matches_general(A):
    p = qsd.principal_model(A)
    g = qsd.general_model(A, 0.125)
    xs = A * np.geomspace(1.01, 1e3, 60)
    np.testing.assert_allclose(p.pdf(xs), g.pdf(xs), rtol=1e-12)
    assert p.C == pytest.approx(g.C, rel=1e-14)


def test_quantile(m1):
    prev = m1.A
    for p in np.arange(0.1, 1.0, 0.1):
        x = qsd.qsd_quantile(m1, p)
        assert abs(qsd.qsd_cdf(m1, x) - p) <= 1e-9
        assert x > prev
        prev = x
    assert qsd.qsd_quantile(m1, 0.5) > 1.0
    with pytest.raises(ValueError):
        qsd.qsd_quantile(m1, 1.0)


def test_family_member():
    m = qsd.family_pdf(2.0, 0.06)
    assert m.family_flag and m.form == "general"
    total, _ = oracle.integrate_pdf(m)
    assert total == pytest.approx(1.0, abs=1e-6)
    assert all(qsd.qsd_pdf(m, x) > 0 for x in (2.5, 5.0, 50.0))
    assert qsd.qsd_pdf(m, 5.0) == pytest.approx(FAMILY_PDF_A2_L006_X5, rel=1e-12)
    # the slow tail: 1 - Q ~ x^{-(1-xi)/2}, so [A, 1e6] misses most of the mass
    assert 1 - qsd.qsd_cdf(m, 1e6) > 0.1


def test_family_rejects_edge():
    with pytest.raises(ValueError):
        qsd.family_pdf(2.0, 0.125)
    lam_A = principal_eigenvalue(1.0).lam
    with pytest.raises(ValueError):
        qsd.family_pdf(1.0, lam_A)


@pytest.mark.parametrize("lam", [0.03, 0.1])
def test_family_positive(lam):
    m = qsd.family_pdf(2.0, lam)
    assert np.all(m.pdf(2.0 * np.geomspace(1 + 1e-9, 1e12, 400)) > 0)


@pytest.mark.parametrize("maker", [lambda: qsd.principal_model(1.0), lambda: qsd.family_pdf(2.0, 0.06), lambda: qsd.principal_model(3.0)])
def test_density_proportional_to_m_phi(maker):
    m = maker()
    xs = np.array([m.A + 0.1, m.A + 1, m.A + 10])
    ratio = qsd.qsd_pdf(m, xs) / (qsd.speed_measure(xs) * qsd.eigenfunction(m, xs))
    assert np.ptp(ratio) <= 1e-9 * abs(ratio[0])


def test_eigenfunction_vanishes_at_A(m1):
    assert abs(qsd.eigenfunction(m1, 1.0)) < 1e-13
    with pytest.raises(ValueError):
        qsd.eigenfunction(m1, 0.5)


def test_norm_converges_for_principal(m1):
    inc = np.array(qsd.norm_increments(qsd.model_eigenfunction(m1), 1.0, 20))
    r = inc[1:] / inc[:-1]
    assert np.all(r[2:] < 1)
    # geometric decay at rate 10^{-xi}
    assert r[-1] == pytest.approx(10 ** -m1.xi, rel=1e-4)


def test_norm_diverges_with_w_branch():
    lam = principal_eigenvalue(1.0).lam - 1e-3
    inc = np.array(qsd.norm_increments(qsd.model_eigenfunction(qsd.family_pdf(1.0, lam)), 1.0, 30))
    r = inc[1:] / inc[:-1]
    assert np.all(np.diff(inc[-10:]) > 0)
    assert r[-1] > 1.5


def test_truncated_norm_additive(m1):
    phi = qsd.model_eigenfunction(m1)
    whole = qsd.truncated_norm(phi, 1.0, 1e3)
    parts = qsd.truncated_norm(phi, 1.0, 10.0) + qsd.truncated_norm(phi, 10.0, 1e3)
    assert whole == pytest.approx(parts, rel=1e-10)


def test_master_equation(m1):
    xs = np.linspace(1.1, 20.0, 100)
    r = qsd.master_equation_residual(m1, xs)
    assert np.max(np.abs(r)) <= 1e-6 * np.max(m1.pdf(xs))


def test_master_equation_family():
    m = qsd.family_pdf(2.0, 0.06)
    xs = np.linspace(2.2, 40.0, 100)
    r = qsd.master_equation_residual(m, xs)
    assert np.max(np.abs(r)) <= 1e-6 * np.max(m.pdf(xs))


def test_master_equation_zero_function():
    r = qsd.master_equation_residual(lambda x: np.zeros_like(x), [1.0, 2.0], lam=0.1)
    assert np.all(r == 0)
    with pytest.raises(ValueError):
        qsd.master_equation_residual(lambda x: x, [1.0])


def test_speed_measure_cannot_meet_boundary():
    # m solves the equation with lambda = 0, but never vanishes at A
    xs = np.linspace(1.5, 10.0, 30)
    r = qsd.master_equation_residual(qsd.speed_measure, xs, lam=0.0)
    assert np.max(np.abs(r)) <= 1e-6 * np.max(qsd.speed_measure(xs))
    for A in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0):
        assert qsd.speed_measure(A) > 0


def test_wrong_lambda_breaks_master_equation(m1):
    xs = np.linspace(1.1, 20.0, 50)
    r = qsd.master_equation_residual(m1, xs, lam=m1.lam + 1e-3)
    assert np.max(np.abs(r)) > 1e-5 * np.max(m1.pdf(xs))


def test_large_negative_density_raises(m1):
    bad = dataclasses.replace(m1, K=-m1.K)
    with pytest.raises(qsd.QsdError):
        qsd.qsd_pdf(bad, 2.0)


def test_cdf_out_of_range_raises(m1):
    bad = dataclasses.replace(m1, m0A=0.5 * m1.m0A)
    with pytest.raises(qsd.QsdError):
        qsd.qsd_cdf(bad, 1.5)


def test_injected_model_is_not_a_density(m1):
    bad = qsd.principal_model(1.0, lam_override=m1.lam - 1e-3)
    val, _ = qsd._pdf_terms(bad, np.array([1.0]))
    assert abs(val[0]) > 1e-3


def test_tail_cutoff(m2):
    X = qsd.tail_cutoff(m2, 1e-6)
    assert 1 - qsd.qsd_cdf(m2, X) < 1e-6
    assert 1 - qsd.qsd_cdf(m2, X / 2) >= 1e-6
