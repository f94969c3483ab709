import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiryaev_qsd import _backend, qsd, sde


def _cfg(**kw):
    base = dict(A=1.0, x0=2.0, dt=1e-2, horizon=1.0, n_paths=500, seed=3)
    base.update(kw)
    return sde.SimConfig(**base)


@pytest.mark.parametrize(
    "kw",
    [
        dict(A=0.0),
        dict(A=-1.0),
        dict(x0=1.0),
        dict(x0=0.5),
        dict(dt=0.0),
        dict(dt=2.0),
        dict(horizon=-1.0),
        dict(n_paths=0),
        dict(n_paths=2.5),
        dict(seed=-1),
        dict(n_bins=0),
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        _cfg(**kw)


def test_config_defaults():
    c = sde.SimConfig(A=2.0)
    assert c.x0 == 3.0
    assert c.n_steps == 1000
    assert c.total_steps == 1000 * 1000
    # without killing the start may sit below A
    assert sde.SimConfig(A=2.0, x0=1.0, kill=False).x0 == 1.0


def test_single_step_by_hand():
    cfg = _cfg(dt=0.25, horizon=0.25, n_paths=4, seed=11, n_bins=1)
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(11).spawn(1)[0]))
    z = gen.standard_normal(4)
    x1 = 2.0 + 0.25 + 2.0 * 0.5 * z
    expected = x1[x1 > 1.0]
    for backend in ("python", "cython") if _backend.compiled_kernels else ("python",):
        ens = sde.simulate(cfg, backend=backend)
        np.testing.assert_array_equal(ens.survivor_values, expected)
        assert ens.n_killed == 4 - expected.size
        assert ens.survival_counts.tolist() == [expected.size]


def test_deterministic_for_seed():
    a = sde.simulate(_cfg(n_paths=9000))
    b = sde.simulate(_cfg(n_paths=9000))
    np.testing.assert_array_equal(a.survivor_values, b.survivor_values)
    c = sde.simulate(_cfg(n_paths=9000, seed=4))
    assert not np.array_equal(a.survivor_values, c.survivor_values)


@pytest.mark.parametrize("workers", [1, 2, 5])
def test_worker_count_does_not_matter(workers):
    ref = sde.simulate(_cfg(n_paths=13000), workers=1)
    out = sde.simulate(_cfg(n_paths=13000), workers=workers)
    np.testing.assert_array_equal(out.survivor_values, ref.survivor_values)
    np.testing.assert_array_equal(out.survival_counts, ref.survival_counts)


@pytest.mark.skipif(_backend.compiled_kernels is None, reason="compiled kernels not built")
def test_backends_bit_identical():
    cfg = _cfg(n_paths=6000, dt=1e-3, horizon=2.0)
    py = sde.simulate(cfg, backend="python")
    cy = sde.simulate(cfg, backend="cython")
    assert py.backend == "python" and cy.backend == "cython"
    np.testing.assert_array_equal(py.survivor_values, cy.survivor_values)
    np.testing.assert_array_equal(py.survival_counts, cy.survival_counts)


def test_unknown_backend():
    with pytest.raises(ValueError):
        sde.simulate(_cfg(), backend="fortran")


def test_survival_curve_monotone():
    ens = sde.simulate(_cfg(n_paths=5000, dt=1e-3, horizon=3.0, n_bins=30))
    assert ens.times.size == 30
    assert ens.times[-1] == pytest.approx(3.0)
    assert np.all(np.diff(ens.survival_counts) <= 0)
    assert ens.survival_counts[-1] == ens.n_survivors
    assert np.all(ens.survivor_values > 1.0)


def test_pilot_start_at_boundary():
    # a path started a hair above A is killed almost surely; the residue shrinks like sqrt(dt)
    coarse = sde.simulate(sde.SimConfig(A=2.0, x0=2.0 + 1e-12, dt=1e-3, horizon=1.0, n_paths=10000, seed=1))
    fine = sde.simulate(sde.SimConfig(A=2.0, x0=2.0 + 1e-12, dt=1e-4, horizon=1.0, n_paths=10000, seed=1))
    assert fine.n_survivors == 39
    assert fine.n_survivors / 10000 < 0.01
    assert fine.n_survivors < coarse.n_survivors


def test_no_kill_keeps_everyone():
    ens = sde.simulate(sde.SimConfig(A=0.5, x0=1.0, dt=1e-2, horizon=1.0, n_paths=2000, seed=5, kill=False))
    assert ens.n_survivors == 2000 and ens.n_killed == 0
    assert np.all(ens.survival_counts == 2000)


def test_empirical_cdf():
    ens = sde.simulate(_cfg(n_paths=3000))
    v = np.sort(ens.survivor_values)
    assert sde.empirical_cdf(ens, v[-1]) == 1.0
    assert sde.empirical_cdf(ens, 1.0) == 0.0
    assert sde.empirical_cdf(ens, v[9]) == pytest.approx(10 / v.size)


def test_ks_on_exact_samples():
    m = qsd.principal_model(1.0)
    rng = np.random.default_rng(0)
    u = rng.uniform(0.001, 0.999, 4000)
    grid_p = np.linspace(0.0005, 0.9995, 2000)
    grid_x = np.array([qsd.qsd_quantile(m, p) for p in grid_p])
    samples = np.interp(u, grid_p, grid_x)
    d = sde.ks_distance(samples, m)
    assert d < 1.63 / math.sqrt(4000)
    assert sde.ks_distance(samples, qsd.principal_model(0.3)) > 3 * d


@pytest.mark.slow
def test_ks_self_consistency_across_seeds():
    # inverse-cdf samples from a dense quantile table; KS under the alpha = 0.001 band in >= 99 of 100 seeds
    m = qsd.principal_model(0.5)
    grid_p = np.linspace(1e-6, 1 - 1e-6, 20001)
    grid_x = np.array([qsd.qsd_quantile(m, p) for p in grid_p])
    n = 100_000
    over = 0
    for seed in range(100):
        u = np.random.default_rng(seed).uniform(1e-6, 1 - 1e-6, n)
        if sde.ks_distance(np.interp(u, grid_p, grid_x), m) > 1.95 / math.sqrt(n):
            over += 1
    assert over <= 1


def test_ks_needs_survivors():
    m = qsd.principal_model(1.0)
    with pytest.raises(sde.InsufficientDataError):
        sde.ks_distance(np.array([2.0]), m)
    ens = sde.simulate(sde.SimConfig(A=2.0, x0=2.0 + 1e-12, dt=1e-3, horizon=1.0, n_paths=100, seed=2))
    with pytest.raises(sde.InsufficientDataError):
        sde.ks_distance(ens, m)


def _synthetic(counts, horizon=10.0, n_paths=None):
    counts = np.asarray(counts, dtype=np.int64)
    cfg = sde.SimConfig(A=1.0, dt=horizon / counts.size, horizon=horizon, n_paths=n_paths or int(counts[0]) * 2)
    times = horizon / counts.size * np.arange(1, counts.size + 1)
    return sde.KilledPathEnsemble(cfg, np.full(3, 2.0), times, counts, 0, "python")


@given(st.floats(0.01, 0.5))
@settings(max_examples=20)
def test_rate_of_exact_exponential(rate):
    t = 10.0 / 200 * np.arange(1, 201)
    counts = np.round(1e12 * np.exp(-rate * t))
    ens = _synthetic(counts)
    assert sde.estimate_kill_rate(ens) == pytest.approx(rate, rel=1e-6)


def test_rate_of_flat_curve():
    assert abs(sde.estimate_kill_rate(_synthetic(np.full(100, 500)))) < 1e-12


def test_rate_needs_bins():
    with pytest.raises(sde.InsufficientDataError):
        sde.estimate_kill_rate(_synthetic(np.full(10, 500)))


def test_json_round_trip():
    ens = sde.simulate(_cfg(n_paths=800))
    back = sde.KilledPathEnsemble.from_json(ens.to_json())
    assert back.config == ens.config
    np.testing.assert_array_equal(back.survivor_values, ens.survivor_values)
    np.testing.assert_array_equal(back.survival_counts, ens.survival_counts)
    d = ens.to_dict()
    assert d["seed"] == 3 and "survival_curve" in d and "survivor_histogram" in d
    assert sum(d["survivor_histogram"]["counts"]) <= ens.n_survivors


def test_step_budget(monkeypatch):
    monkeypatch.setenv(sde.STEP_BUDGET_ENV, "1e5")
    with pytest.raises(sde.StepBudgetError):
        sde.simulate(_cfg(n_paths=1001, dt=1e-2, horizon=1.0))
    sde.simulate(_cfg(n_paths=1000, dt=1e-2, horizon=1.0))
    monkeypatch.delenv(sde.STEP_BUDGET_ENV)
    assert sde.step_budget() == sde.DEFAULT_STEP_BUDGET


@pytest.mark.slow
def test_kill_rate_subcritical():
    cfg = sde.SimConfig(A=0.5, x0=1.0, dt=1e-3, horizon=40.0, n_paths=100_000, seed=21)
    ens = sde.simulate(cfg)
    lam = qsd.principal_model(0.5).lam
    assert sde.estimate_kill_rate(ens) == pytest.approx(lam, rel=0.15)


@pytest.mark.slow
def test_ks_shrinks_with_horizon_subcritical():
    m = qsd.principal_model(0.5)
    ks = []
    for horizon in (2.0, 5.0, 15.0):
        cfg = sde.SimConfig(A=0.5, x0=1.0, dt=1e-3, horizon=horizon, n_paths=100_000, seed=8)
        ks.append(sde.ks_distance(sde.simulate(cfg), m))
    # survivors relax toward the QSD: 0.27, 0.12, 0.025 for this seed
    assert ks[0] > ks[1] > ks[2]
    assert ks[2] < 0.15 * ks[0]


@pytest.mark.slow
def test_time_step_convergence():
    # halving dt moves the survival fraction toward its continuum value
    fr = []
    for dt in (4e-3, 2e-3, 1e-3):
        cfg = sde.SimConfig(A=0.5, x0=1.0, dt=dt, horizon=2.0, n_paths=100_000, seed=12)
        fr.append(sde.simulate(cfg).n_survivors / cfg.n_paths)
    d1, d2 = fr[0] - fr[1], fr[1] - fr[2]
    assert d1 > 0 and d2 > 0 and d2 < d1
