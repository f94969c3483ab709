"""Euler-Maruyama simulation of dX = dt + X dB killed on first reaching A.

Paths are split into fixed-size chunks.  Chunk k draws from its own PCG64
stream spawned from ``SeedSequence(seed)``, so results depend only on the
seed and never on how many worker threads ran the chunks.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from . import _backend

CHUNK_PATHS = 4096
DEFAULT_STEP_BUDGET = 2e10
STEP_BUDGET_ENV = "SHIRYAEV_QSD_STEP_BUDGET"
MIN_KS_SURVIVORS = 100
MIN_RATE_BINS = 10


class StepBudgetError(RuntimeError):
    """n_paths * horizon / dt is above the configured step budget."""


class InsufficientDataError(ValueError):
    pass


def step_budget():
    raw = os.environ.get(STEP_BUDGET_ENV)
    return float(raw) if raw else DEFAULT_STEP_BUDGET


@dataclass(frozen=True)
class SimConfig:
    A: float
    x0: float = None
    dt: float = 1e-3
    horizon: float = 1.0
    n_paths: int = 1000
    seed: int = 0
    kill: bool = True
    n_bins: int = 400

    def __post_init__(self):
        if self.x0 is None:
            object.__setattr__(self, "x0", float(self.A) + 1.0)
        for name in ("A", "x0", "dt", "horizon"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.A > 0 and math.isfinite(self.A)):
            raise ValueError(f"A must be positive, got {self.A}")
        if self.kill and not self.x0 > self.A:
            raise ValueError(f"x0 must exceed A, got x0={self.x0}, A={self.A}")
        if not self.dt > 0 or not self.horizon > 0 or self.dt > self.horizon:
            raise ValueError("need 0 < dt <= horizon")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValueError(f"n_paths must be a positive integer, got {self.n_paths}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.n_bins < 1:
            raise ValueError("n_bins must be positive")

    @property
    def n_steps(self):
        return max(1, int(round(self.horizon / self.dt)))

    @property
    def record_every(self):
        return max(1, self.n_steps // self.n_bins)

    @property
    def total_steps(self):
        return self.n_paths * self.n_steps


@dataclass
class KilledPathEnsemble:
    config: SimConfig
    survivor_values: np.ndarray
    times: np.ndarray
    survival_counts: np.ndarray
    n_killed: int
    backend: str

    @property
    def n_survivors(self):
        return int(self.survivor_values.size)

    def survival_fraction(self):
        return self.survival_counts / self.config.n_paths

    def to_dict(self, n_hist=50, include_values=False):
        cfg = asdict(self.config)
        out = {
            "config": cfg,
            "seed": cfg["seed"],
            "n_paths": cfg["n_paths"],
            "n_survivors": self.n_survivors,
            "n_killed": self.n_killed,
            "backend": self.backend,
            "survival_curve": {
                "t": self.times.tolist(),
                "count": self.survival_counts.tolist(),
            },
        }
        if self.n_survivors:
            lo = self.config.A if self.config.kill else float(self.survivor_values.min())
            hi = float(np.quantile(self.survivor_values, 0.99))
            counts, edges = np.histogram(self.survivor_values, bins=n_hist, range=(lo, max(hi, lo + 1e-12)))
            out["survivor_histogram"] = {"edges": edges.tolist(), "counts": counts.tolist()}
        if include_values:
            out["survivor_values"] = self.survivor_values.tolist()
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(include_values=True), **kw)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        cfg = SimConfig(**d["config"])
        return cls(
            cfg,
            np.asarray(d["survivor_values"], dtype=float),
            np.asarray(d["survival_curve"]["t"], dtype=float),
            np.asarray(d["survival_curve"]["count"], dtype=np.int64),
            int(d["n_killed"]),
            d.get("backend", "unknown"),
        )


def simulate(config, backend=None, workers=None):
    """Run the ensemble described by ``config``.

    ``backend`` is ``"cython"``, ``"python"`` or None for the import-time
    default.  ``workers`` defaults to the CPU count.
    """
    budget = step_budget()
    if config.total_steps > budget:
        raise StepBudgetError(
            f"{config.total_steps:.3g} steps exceed the budget of {budget:.3g} (set {STEP_BUDGET_ENV})"
        )
    kern, name = _pick(backend)
    n_chunks = -(-config.n_paths // CHUNK_PATHS)
    seqs = np.random.SeedSequence(int(config.seed)).spawn(n_chunks)
    sizes = [min(CHUNK_PATHS, config.n_paths - k * CHUNK_PATHS) for k in range(n_chunks)]

    def run(k):
        gen = np.random.Generator(np.random.PCG64(seqs[k]))
        return kern.simulate_chunk(
            config.x0, config.A, config.dt, config.n_steps, config.record_every,
            bool(config.kill), sizes[k], gen,
        )

    workers = workers or os.cpu_count() or 1
    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=min(workers, n_chunks)) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(k) for k in range(n_chunks)]
    survivors = np.concatenate([p[0] for p in parts]) if parts else np.empty(0)
    counts = np.sum([p[1] for p in parts], axis=0).astype(np.int64)
    times = config.dt * config.record_every * np.arange(1, counts.size + 1)
    return KilledPathEnsemble(
        config, survivors, times, counts, config.n_paths - survivors.size, name
    )


def _pick(backend):
    if backend is None:
        return _backend.kernels, _backend.BACKEND
    if backend == "python":
        return _backend.python_kernels, "python"
    if backend == "cython":
        if _backend.compiled_kernels is None:
            raise RuntimeError("compiled kernels are not available")
        return _backend.compiled_kernels, "cython"
    raise ValueError(f"unknown backend {backend!r}")


def empirical_cdf(ensemble, x):
    """Fraction of survivors <= x."""
    vals = ensemble.survivor_values
    if vals.size == 0:
        raise InsufficientDataError("ensemble has no survivors")
    srt = np.sort(vals)
    return np.searchsorted(srt, x, side="right") / srt.size


def ks_distance(ensemble, model, min_survivors=MIN_KS_SURVIVORS):
    """Two-sided Kolmogorov-Smirnov distance between survivors and Q_A.

    ``ensemble`` may also be a plain array of samples.
    """
    vals = ensemble.survivor_values if hasattr(ensemble, "survivor_values") else np.asarray(ensemble, dtype=float)
    if vals.size < max(min_survivors, 1):
        raise InsufficientDataError(f"need at least {min_survivors} survivors, got {vals.size}")
    return float(stats.kstest(vals, model.cdf).statistic)


def estimate_kill_rate(ensemble, window=None):
    """Negative slope of log survival fraction against t over [horizon/2, horizon]."""
    t = np.asarray(ensemble.times, dtype=float)
    c = np.asarray(ensemble.survival_counts, dtype=float)
    h = ensemble.config.horizon
    lo, hi = window if window is not None else (0.5 * h, h)
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12) & (c > 0)
    if np.count_nonzero(sel) < MIN_RATE_BINS:
        raise InsufficientDataError(
            f"need {MIN_RATE_BINS} nonempty bins in [{lo}, {hi}], got {np.count_nonzero(sel)}"
        )
    slope = np.polyfit(t[sel], np.log(c[sel] / ensemble.config.n_paths), 1)[0]
    return float(-slope)
