"""Pure-Python/NumPy twins of the compiled kernels in ``_kernels.pyx``."""
import math

import numpy as np

EPS = 2.220446049250313e-16
MAX_TERMS = 5000


def kummer_series(alpha, beta, z):
    term = total = abs_total = 1.0
    k = 0
    while k < MAX_TERMS:
        term *= (alpha + k) / (beta + k) * z / (k + 1)
        k += 1
        total += term
        abs_total += abs(term)
        if term == 0.0:
            return total, abs_total, k
        if k > z and abs(term) <= 0.5 * EPS * abs(total):
            return total, abs_total, k
    return total, abs_total, -1


def tricomi_log_series(a, z, psi_a, psi_1):
    lz = math.log(z)
    coef = 1.0
    pa, p1 = psi_a, psi_1
    term = lz + pa - 2.0 * p1
    total, abs_total = term, abs(term)
    k = 0
    while k < MAX_TERMS:
        coef *= (a + k) / ((k + 1.0) * (k + 1.0)) * z
        pa += 1.0 / (a + k)
        p1 += 1.0 / (k + 1.0)
        k += 1
        term = coef * (lz + pa - 2.0 * p1)
        total += term
        abs_total += abs(term)
        if coef == 0.0:
            return total, abs_total, k
        if k > z and abs(term) <= 0.5 * EPS * abs(total):
            return total, abs_total, k
    return total, abs_total, -1


def kummer_series_array(alpha, beta, z):
    z = np.asarray(z, dtype=float)
    term = np.ones_like(z)
    total = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(MAX_TERMS):
        term = np.where(active, term * ((alpha + k) / (beta + k) * z / (k + 1)), 0.0)
        total = total + term
        done = (term == 0.0) | ((k + 1 > z) & (np.abs(term) <= 0.5 * EPS * np.abs(total)))
        active &= ~done
        if not active.any():
            return total, 0
    return total, 1


def tricomi_log_series_array(a, z, psi_a, psi_1):
    z = np.asarray(z, dtype=float)
    lz = np.log(z)
    coef = np.ones_like(z)
    pa, p1 = psi_a, psi_1
    total = lz + pa - 2.0 * p1
    active = np.ones(z.shape, dtype=bool)
    for k in range(MAX_TERMS):
        coef = np.where(active, coef * ((a + k) / ((k + 1.0) * (k + 1.0)) * z), 0.0)
        pa += 1.0 / (a + k)
        p1 += 1.0 / (k + 1.0)
        term = coef * (lz + pa - 2.0 * p1)
        total = total + term
        done = (coef == 0.0) | ((k + 1 > z) & (np.abs(term) <= 0.5 * EPS * np.abs(total)))
        active &= ~done
        if not active.any():
            return total, 0
    return total, 1


def simulate_chunk(x0, A, dt, n_steps, record_every, kill, n_paths, generator):
    sdt = math.sqrt(dt)
    x = np.full(n_paths, float(x0))
    n_rec = n_steps // record_every
    counts = np.zeros(n_rec, dtype=np.int64)
    r = 0
    for step in range(1, n_steps + 1):
        if x.size:
            x = x + dt + x * sdt * generator.standard_normal(x.size)
            if kill:
                x = x[x > A]
        if step % record_every == 0 and r < n_rec:
            counts[r] = x.size
            r += 1
    return x, counts
