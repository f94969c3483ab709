# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: hypergeometric series and killed Euler-Maruyama paths.

Each function mirrors one in ``_pykernels`` operation for operation, so the
two backends agree bit for bit on the same inputs.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport fabs, log, sqrt
from numpy.random cimport bitgen_t
import numpy as np
cimport numpy as cnp

cnp.import_array()

from numpy.random.c_distributions cimport random_standard_normal

cdef double EPS = 2.220446049250313e-16
cdef int MAX_TERMS = 5000


cdef int _kummer(double alpha, double beta, double z,
                 double *total_out, double *abs_out) noexcept nogil:
    cdef double term = 1.0, total = 1.0, abs_total = 1.0
    cdef int k = 0
    while k < MAX_TERMS:
        term *= (alpha + k) / (beta + k) * z / (k + 1)
        k += 1
        total += term
        abs_total += fabs(term)
        if term == 0.0 or (k > z and fabs(term) <= 0.5 * EPS * fabs(total)):
            total_out[0] = total
            abs_out[0] = abs_total
            return k
    total_out[0] = total
    abs_out[0] = abs_total
    return -1


def kummer_series(double alpha, double beta, double z):
    cdef double total, abs_total
    cdef int k = _kummer(alpha, beta, z, &total, &abs_total)
    return total, abs_total, k


def kummer_series_array(double alpha, double beta, double[::1] z):
    cdef Py_ssize_t i, n = z.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double total, abs_total
    cdef int bad = 0
    with nogil:
        for i in range(n):
            if _kummer(alpha, beta, z[i], &total, &abs_total) < 0:
                bad = 1
            o[i] = total
    return out, bad


cdef int _logser(double a, double z, double psi_a, double psi_1,
                 double *total_out, double *abs_out) noexcept nogil:
    cdef double lz = log(z)
    cdef double coef = 1.0
    cdef double pa = psi_a, p1 = psi_1
    cdef double term = lz + pa - 2.0 * p1
    cdef double total = term, abs_total = fabs(term)
    cdef int k = 0
    while k < MAX_TERMS:
        coef *= (a + k) / ((k + 1.0) * (k + 1.0)) * z
        pa += 1.0 / (a + k)
        p1 += 1.0 / (k + 1.0)
        k += 1
        term = coef * (lz + pa - 2.0 * p1)
        total += term
        abs_total += fabs(term)
        if coef == 0.0 or (k > z and fabs(term) <= 0.5 * EPS * fabs(total)):
            total_out[0] = total
            abs_out[0] = abs_total
            return k
    total_out[0] = total
    abs_out[0] = abs_total
    return -1


def tricomi_log_series(double a, double z, double psi_a, double psi_1):
    cdef double total, abs_total
    cdef int k = _logser(a, z, psi_a, psi_1, &total, &abs_total)
    return total, abs_total, k


def tricomi_log_series_array(double a, double[::1] z, double psi_a, double psi_1):
    cdef Py_ssize_t i, n = z.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double total, abs_total
    cdef int bad = 0
    with nogil:
        for i in range(n):
            if _logser(a, z[i], psi_a, psi_1, &total, &abs_total) < 0:
                bad = 1
            o[i] = total
    return out, bad


def simulate_chunk(double x0, double A, double dt, long n_steps,
                   long record_every, bint kill, long n_paths, generator):
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(
        generator.bit_generator.capsule, "BitGenerator")
    cdef double sdt = sqrt(dt)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.full(n_paths, x0)
    cdef double[::1] x = xs
    cdef long n_rec = n_steps // record_every
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(n_rec, dtype=np.int64)
    cdef long alive = n_paths, step, i, j, r = 0
    cdef double xi
    cdef cnp.int64_t[::1] cnt = counts
    with generator.bit_generator.lock:
        with nogil:
            for step in range(1, n_steps + 1):
                j = 0
                for i in range(alive):
                    xi = x[i]
                    xi = xi + dt + xi * sdt * random_standard_normal(rng)
                    if kill and xi <= A:
                        continue
                    x[j] = xi
                    j += 1
                alive = j
                if step % record_every == 0 and r < n_rec:
                    cnt[r] = alive
                    r += 1
    return xs[:alive].copy(), counts
