# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot-loop kernels.

Mirrors ``_pyref`` exactly: every arithmetic operation and every accumulation
order is identical, so the two backends are bit-for-bit interchangeable.
Built with -ffp-contract=off so no FMA contraction diverges from numpy.
"""

from libc.math cimport floor, fabs

BACKEND = "compiled"


def stochastic_levels(double[::1] mag, double g_min, double delta,
                      long long n_points, double[::1] u, long long[::1] out):
    cdef Py_ssize_t i, n = mag.shape[0]
    cdef long long top = n_points - 1
    cdef double inv, pos, lo, frac, ftop = <double> top
    cdef long long lvl
    if delta == 0.0:
        for i in range(n):
            out[i] = 0
        return
    inv = 1.0 / delta
    for i in range(n):
        pos = (mag[i] - g_min) * inv
        if pos < 0.0:
            pos = 0.0
        elif pos > ftop:
            pos = ftop
        lo = floor(pos)
        frac = pos - lo
        lvl = <long long> lo
        if u[i] < frac:
            lvl += 1
        if lvl > top:
            lvl = top
        out[i] = lvl


def reconstruct(long long[::1] levels, double[::1] signs, double g_min,
                double delta, double[::1] out):
    cdef Py_ssize_t i, n = levels.shape[0]
    for i in range(n):
        out[i] = signs[i] * (g_min + (<double> levels[i]) * delta)


def add_scaled(double[::1] acc, double coeff, double[::1] vec):
    cdef Py_ssize_t i, n = acc.shape[0]
    for i in range(n):
        acc[i] += coeff * vec[i]


def quant_contrib(double[::1] g, double[::1] u, long long n_points,
                  double coeff, double[::1] acc):
    cdef Py_ssize_t i, n = g.shape[0]
    cdef long long top = n_points - 1
    cdef double g_min, g_max, m, delta, inv, pos, lo, frac, recon, sign
    cdef double ftop = <double> top
    cdef long long lvl
    g_min = fabs(g[0])
    g_max = g_min
    for i in range(1, n):
        m = fabs(g[i])
        if m < g_min:
            g_min = m
        if m > g_max:
            g_max = m
    delta = (g_max - g_min) / ftop
    if delta == 0.0:
        for i in range(n):
            sign = -1.0 if g[i] < 0 else 1.0
            recon = sign * g_min
            acc[i] += coeff * recon
        return g_min, g_max
    inv = 1.0 / delta
    for i in range(n):
        m = fabs(g[i])
        pos = (m - g_min) * inv
        if pos < 0.0:
            pos = 0.0
        elif pos > ftop:
            pos = ftop
        lo = floor(pos)
        frac = pos - lo
        lvl = <long long> lo
        if u[i] < frac:
            lvl += 1
        if lvl > top:
            lvl = top
        sign = -1.0 if g[i] < 0 else 1.0
        recon = sign * (g_min + (<double> lvl) * delta)
        acc[i] += coeff * recon
    return g_min, g_max
