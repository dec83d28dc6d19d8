# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``."""

import numpy as np
from libc.math cimport sqrt, fmax


def gradient(double[:, ::1] u):
    cdef Py_ssize_t n1 = u.shape[0], n2 = u.shape[1], i, j
    out = np.zeros((2, n1, n2))
    cdef double[:, :, ::1] p = out
    for i in range(n1):
        for j in range(n2):
            if j < n2 - 1:
                p[0, i, j] = u[i, j + 1] - u[i, j]
            if i < n1 - 1:
                p[1, i, j] = u[i + 1, j] - u[i, j]
    return out


cdef inline double _div_at(double[:, :, ::1] p, Py_ssize_t i, Py_ssize_t j,
                           Py_ssize_t n1, Py_ssize_t n2) nogil:
    cdef double d = 0.0
    if n2 > 1:
        if j == 0:
            d = p[0, i, j]
        elif j == n2 - 1:
            d = -p[0, i, j - 1]
        else:
            d = p[0, i, j] - p[0, i, j - 1]
    if n1 > 1:
        if i == 0:
            d += p[1, i, j]
        elif i == n1 - 1:
            d -= p[1, i - 1, j]
        else:
            d += p[1, i, j] - p[1, i - 1, j]
    return d


def divergence(double[:, :, ::1] p):
    cdef Py_ssize_t n1 = p.shape[1], n2 = p.shape[2], i, j
    out = np.zeros((n1, n2))
    cdef double[:, ::1] d = out
    for i in range(n1):
        for j in range(n2):
            d[i, j] = _div_at(p, i, j, n1, n2)
    return out


cdef (long, double) _cp(double[:, ::1] g, double[:, ::1] alpha, double[:, ::1] u,
                        double[:, ::1] ubar, double[:, :, ::1] p, double tau, double sigma,
                        double theta, long max_iter, double tol) noexcept nogil:
    cdef Py_ssize_t n1 = g.shape[0], n2 = g.shape[1], i, j
    cdef long it = 0
    cdef double qx, qy, scale, gx, gy, uold, unew, diff
    cdef double dsum, nsum, rel = 1.0 / 0.0
    cdef double inv1t = 1.0 / (1.0 + tau)
    while it < max_iter:
        it += 1
        for i in range(n1):
            for j in range(n2):
                gx = ubar[i, j + 1] - ubar[i, j] if j < n2 - 1 else 0.0
                gy = ubar[i + 1, j] - ubar[i, j] if i < n1 - 1 else 0.0
                qx = p[0, i, j] + sigma * gx
                qy = p[1, i, j] + sigma * gy
                scale = fmax(sqrt(qx * qx + qy * qy) / alpha[i, j], 1.0)
                p[0, i, j] = qx / scale
                p[1, i, j] = qy / scale
        dsum = 0.0
        nsum = 0.0
        for i in range(n1):
            for j in range(n2):
                uold = u[i, j]
                unew = (uold + tau * _div_at(p, i, j, n1, n2) + tau * g[i, j]) * inv1t
                diff = unew - uold
                u[i, j] = unew
                ubar[i, j] = unew + theta * diff
                dsum += diff * diff
                nsum += unew * unew
        rel = sqrt(dsum) / fmax(sqrt(nsum), 1e-300)
        if rel < tol:
            break
    return it, rel


def cp_denoise(double[:, ::1] g, double[:, ::1] alpha, double[:, ::1] u,
               double[:, ::1] ubar, double[:, :, ::1] p, double tau, double sigma, double theta,
               long max_iter, double tol):
    cdef long it
    cdef double rel
    with nogil:
        it, rel = _cp(g, alpha, u, ubar, p, tau, sigma, theta, max_iter, tol)
    return it, rel


def l1tv_denoise(double[:, ::1] g, double[:, ::1] alpha, double gamma, double[:, ::1] u,
                 double[:, :, ::1] p, double tau, double sigma, double theta,
                 long max_outer, double tol, long inner_max, double inner_tol):
    cdef Py_ssize_t n1 = g.shape[0], n2 = g.shape[1], i, j
    cdef long it = 0, inner = 0, k
    cdef double r, v, diff, dsum, nsum, rel = 1.0 / 0.0, irel
    d_arr = np.empty((n1, n2))
    prev_arr = np.empty((n1, n2))
    ubar_arr = np.empty((n1, n2))
    va_arr = np.zeros((n1, n2))
    cdef double[:, ::1] d = d_arr
    cdef double[:, ::1] prev = prev_arr
    cdef double[:, ::1] ubar = ubar_arr
    cdef double[:, ::1] va = va_arr
    with nogil:
        while it < max_outer:
            it += 1
            for i in range(n1):
                for j in range(n2):
                    r = u[i, j] - g[i, j]
                    if r > gamma:
                        v = r - gamma
                    elif r < -gamma:
                        v = r + gamma
                    else:
                        v = 0.0
                    va[i, j] = v
                    d[i, j] = g[i, j] + v
                    prev[i, j] = u[i, j]
                    ubar[i, j] = u[i, j]
            k, irel = _cp(d, alpha, u, ubar, p, tau, sigma, theta, inner_max, inner_tol)
            inner += k
            dsum = 0.0
            nsum = 0.0
            for i in range(n1):
                for j in range(n2):
                    diff = u[i, j] - prev[i, j]
                    dsum += diff * diff
                    nsum += u[i, j] * u[i, j]
            rel = sqrt(dsum) / fmax(sqrt(nsum), 1e-300)
            if rel < tol:
                break
    return it, inner, rel, va_arr


def box_sum(double[:, ::1] a, Py_ssize_t half):
    cdef Py_ssize_t n1 = a.shape[0], n2 = a.shape[1], i, j, i0, i1, j0, j1
    sat_arr = np.zeros((n1 + 1, n2 + 1))
    out = np.empty((n1, n2))
    cdef double[:, ::1] s = sat_arr
    cdef double[:, ::1] o = out
    for i in range(n1):
        for j in range(n2):
            s[i + 1, j + 1] = a[i, j] + s[i, j + 1] + s[i + 1, j] - s[i, j]
    for i in range(n1):
        i0 = i - half if i - half > 0 else 0
        i1 = i + half + 1 if i + half + 1 < n1 else n1
        for j in range(n2):
            j0 = j - half if j - half > 0 else 0
            j1 = j + half + 1 if j + half + 1 < n2 else n2
            o[i, j] = s[i1, j1] - s[i0, j1] - s[i1, j0] + s[i0, j0]
    return out
