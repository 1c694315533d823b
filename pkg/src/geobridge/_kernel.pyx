# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 loops for the closed-form chart families.

Family codes and parameter layouts (``s`` scales the potential):

* 0 euclidean  ``[n, A (n*n, row-major), f (n), s]``
* 1 cone       ``[c, d, s]``
* 2 sphere     ``[theta_c, lon_c, s]``

Both entry points return ``(path, fail_time, fail_kind)`` where
``fail_kind`` is 0 on success, 1 when a stage point left the chart and 2
when the step produced a non-finite or inadmissible state.
"""

import numpy as np

from libc.math cimport sin, cos, isfinite, M_PI


cdef int _guard(int kind, const double* q, int n) noexcept nogil:
    cdef int i
    for i in range(n):
        if not isfinite(q[i]):
            return 0
    if kind == 1:
        return q[0] > 0.0
    if kind == 2:
        return q[0] > 0.0 and q[0] < M_PI
    return 1


cdef void _el_rhs(int kind, const double* p, int n, const double* y, double* out) noexcept nogil:
    cdef int i, j
    cdef double acc, s, sn, s2, t011, dv0, dv1
    if kind == 0:
        s = p[1 + n * n + n]
        for i in range(n):
            acc = p[1 + n * n + i]
            for j in range(n):
                acc = acc + p[1 + i * n + j] * y[j]
            out[i] = y[n + i] - s * acc
            acc = 0.0
            for j in range(n):
                acc = acc + p[1 + i * n + j] * y[n + j]
            out[n + i] = s * acc
    elif kind == 1:
        s = p[2]
        out[0] = y[0] * (y[1] - s * (p[0] + p[1] / y[0]))
        out[1] = -0.5 * y[1] * y[1] + s * p[0] * y[1]
    else:
        s = p[2]
        sn = sin(y[0])
        s2 = sn * sn
        dv0 = s * (y[0] - p[0])
        dv1 = s * (y[1] - p[1])
        t011 = -2.0 * cos(y[0]) / (s2 * sn)
        out[0] = y[2] - dv0
        out[1] = (y[3] - dv1) / s2
        out[2] = -0.5 * t011 * y[3] * y[3] + s * y[2] + t011 * dv1 * y[3]
        out[3] = (s / s2) * y[3]


cdef void _flow_rhs(int kind, const double* p, int n, double sign, const double* x, double* out) noexcept nogil:
    cdef int i, j
    cdef double acc, s, sn
    if kind == 0:
        s = p[1 + n * n + n]
        for i in range(n):
            acc = p[1 + n * n + i]
            for j in range(n):
                acc = acc + p[1 + i * n + j] * x[j]
            out[i] = sign * s * acc
    elif kind == 1:
        s = p[2]
        out[0] = sign * x[0] * (s * (p[0] + p[1] / x[0]))
    else:
        s = p[2]
        sn = sin(x[0])
        out[0] = sign * s * (x[0] - p[0])
        out[1] = sign * s * (x[1] - p[1]) / (sn * sn)


cdef int _rk4(int kind, const double* p, int n, int m, int flow, double sign,
              double[:, ::1] Y, int N, double* work, double* fail_time) noexcept nogil:
    cdef double h = 1.0 / N
    cdef double* k1 = work
    cdef double* k2 = work + m
    cdef double* k3 = work + 2 * m
    cdef double* k4 = work + 3 * m
    cdef double* tmp = work + 4 * m
    cdef int k, i
    cdef double* yk
    cdef double* yn
    for k in range(N):
        yk = &Y[k, 0]
        yn = &Y[k + 1, 0]
        if not _guard(kind, yk, n):
            fail_time[0] = k * h
            return 1
        if flow:
            _flow_rhs(kind, p, n, sign, yk, k1)
        else:
            _el_rhs(kind, p, n, yk, k1)
        for i in range(m):
            tmp[i] = yk[i] + 0.5 * h * k1[i]
        if not _guard(kind, tmp, n):
            fail_time[0] = k * h
            return 1
        if flow:
            _flow_rhs(kind, p, n, sign, tmp, k2)
        else:
            _el_rhs(kind, p, n, tmp, k2)
        for i in range(m):
            tmp[i] = yk[i] + 0.5 * h * k2[i]
        if not _guard(kind, tmp, n):
            fail_time[0] = k * h
            return 1
        if flow:
            _flow_rhs(kind, p, n, sign, tmp, k3)
        else:
            _el_rhs(kind, p, n, tmp, k3)
        for i in range(m):
            tmp[i] = yk[i] + h * k3[i]
        if not _guard(kind, tmp, n):
            fail_time[0] = k * h
            return 1
        if flow:
            _flow_rhs(kind, p, n, sign, tmp, k4)
        else:
            _el_rhs(kind, p, n, tmp, k4)
        for i in range(m):
            yn[i] = yk[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(m):
            if not isfinite(yn[i]):
                fail_time[0] = (k + 1) * h
                return 2
        if not _guard(kind, yn, n):
            fail_time[0] = (k + 1) * h
            return 2
    return 0


def _dims(int kind, double[::1] params):
    if kind == 0:
        return int(params[0])
    if kind == 1:
        return 1
    if kind == 2:
        return 2
    raise ValueError(f"unknown kernel family {kind}")


def el_rk4(int kind, double[::1] params, double[::1] y0, int N):
    cdef int n = _dims(kind, params)
    cdef int m = 2 * n
    if y0.shape[0] != m:
        raise ValueError("state size does not match the chart dimension")
    out = np.empty((N + 1, m))
    cdef double[:, ::1] Y = out
    work = np.empty(5 * m)
    cdef double[::1] w = work
    cdef double fail_time = -1.0
    cdef int status
    Y[0, :] = y0
    with nogil:
        status = _rk4(kind, &params[0], n, m, 0, 1.0, Y, N, &w[0], &fail_time)
    return out, fail_time, status


def flow_rk4(int kind, double[::1] params, double[::1] x0, double sign, int N):
    cdef int n = _dims(kind, params)
    if x0.shape[0] != n:
        raise ValueError("state size does not match the chart dimension")
    out = np.empty((N + 1, n))
    cdef double[:, ::1] Y = out
    work = np.empty(5 * n)
    cdef double[::1] w = work
    cdef double fail_time = -1.0
    cdef int status
    Y[0, :] = x0
    with nogil:
        status = _rk4(kind, &params[0], n, n, 1, sign, Y, N, &w[0], &fail_time)
    return out, fail_time, status
