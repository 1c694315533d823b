"""Pure-Python twin of the compiled ``_kernel`` module (same API and layouts)."""

import math

import numpy as np


def _unpack_euclid(params):
    n = int(params[0])
    A = np.asarray(params[1:1 + n * n]).reshape(n, n)
    f = np.asarray(params[1 + n * n:1 + n * n + n])
    return n, A, f, params[1 + n * n + n]


def _guard(kind, q):
    if not all(math.isfinite(v) for v in q):
        return False
    if kind == 1:
        return q[0] > 0.0
    if kind == 2:
        return 0.0 < q[0] < math.pi
    return True


def _make_el_rhs(kind, params):
    if kind == 0:
        n, A, f, s = _unpack_euclid(params)

        def rhs(y):
            q, phi = y[:n], y[n:]
            return np.concatenate([phi - s * (A @ q + f), s * (A @ phi)])
        return n, rhs
    if kind == 1:
        c, d, s = params[0], params[1], params[2]

        def rhs(y):
            q, phi = y[0], y[1]
            return np.array([q * (phi - s * (c + d / q)), -0.5 * phi * phi + s * c * phi])
        return 1, rhs
    if kind == 2:
        tc, lc, s = params[0], params[1], params[2]

        def rhs(y):
            sn = math.sin(y[0])
            s2 = sn * sn
            dv0, dv1 = s * (y[0] - tc), s * (y[1] - lc)
            t011 = -2.0 * math.cos(y[0]) / (s2 * sn)
            return np.array([
                y[2] - dv0,
                (y[3] - dv1) / s2,
                -0.5 * t011 * y[3] * y[3] + s * y[2] + t011 * dv1 * y[3],
                (s / s2) * y[3],
            ])
        return 2, rhs
    raise ValueError(f"unknown kernel family {kind}")


def _make_flow_rhs(kind, params, sign):
    if kind == 0:
        n, A, f, s = _unpack_euclid(params)
        return n, lambda x: sign * s * (A @ x + f)
    if kind == 1:
        c, d, s = params[0], params[1], params[2]
        return 1, lambda x: np.array([sign * x[0] * (s * (c + d / x[0]))])
    if kind == 2:
        tc, lc, s = params[0], params[1], params[2]

        def rhs(x):
            sn = math.sin(x[0])
            return np.array([sign * s * (x[0] - tc), sign * s * (x[1] - lc) / (sn * sn)])
        return 2, rhs
    raise ValueError(f"unknown kernel family {kind}")


def _rk4(kind, n, rhs, y0, N):
    h = 1.0 / N
    Y = np.empty((N + 1, y0.size))
    Y[0] = y0
    for k in range(N):
        yk = Y[k]
        if not _guard(kind, yk[:n]):
            return Y, k * h, 1
        k1 = rhs(yk)
        stage = yk + 0.5 * h * k1
        if not _guard(kind, stage[:n]):
            return Y, k * h, 1
        k2 = rhs(stage)
        stage = yk + 0.5 * h * k2
        if not _guard(kind, stage[:n]):
            return Y, k * h, 1
        k3 = rhs(stage)
        stage = yk + h * k3
        if not _guard(kind, stage[:n]):
            return Y, k * h, 1
        k4 = rhs(stage)
        yn = yk + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        Y[k + 1] = yn
        if not np.all(np.isfinite(yn)) or not _guard(kind, yn[:n]):
            return Y, (k + 1) * h, 2
    return Y, -1.0, 0


def el_rk4(kind, params, y0, N):
    n, rhs = _make_el_rhs(kind, params)
    y0 = np.asarray(y0, dtype=float)
    if y0.size != 2 * n:
        raise ValueError("state size does not match the chart dimension")
    return _rk4(kind, n, rhs, y0, N)


def flow_rk4(kind, params, x0, sign, N):
    n, rhs = _make_flow_rhs(kind, params, sign)
    x0 = np.asarray(x0, dtype=float)
    if x0.size != n:
        raise ValueError("state size does not match the chart dimension")
    return _rk4(kind, n, rhs, x0, N)
