"""Built-in charts, addressable by name through :func:`make_chart`."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .errors import ConfigError
from .geometry import ChartManifold
from .kernels import CONE, EUCLID, SPHERE


def euclidean(n=1, A=None, f=None) -> ChartManifold:
    """Flat ``R^n`` with ``V(q) = 1/2 q.A.q + f.q``.

    ``A`` defaults to the identity; pass ``A=0`` for the geodesic case.
    """
    n = int(n)
    if A is None:
        A = np.eye(n)
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A * np.eye(n)
    A = np.atleast_2d(A)
    if A.shape != (n, n):
        raise ConfigError(f"A must be {n}x{n}, got shape {A.shape}")
    if not np.allclose(A, A.T):
        raise ConfigError("A must be symmetric")
    f = np.zeros(n) if f is None else np.asarray(f, dtype=float).reshape(n)
    eye = np.eye(n)
    zeros3 = np.zeros((n, n, n))
    return ChartManifold(
        dim=n,
        metric_inv=lambda q: eye,
        potential=lambda q: 0.5 * q @ A @ q + f @ q,
        dV=lambda q: A @ q + f,
        hessV=lambda q: A,
        d_metric_inv=lambda q: zeros3,
        sample_box=(-2.0 * np.ones(n), 2.0 * np.ones(n)),
        kernel=(EUCLID, (float(n), *A.ravel().tolist(), *f.tolist(), 1.0)),
        name="euclidean",
        params={"n": n, "A": A.tolist(), "f": f.tolist()},
    )


def linear_potential(f=(1.0, -0.5)) -> ChartManifold:
    """Flat chart with ``V(q) = f.q``: constant gradient, zero Hessian."""
    f = np.atleast_1d(np.asarray(f, dtype=float))
    m = euclidean(n=f.size, A=np.zeros((f.size, f.size)), f=f)
    return replace(m, name="linear-potential", params={"f": f.tolist()})


def cone_entropy(c=1.0, d=1.0) -> ChartManifold:
    """Half-line ``q > 0`` with ``g^{11} = q`` and ``V = c q + d ln q``.

    Both ``d_1 g^{11} = 1`` and ``d_1 (g^{11} V') = c`` are constant, which is
    the one-dimensional picture of the entropy on densities.
    """
    c, d = float(c), float(d)
    return ChartManifold(
        dim=1,
        metric_inv=lambda q: np.array([[q[0]]]),
        potential=lambda q: c * q[0] + d * np.log(q[0]),
        dV=lambda q: np.array([c + d / q[0]]),
        hessV=lambda q: np.array([[-d / q[0] ** 2]]),
        d_metric_inv=lambda q: np.ones((1, 1, 1)),
        domain_guard=lambda q: q[0] > 0.0,
        sample_box=(np.array([0.05]), np.array([3.0])),
        kernel=(CONE, (c, d, 1.0)),
        name="cone-entropy",
        params={"c": c, "d": d},
    )


def sphere_polar(center=(0.0, 0.0)) -> ChartManifold:
    """Unit sphere in polar angles ``(theta, lon)`` with a quadratic potential.

    ``g^{-1} = diag(1, 1/sin^2 theta)`` varies with ``theta``, so the
    constant-derivative assumption on the metric fails here.
    """
    center = np.asarray(center, dtype=float).reshape(2)

    def metric_inv(q):
        return np.diag([1.0, 1.0 / np.sin(q[0]) ** 2])

    def d_metric_inv(q):
        T = np.zeros((2, 2, 2))
        T[0, 1, 1] = -2.0 * np.cos(q[0]) / np.sin(q[0]) ** 3
        return T

    return ChartManifold(
        dim=2,
        metric_inv=metric_inv,
        potential=lambda q: 0.5 * np.sum((q - center) ** 2),
        dV=lambda q: q - center,
        hessV=lambda q: np.eye(2),
        d_metric_inv=d_metric_inv,
        domain_guard=lambda q: 0.0 < q[0] < np.pi,
        sample_box=(np.array([0.3, -np.pi]), np.array([np.pi - 0.3, np.pi])),
        kernel=(SPHERE, (*center.tolist(), 1.0)),
        name="sphere-polar",
        params={"center": center.tolist()},
    )


CHARTS = {
    "euclidean": euclidean,
    "cone-entropy": cone_entropy,
    "linear-potential": linear_potential,
    "sphere-polar": sphere_polar,
}


def make_chart(name: str, **params) -> ChartManifold:
    try:
        factory = CHARTS[name]
    except KeyError:
        raise ConfigError(f"unknown chart {name!r}; known: {sorted(CHARTS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for chart {name!r}: {exc}") from None
