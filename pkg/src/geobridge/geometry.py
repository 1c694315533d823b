"""Riemannian primitives on a single global coordinate chart.

A :class:`ChartManifold` bundles an inverse metric ``g^{jk}(q)`` and a scalar
potential ``V(q)``.  Derivatives are taken from analytic callbacks when the
chart supplies them and from central finite differences otherwise.

Index conventions used throughout the package:

* ``d_metric_inv(q)[i, j, k] = d_i g^{jk}``
* ``christoffels(m, q)[k, i, j] = Gamma^k_{ij}``
* ``grad_field_jacobian(m, q)[i, k] = d_i (g^{kj} d_j V)``
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateMetricError

FD_REL_STEP = 1e-5


@dataclass(frozen=True)
class ChartManifold:
    """A manifold with potential, described on one global chart.

    Parameters
    ----------
    dim : int
        Number of coordinates.
    metric_inv : callable
        ``q -> (dim, dim)`` inverse metric ``g^{jk}(q)``.
    potential : callable
        ``q -> float``.
    dV, hessV, d_metric_inv : callable, optional
        Analytic first and second derivatives of ``V`` and the first
        derivative of ``g^{jk}``.  Missing ones fall back to finite
        differences.
    domain_guard : callable, optional
        ``q -> bool``; False marks an inadmissible point.
    sample_box : (lower, upper), optional
        Box used to draw random admissible sample points.
    kernel : (family, params), optional
        Closed-form description used by the compiled RK4 loops; charts built
        from arbitrary callbacks leave it unset.  The last parameter scales
        the potential.
    """

    dim: int
    metric_inv: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], float]
    dV: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessV: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d_metric_inv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain_guard: Optional[Callable[[np.ndarray], bool]] = None
    sample_box: Optional[tuple] = None
    kernel: Optional[tuple] = None
    name: str = "chart"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be a positive integer")

    @property
    def has_analytic_derivatives(self) -> bool:
        return (self.dV is not None and self.hessV is not None
                and self.d_metric_inv is not None)

    def admissible(self, q) -> bool:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dim,) or not np.all(np.isfinite(q)):
            return False
        return self.domain_guard is None or bool(self.domain_guard(q))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``count`` admissible points uniformly from the sample box."""
        if self.sample_box is None:
            lo, hi = -np.ones(self.dim), np.ones(self.dim)
        else:
            lo, hi = (np.asarray(b, dtype=float) for b in self.sample_box)
        out = []
        while len(out) < count:
            q = rng.uniform(lo, hi)
            if self.admissible(q):
                out.append(q)
        return np.array(out)


def fd_step(q: np.ndarray) -> np.ndarray:
    return FD_REL_STEP * np.maximum(1.0, np.abs(q))


def central_jacobian(f, q: np.ndarray) -> np.ndarray:
    """Central-difference derivative of ``f`` stacked along a new leading axis.

    Returns ``J`` with ``J[i, ...] = d f(q) / d q^i``.
    """
    q = np.asarray(q, dtype=float)
    h = fd_step(q)
    rows = []
    for i in range(q.size):
        e = np.zeros_like(q)
        e[i] = h[i]
        rows.append((np.asarray(f(q + e), dtype=float)
                     - np.asarray(f(q - e), dtype=float)) / (2.0 * h[i]))
    return np.array(rows)


def _check_point(m: ChartManifold, q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if not m.admissible(q):
        raise DegenerateMetricError(
            f"degenerate metric: q={q.tolist()} is outside the chart of {m.name!r}")
    return q


def metric_pair(m: ChartManifold, q):
    """Return ``(g_lower, g_upper)`` at ``q``.

    Raises :class:`DegenerateMetricError` when ``q`` is inadmissible or
    ``g^{jk}(q)`` is not symmetric positive-definite.
    """
    q = _check_point(m, q)
    g_up = np.asarray(m.metric_inv(q), dtype=float).reshape(m.dim, m.dim)
    if not np.all(np.isfinite(g_up)):
        raise DegenerateMetricError(f"degenerate metric at q={q.tolist()}: non-finite entries")
    if m.dim == 1:
        if not g_up[0, 0] > 0.0:
            raise DegenerateMetricError(
                f"degenerate metric at q={q.tolist()}: not positive-definite")
        return 1.0 / g_up, g_up
    scale = max(1.0, np.abs(g_up).max())
    if np.abs(g_up - g_up.T).max() > 1e-12 * scale:
        raise DegenerateMetricError(f"degenerate metric at q={q.tolist()}: not symmetric")
    g_up = 0.5 * (g_up + g_up.T)
    try:
        np.linalg.cholesky(g_up)
    except np.linalg.LinAlgError:
        raise DegenerateMetricError(
            f"degenerate metric at q={q.tolist()}: not positive-definite") from None
    g_low = np.linalg.inv(g_up)
    return 0.5 * (g_low + g_low.T), g_up


def metric_upper_along(m: ChartManifold, Q) -> np.ndarray:
    """Stacked ``g^{jk}`` at the rows of ``Q``, validated in one batch."""
    Q = np.asarray(Q, dtype=float).reshape(-1, m.dim)
    for q in Q:
        _check_point(m, q)
    G = np.array([np.asarray(m.metric_inv(q), dtype=float).reshape(m.dim, m.dim) for q in Q])
    if not np.all(np.isfinite(G)):
        raise DegenerateMetricError("degenerate metric along path: non-finite entries")
    scale = np.maximum(1.0, np.abs(G).max(axis=(1, 2)))
    if np.any(np.abs(G - G.transpose(0, 2, 1)).max(axis=(1, 2)) > 1e-12 * scale):
        raise DegenerateMetricError("degenerate metric along path: not symmetric")
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise DegenerateMetricError("degenerate metric along path: not positive-definite") from None
    return G


def potential_value(m: ChartManifold, q) -> float:
    return float(m.potential(np.asarray(q, dtype=float)))


def potential_differential(m: ChartManifold, q) -> np.ndarray:
    """Covector ``d_i V(q)``."""
    q = np.asarray(q, dtype=float)
    if m.dV is not None:
        return np.asarray(m.dV(q), dtype=float).reshape(m.dim)
    return central_jacobian(lambda x: m.potential(x), q).reshape(m.dim)


def potential_hessian(m: ChartManifold, q) -> np.ndarray:
    """Matrix ``d^2_{ij} V(q)``."""
    q = np.asarray(q, dtype=float)
    if m.hessV is not None:
        return np.asarray(m.hessV(q), dtype=float).reshape(m.dim, m.dim)
    H = central_jacobian(lambda x: potential_differential(m, x), q)
    return 0.5 * (H + H.T)


def metric_inv_derivative(m: ChartManifold, q) -> np.ndarray:
    """3-tensor ``T[i, j, k] = d_i g^{jk}(q)``."""
    q = np.asarray(q, dtype=float)
    if m.d_metric_inv is not None:
        return np.asarray(m.d_metric_inv(q), dtype=float).reshape(m.dim, m.dim, m.dim)
    return central_jacobian(lambda x: np.atleast_2d(m.metric_inv(x)), q)


def grad_potential(m: ChartManifold, q) -> np.ndarray:
    """Riemannian gradient ``(grad V)^j = g^{jk} d_k V``."""
    _, g_up = metric_pair(m, q)
    return g_up @ potential_differential(m, q)


def grad_field_jacobian(m: ChartManifold, q) -> np.ndarray:
    """``W[i, k] = d_i (g^{kj} d_j V)``, which must be constant for the Hopf-Cole reduction."""
    _, g_up = metric_pair(m, q)
    return _grad_field_jacobian(m, q, g_up, potential_differential(m, q))[0]


def _grad_field_jacobian(m, q, g_up, dV):
    T = metric_inv_derivative(m, q)
    H = potential_hessian(m, q)
    return np.einsum("ikj,j->ik", T, dV) + H @ g_up, T


def christoffels(m: ChartManifold, q) -> np.ndarray:
    """Christoffel symbols of the second kind, ``G[k, i, j] = Gamma^k_{ij}``."""
    g_low, g_up = metric_pair(m, q)
    T = metric_inv_derivative(m, q)
    # d_i g_{ab} = -g_{aj} (d_i g^{jk}) g_{kb}
    dg_low = -np.einsum("aj,ijk,kb->iab", g_low, T, g_low)
    # Gamma^k_{ij} = 1/2 g^{kl} (d_i g_{lj} + d_j g_{li} - d_l g_{ij})
    bracket = (np.einsum("ilj->lij", dg_low) + np.einsum("jli->lij", dg_low)
               - dg_low)
    return 0.5 * np.einsum("kl,lij->kij", g_up, bracket)


def flat(m: ChartManifold, q, b) -> np.ndarray:
    """Lower an index: ``phi_i = g_{ij} b^j``."""
    g_low, _ = metric_pair(m, q)
    return g_low @ np.asarray(b, dtype=float)


def sharp(m: ChartManifold, q, phi) -> np.ndarray:
    """Raise an index: ``b^j = g^{jk} phi_k``."""
    _, g_up = metric_pair(m, q)
    return g_up @ np.asarray(phi, dtype=float)


@dataclass(frozen=True)
class Tangent:
    base: np.ndarray
    components: np.ndarray


@dataclass(frozen=True)
class Cotangent:
    base: np.ndarray
    components: np.ndarray


def musical(m: ChartManifold, x):
    """Map a :class:`Tangent` to its :class:`Cotangent` and vice versa."""
    if isinstance(x, Tangent):
        return Cotangent(x.base, flat(m, x.base, x.components))
    if isinstance(x, Cotangent):
        return Tangent(x.base, sharp(m, x.base, x.components))
    raise TypeError(f"expected Tangent or Cotangent, got {type(x).__name__}")


def scaled_potential(m: ChartManifold, scale: float) -> ChartManifold:
    """Same chart with ``V`` replaced by ``scale * V``."""
    s = float(scale)

    def wrap(f):
        return None if f is None else (lambda q: s * np.asarray(f(q), dtype=float))

    kernel = None
    if m.kernel is not None:
        family, params = m.kernel
        kernel = (family, params[:-1] + (params[-1] * s,))
    return replace(
        m,
        kernel=kernel,
        potential=lambda q: s * float(m.potential(q)),
        dV=wrap(m.dV),
        hessV=wrap(m.hessV),
        name=f"{m.name}*{s:g}",
    )
