"""Euler-Lagrange flow in ``(q, phi)`` variables, gradient flows and actions.

``phi`` is the covector obtained by lowering the control ``b``.  In these
variables the optimal-control Euler-Lagrange system reads::

    dq^j/dt  = g^{jl} (phi_l - d_l V)
    dphi_i/dt = -1/2 (d_i g^{jk}) phi_j phi_k + d_i (g^{jk} d_j V) phi_k

which is the Hamiltonian flow of
``H(q, phi) = 1/2 g^{jk} phi_j phi_k - g^{jk} d_j V phi_k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import BlowUpError, DomainError
from .geometry import (
    ChartManifold,
    _grad_field_jacobian,
    metric_pair,
    metric_upper_along,
    potential_differential,
    potential_value,
)


@dataclass(frozen=True)
class PhaseState:
    t: float
    q: np.ndarray
    phi: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Phase states on the uniform grid ``t_k = k / N``.

    ``q`` and ``phi`` have shape ``(N + 1, n)``.
    """

    t: np.ndarray
    q: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        if self.t.ndim != 1 or self.t.size < 3:
            raise ValueError("a trajectory needs at least N = 2 steps")
        if self.q.shape != self.phi.shape or self.q.shape[0] != self.t.size:
            raise ValueError("q, phi and t have inconsistent shapes")
        if np.any(np.diff(self.t) <= 0) or self.t[0] != 0.0 or self.t[-1] != 1.0:
            raise ValueError("times must increase strictly from 0 to 1")

    @property
    def N(self) -> int:
        return self.t.size - 1

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def states(self):
        return [PhaseState(float(t), q, p) for t, q, p in zip(self.t, self.q, self.phi)]

    def controls(self, m: ChartManifold) -> np.ndarray:
        """``b = sharp(phi)`` at every node."""
        return np.array([metric_pair(m, q)[1] @ p for q, p in zip(self.q, self.phi)])

    def velocities(self, m: ChartManifold) -> np.ndarray:
        """``v = b - grad V`` at every node."""
        out = []
        for q, p in zip(self.q, self.phi):
            _, g_up = metric_pair(m, q)
            out.append(g_up @ (p - potential_differential(m, q)))
        return np.array(out)


def time_grid(N: int) -> np.ndarray:
    if int(N) < 2:
        raise ValueError(f"need N >= 2 time steps, got {N}")
    return np.linspace(0.0, 1.0, int(N) + 1)


def _el_rhs(m: ChartManifold, q: np.ndarray, phi: np.ndarray):
    _, g_up = metric_pair(m, q)
    dV = potential_differential(m, q)
    W, T = _grad_field_jacobian(m, q, g_up, dV)
    dq = g_up @ (phi - dV)
    dphi = -0.5 * np.einsum("ijk,j,k->i", T, phi, phi) + W @ phi
    return dq, dphi


def el_vector_field(m: ChartManifold, s: PhaseState):
    """Return ``(dq/dt, dphi/dt)`` at a phase state."""
    q = np.asarray(s.q, dtype=float).reshape(m.dim)
    phi = np.asarray(s.phi, dtype=float).reshape(m.dim)
    return _el_rhs(m, q, phi)


def rk4(f: Callable, y0: np.ndarray, N: int, admissible=None) -> np.ndarray:
    """Classical fourth-order Runge-Kutta on ``[0, 1]`` with ``N`` steps.

    ``f(t, y)`` may raise :class:`DomainError`; that and non-finite values
    are reported as :class:`BlowUpError` carrying the offending time.
    """
    t = time_grid(N)
    h = 1.0 / N
    y = np.empty((N + 1,) + np.shape(y0))
    y[0] = y0
    for k in range(N):
        tk, yk = t[k], y[k]
        try:
            k1 = f(tk, yk)
            k2 = f(tk + 0.5 * h, yk + 0.5 * h * k1)
            k3 = f(tk + 0.5 * h, yk + 0.5 * h * k2)
            k4 = f(tk + h, yk + h * k3)
        except DomainError as exc:
            raise BlowUpError(f"integration left the domain near t={tk:.6g}: {exc}", tk) from exc
        y_next = yk + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y_next)) or (admissible is not None and not admissible(y_next)):
            raise BlowUpError(f"integration blew up at t={t[k + 1]:.6g}", float(t[k + 1]))
        y[k + 1] = y_next
    return y


def _run_kernel(func, m, y0, N, *extra):
    family, params = m.kernel
    y, fail_time, status = func(family, np.asarray(params, dtype=float),
                                np.ascontiguousarray(y0, dtype=float), *extra, int(N))
    if status == 1:
        raise BlowUpError(f"integration left the domain near t={fail_time:.6g}", fail_time)
    if status == 2:
        raise BlowUpError(f"integration blew up at t={fail_time:.6g}", fail_time)
    return y


def _use_kernel(m: ChartManifold, engine: str) -> bool:
    if engine not in ("auto", "kernel", "callbacks"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine == "kernel" and m.kernel is None:
        raise ValueError(f"chart {m.name!r} has no closed-form kernel")
    return engine != "callbacks" and m.kernel is not None


def integrate_el(m: ChartManifold, q0, phi0, N: int, engine: str = "auto") -> Trajectory:
    """Integrate the Euler-Lagrange flow from ``(q0, phi0)`` at ``t = 0``.

    ``engine="auto"`` runs the closed-form RK4 kernel when the chart has one
    and the generic callback loop otherwise.
    """
    n = m.dim
    q0 = np.asarray(q0, dtype=float).reshape(n)
    phi0 = np.asarray(phi0, dtype=float).reshape(n)
    if not m.admissible(q0):
        raise DomainError(f"initial point {q0.tolist()} is not admissible")
    if _use_kernel(m, engine):
        y = _run_kernel(kernels.el_rk4, m, np.concatenate([q0, phi0]), N)
        return Trajectory(time_grid(N), y[:, :n], y[:, n:])

    def f(_t, y):
        dq, dphi = _el_rhs(m, y[:n], y[n:])
        return np.concatenate([dq, dphi])

    y = rk4(f, np.concatenate([q0, phi0]), N, admissible=lambda y: m.admissible(y[:n]))
    return Trajectory(time_grid(N), y[:, :n], y[:, n:])


def integrate_controlled(m: ChartManifold, q0, control: Callable, N: int) -> Trajectory:
    """Integrate ``dq/dt = sharp(phi(t)) - grad V(q)`` for a prescribed covector path.

    Produces admissible but generally non-optimal trajectories.
    """
    n = m.dim
    q0 = np.asarray(q0, dtype=float).reshape(n)

    def f(t, q):
        _, g_up = metric_pair(m, q)
        return g_up @ (np.asarray(control(t), dtype=float) - potential_differential(m, q))

    q = rk4(f, q0, N, admissible=m.admissible)
    t = time_grid(N)
    phi = np.array([np.asarray(control(tk), dtype=float).reshape(n) for tk in t])
    return Trajectory(t, q, phi)


def gradient_flow(m: ChartManifold, x0, sign: int, N: int, engine: str = "auto") -> np.ndarray:
    """Integrate ``dx/dt = sign * grad V(x)`` over ``[0, 1]``; returns ``(N + 1, n)``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    x0 = np.asarray(x0, dtype=float).reshape(m.dim)
    if not m.admissible(x0):
        raise DomainError(f"initial point {x0.tolist()} is not admissible")
    if _use_kernel(m, engine):
        return _run_kernel(kernels.flow_rk4, m, x0, N, float(sign))

    def f(_t, x):
        _, g_up = metric_pair(m, x)
        return sign * (g_up @ potential_differential(m, x))

    return rk4(f, x0, N, admissible=m.admissible)


def hamiltonian(m: ChartManifold, s: PhaseState) -> float:
    """``H = 1/2 |b|^2 - <dV, b>``, equal to ``1/2 |v|^2 - 1/2 |grad V|^2``."""
    q = np.asarray(s.q, dtype=float)
    phi = np.asarray(s.phi, dtype=float)
    _, g_up = metric_pair(m, q)
    dV = potential_differential(m, q)
    return float(0.5 * phi @ g_up @ phi - dV @ g_up @ phi)


def hamiltonian_along(m: ChartManifold, tr: Trajectory) -> np.ndarray:
    return np.array([hamiltonian(m, s) for s in tr.states])


def action_densities(m: ChartManifold, tr: Trajectory):
    """Pointwise integrands ``1/2|b|^2`` and ``1/2|v|^2 + 1/2|grad V|^2``."""
    G = metric_upper_along(m, tr.q)
    dV = np.array([potential_differential(m, q) for q in tr.q])
    w = tr.phi - dV  # flat(v)

    def quad(a):
        return np.einsum("ki,kij,kj->k", a, G, a)

    return 0.5 * quad(tr.phi), 0.5 * quad(w) + 0.5 * quad(dV)


def actions_along(m: ChartManifold, tr: Trajectory):
    """Trapezoid quadrature of the control action and the mechanical action."""
    oc, mech = action_densities(m, tr)
    return float(np.trapezoid(oc, tr.t)), float(np.trapezoid(mech, tr.t))


def potential_gap(m: ChartManifold, tr: Trajectory) -> float:
    """``V(q(1)) - V(q(0))``."""
    return potential_value(m, tr.q[-1]) - potential_value(m, tr.q[0])
