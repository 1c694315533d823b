"""Two-point boundary-value problems ``q(0) = y, q(1) = z``.

Two independent routes are provided:

* :func:`solve_shooting` -- Newton iteration on the initial covector ``phi0``
  of the Euler-Lagrange flow, with backtracking and a potential-strength
  homotopy as fallback.
* :func:`solve_direct` -- quasi-Newton minimisation of the discretised
  mechanical action over interior nodes, with endpoints pinned.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import fft, optimize

from .checks import Check
from .errors import BlowUpError, DomainError
from .geometry import (
    ChartManifold,
    flat,
    metric_inv_derivative,
    metric_pair,
    potential_differential,
    potential_hessian,
    potential_value,
    scaled_potential,
)
from .dynamics import (
    Trajectory,
    actions_along,
    hamiltonian,
    integrate_el,
    time_grid,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BridgeSpec:
    manifold: ChartManifold
    y: np.ndarray
    z: np.ndarray
    N: int = 1000
    shooting_tol: float = 1e-10
    max_newton: int = 50
    action_tol: float = 1e-6

    def __post_init__(self):
        n = self.manifold.dim
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).reshape(n))
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float).reshape(n))
        if int(self.N) < 2:
            raise ValueError("N must be at least 2")
        for name in ("y", "z"):
            if not self.manifold.admissible(getattr(self, name)):
                raise DomainError(f"endpoint {name}={getattr(self, name).tolist()} is not admissible")


@dataclass(frozen=True)
class BridgeSolution:
    spec: BridgeSpec
    trajectory: Trajectory
    phi0: np.ndarray
    A_oc: float
    A_m: float
    H0: float
    converged: bool
    residual: float
    method: str
    iterations: int = 0
    message: str = ""
    history: list = field(default_factory=list, compare=False)


def _finish(spec, tr, converged, method, iterations, message="", history=None, manifold=None):
    m = spec.manifold if manifold is None else manifold
    A_oc, A_m = actions_along(m, tr)
    return BridgeSolution(
        spec=spec,
        trajectory=tr,
        phi0=tr.phi[0].copy(),
        A_oc=A_oc,
        A_m=A_m,
        H0=hamiltonian(m, tr.states[0]),
        converged=converged,
        residual=float(np.linalg.norm(tr.q[-1] - spec.z)),
        method=method,
        iterations=iterations,
        message=message,
        history=history or [],
    )


def initial_covector(m: ChartManifold, y, z) -> np.ndarray:
    """Flat of the chord velocity plus ``dV(y)``; exact when ``V = 0`` on a flat chart."""
    return flat(m, y, np.asarray(z) - np.asarray(y)) + potential_differential(m, y)


def _newton(m, spec, phi0):
    """Plain damped Newton on ``phi0 -> q(1) - z``; returns (phi0, traj, converged, iters, history)."""
    n, N = m.dim, spec.N

    def shoot(p):
        return integrate_el(m, spec.y, p, N)

    phi = np.asarray(phi0, dtype=float).copy()
    tr = shoot(phi)
    F = tr.q[-1] - spec.z
    history = [float(np.linalg.norm(F))]
    for it in range(1, spec.max_newton + 1):
        if history[-1] <= spec.shooting_tol:
            return phi, tr, True, it - 1, history
        J = np.empty((n, n))
        for j in range(n):
            eps = 1e-6 * max(1.0, abs(phi[j]))
            e = np.zeros(n)
            e[j] = eps
            try:
                J[:, j] = (shoot(phi + e).q[-1] - shoot(phi - e).q[-1]) / (2.0 * eps)
            except BlowUpError:
                J[:, j] = (tr.q[-1] - shoot(phi - e).q[-1]) / eps
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
        lam = 1.0
        for _ in range(31):
            try:
                cand = shoot(phi + lam * step)
                F_cand = cand.q[-1] - spec.z
                if np.linalg.norm(F_cand) < history[-1]:
                    break
            except BlowUpError as exc:
                log.debug("shooting iterate rejected: %s", exc)
            lam *= 0.5
        else:
            return phi, tr, False, it, history
        phi, tr, F = phi + lam * step, cand, F_cand
        history.append(float(np.linalg.norm(F)))
    return phi, tr, history[-1] <= spec.shooting_tol, spec.max_newton, history


def solve_shooting(spec: BridgeSpec, phi0=None, homotopy_steps: int = 5) -> BridgeSolution:
    """Newton shooting on the initial covector.

    Falls back to a homotopy in the potential strength, then to a guess
    taken from a coarse direct solve, when Newton from the chord guess fails.  Non-convergence is reported, not raised.
    """
    m = spec.manifold
    guess = initial_covector(m, spec.y, spec.z) if phi0 is None else np.asarray(phi0, float)
    try:
        phi, tr, ok, its, hist = _newton(m, spec, guess)
    except BlowUpError:
        phi, tr, ok, its, hist = guess, None, False, 0, []
    if ok:
        return _finish(spec, tr, True, "shooting", its, history=hist)

    log.info("Newton shooting failed from the chord guess; trying homotopy")
    total = its
    best = (phi, tr, hist)
    p = initial_covector(scaled_potential(m, 0.0), spec.y, spec.z)
    for lam in np.linspace(0.0, 1.0, homotopy_steps + 1):
        m_lam = scaled_potential(m, lam)
        spec_lam = BridgeSpec(m_lam, spec.y, spec.z, spec.N, spec.shooting_tol, spec.max_newton)
        try:
            p, tr_lam, ok_lam, its_lam, hist_lam = _newton(m_lam, spec_lam, p)
        except BlowUpError:
            ok_lam = False
        if not ok_lam:
            break
        total += its_lam
        if lam == 1.0:
            return _finish(spec, tr_lam, True, "shooting+homotopy", total, history=hist_lam)
    log.info("homotopy failed; seeding Newton from a coarse direct solve")
    try:
        coarse = solve_direct(BridgeSpec(m, spec.y, spec.z, min(spec.N, 200)), gtol=1e-10)
        phi_d, tr_d, ok_d, its_d, hist_d = _newton(m, spec, coarse.phi0)
    except (BlowUpError, DomainError):
        ok_d = False
    if ok_d:
        return _finish(spec, tr_d, True, "shooting+direct-seed", total + its_d, history=hist_d)
    phi, tr, hist = best
    if tr is None:
        tr = integrate_el(m, spec.y, phi, spec.N)
    return _finish(spec, tr, False, "shooting", total,
                   message="Newton shooting did not converge", history=hist)


# --- direct method -------------------------------------------------------


def _node_data(m: ChartManifold, Q: np.ndarray, potential: bool = True):
    n = m.dim
    K = Q.shape[0]
    g_low = np.empty((K, n, n))
    g_up = np.empty((K, n, n))
    T = np.empty((K, n, n, n))
    dV = np.empty((K, n))
    H = np.empty((K, n, n))
    for k, q in enumerate(Q):
        g_low[k], g_up[k] = metric_pair(m, q)
        T[k] = metric_inv_derivative(m, q)
        if potential:
            dV[k] = potential_differential(m, q)
            H[k] = potential_hessian(m, q)
    return g_low, g_up, T, dV, H


def discrete_action(m: ChartManifold, Q: np.ndarray, with_grad: bool = True):
    """Discretised mechanical action of the node path ``Q`` (shape ``(N+1, n)``).

    Kinetic part: ``sum_k 1/2 dQ_k . g(mid_k) . dQ_k / h`` with the lower
    metric taken at segment midpoints.  Potential part: trapezoid sum of
    ``1/2 |grad V|^2`` over the nodes.  Returns ``(value, gradient)`` with the
    gradient taken with respect to all nodes.
    """
    Q = np.asarray(Q, dtype=float)
    N = Q.shape[0] - 1
    h = 1.0 / N
    _, g_up, T, dV, H = _node_data(m, Q)
    D = np.diff(Q, axis=0)
    mid = 0.5 * (Q[:-1] + Q[1:])
    g_mid, _, T_mid, _, _ = _node_data(m, mid, potential=False)
    GD = np.einsum("kij,kj->ki", g_mid, D)
    kinetic = 0.5 * np.sum(D * GD) / h
    gdV = np.einsum("kij,kj->ki", g_up, dV)
    U = 0.5 * np.sum(dV * gdV, axis=1)
    w = np.full(N + 1, h)
    w[0] = w[-1] = 0.5 * h
    value = kinetic + float(w @ U)
    if not with_grad:
        return value, None

    grad = np.zeros_like(Q)
    grad[:-1] -= GD / h
    grad[1:] += GD / h
    # d_i g_{ab} = -g_{aj} (d_i g^{jk}) g_{kb}
    dG = -np.einsum("kaj,kijl,klb->kiab", g_mid, T_mid, g_mid)
    quad = 0.25 * np.einsum("ka,kiab,kb->ki", D, dG, D) / h
    grad[:-1] += quad
    grad[1:] += quad
    dU = np.einsum("kij,kj->ki", H, gdV) + 0.5 * np.einsum("ka,kiab,kb->ki", dV, T, dV)
    grad += w[:, None] * dU
    return value, grad


def _sine_basis(N: int):
    j = np.arange(1, N)
    lam = 2.0 - 2.0 * np.cos(np.pi * j / N)
    return np.sqrt(1.0 / N) / np.sqrt(lam)


def solve_direct(spec: BridgeSpec, Q0=None, gtol: float = 1e-12, maxiter: int = 20000) -> BridgeSolution:
    """Minimise the discrete mechanical action over interior nodes.

    The interior displacement from the initial guess is expanded in the
    discrete sine basis scaled by the flat kinetic Hessian, which makes the
    problem well conditioned for L-BFGS at large ``N``.
    """
    m, N = spec.manifold, spec.N
    t = time_grid(N)
    if Q0 is None:
        Q0 = spec.y[None, :] + t[:, None] * (spec.z - spec.y)[None, :]
    Q0 = np.array(Q0, dtype=float)
    Q0[0], Q0[-1] = spec.y, spec.z
    scale = _sine_basis(N)[:, None]
    shape = (N - 1, m.dim)

    def to_path(c):
        Q = Q0.copy()
        Q[1:-1] += fft.dst(scale * c.reshape(shape), type=1, axis=0, norm="ortho")
        return Q

    def objective(c):
        try:
            val, grad = discrete_action(m, to_path(c))
        except DomainError:
            return np.inf, np.zeros_like(c)
        gc = scale * fft.dst(grad[1:-1], type=1, axis=0, norm="ortho")
        return val, gc.ravel()

    res = optimize.minimize(objective, np.zeros(shape).ravel(), jac=True, method="L-BFGS-B",
                            options={"maxiter": maxiter, "gtol": gtol, "ftol": 1e-16,
                                     "maxcor": 30})
    Q = to_path(res.x)
    _, grad = discrete_action(m, Q)
    el_residual = float(np.abs(grad[1:-1]).max() / (1.0 / N))
    converged = bool(res.success) or el_residual <= 1e-8
    phi = reconstruct_covectors(m, Q)
    tr = Trajectory(t, Q, phi)
    return _finish(spec, tr, converged, "direct", int(res.nit),
                   message=f"{res.message}; discrete EL residual {el_residual:.3e}")


def reconstruct_covectors(m: ChartManifold, Q: np.ndarray) -> np.ndarray:
    """``phi = flat(v + grad V) = flat(v) + dV`` with ``v`` from second-order differences."""
    N = Q.shape[0] - 1
    V = np.gradient(Q, 1.0 / N, axis=0, edge_order=2)
    return np.array([flat(m, q, v) + potential_differential(m, q) for q, v in zip(Q, V)])


def discrete_el_residual(m: ChartManifold, Q: np.ndarray) -> float:
    """Max-norm of the discrete action gradient at interior nodes, divided by ``h``."""
    N = Q.shape[0] - 1
    _, grad = discrete_action(m, Q)
    return float(np.abs(grad[1:-1]).max() * N)


# --- cross-checks -------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def equivalence_report(sol_oc: BridgeSolution, sol_m: BridgeSolution,
                       tol_path: float = 1e-5, tol_gap: float = 1e-6,
                       tol_flip: float = 1e-6) -> EquivalenceReport:
    """Cross-check the control and mechanical formulations on one bridge.

    (i) path agreement between the two solutions, (ii) the boundary identity
    ``A_oc - A_m = V(z) - V(y)``, and (iii) that the problem with ``V -> -V``
    is solved by the same path.
    """
    spec = sol_oc.spec
    m = spec.manifold
    path_gap = float(np.abs(sol_oc.trajectory.q - sol_m.trajectory.q).max())
    dV = potential_value(m, spec.z) - potential_value(m, spec.y)
    identity_gap = abs(sol_oc.A_oc - sol_oc.A_m - dV)
    flipped = solve_shooting(BridgeSpec(scaled_potential(m, -1.0), spec.y, spec.z, spec.N,
                                        spec.shooting_tol, spec.max_newton))
    flip_gap = float(np.abs(flipped.trajectory.q - sol_oc.trajectory.q).max())
    if not flipped.converged:
        flip_gap = float("inf")
    return EquivalenceReport([
        Check("path_agreement", path_gap, tol_path),
        Check("action_identity_gap", identity_gap, tol_gap),
        Check("sign_flip_path_gap", flip_gap, tol_flip),
    ])
