"""Geometric Hopf-Cole transformation.

Under constant ``d_i g^{jk}`` and constant ``d_i (g^{jk} d_k V)`` on the
chart, an invertible ``dV`` and an injective Hessian, the change of variables

    2 dV(eta)      = phi
    -2 dV(eta_star) = phi - 2 dV(q)

turns the Euler-Lagrange flow into two decoupled gradient flows,
``d eta/dt = +grad V(eta)`` and ``d eta_star/dt = -grad V(eta_star)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bvp import BridgeSolution, BridgeSpec, _finish
from .dynamics import Trajectory, gradient_flow, time_grid, _el_rhs
from .errors import DomainError, HypothesisError, NewtonError
from .geometry import (
    ChartManifold,
    grad_field_jacobian,
    grad_potential,
    metric_inv_derivative,
    potential_differential,
    potential_hessian,
)

log = logging.getLogger(__name__)

ANALYTIC_TOL = 1e-8
FD_TOL = 1e-4
SINGULAR_TOL = 1e-8


@dataclass(frozen=True)
class AssumptionReport:
    metric_ok: bool
    metric_deviation: float
    potential_ok: bool
    potential_deviation: float
    dV_invertible: bool
    hessian_injective: bool
    hessian_min_singular: float
    tol: float
    sample_points: np.ndarray = field(repr=False)

    @property
    def assumptions_ok(self) -> bool:
        return self.metric_ok and self.potential_ok

    @property
    def theorem_ok(self) -> bool:
        return self.assumptions_ok and self.dV_invertible and self.hessian_injective

    def as_dict(self) -> dict:
        return {
            "metric_ok": self.metric_ok,
            "metric_deviation": self.metric_deviation,
            "potential_ok": self.potential_ok,
            "potential_deviation": self.potential_deviation,
            "dV_invertible": self.dV_invertible,
            "hessian_injective": self.hessian_injective,
            "hessian_min_singular": self.hessian_min_singular,
            "tol": self.tol,
            "n_samples": int(len(self.sample_points)),
        }


@dataclass(frozen=True)
class HopfColePair:
    t: np.ndarray
    eta: np.ndarray
    eta_star: np.ndarray
    residual_eta: float
    residual_eta_star: float

    @property
    def flow_residual(self) -> float:
        return max(self.residual_eta, self.residual_eta_star)


def _spread(values: np.ndarray) -> float:
    """Largest entrywise max-minus-min across samples (max pairwise deviation)."""
    return float(np.max(values.max(axis=0) - values.min(axis=0)))


def invert_dV(m: ChartManifold, target, start, tol: float = 1e-13, max_iter: int = 100,
              check_domain: bool = True) -> np.ndarray:
    """Solve ``dV(x) = target`` by Newton with step halving.

    Steps are halved until the iterate is admissible and the residual
    decreases.  Raises :class:`NewtonError` on failure.
    """
    target = np.asarray(target, dtype=float).reshape(m.dim)
    x = np.asarray(start, dtype=float).reshape(m.dim).copy()
    if check_domain and not m.admissible(x):
        raise NewtonError(f"Newton start {x.tolist()} is not admissible")
    scale = max(1.0, float(np.abs(target).max()))
    r = potential_differential(m, x) - target
    for _ in range(max_iter):
        rn = float(np.abs(r).max())
        if rn <= tol * scale:
            return x
        H = potential_hessian(m, x)
        try:
            step = np.linalg.solve(H, -r)
        except np.linalg.LinAlgError:
            raise NewtonError("singular Hessian during dV inversion") from None
        if not np.all(np.isfinite(step)):
            raise NewtonError("singular Hessian during dV inversion")
        lam = 1.0
        for _ in range(60):
            cand = x + lam * step
            if m.admissible(cand):
                r_cand = potential_differential(m, cand) - target
                if float(np.abs(r_cand).max()) < rn:
                    break
            lam *= 0.5
        else:
            if rn <= 1e3 * tol * scale:
                return x
            raise NewtonError(f"line search failed in dV inversion (residual {rn:.3e})")
        if np.abs(cand - x).max() <= 1e-16 * max(1.0, float(np.abs(x).max())):
            return cand
        x, r = cand, r_cand
    if float(np.abs(r).max()) <= 1e3 * tol * scale:
        return x
    raise NewtonError(f"dV inversion did not converge (residual {float(np.abs(r).max()):.3e})")


def _invert_with_guesses(m, target, guesses):
    err = None
    for g in guesses:
        if g is None or not m.admissible(g):
            continue
        try:
            return invert_dV(m, target, g)
        except NewtonError as exc:
            err = exc
    raise NewtonError(f"dV inversion failed from every start: {err}")


def check_assumptions(m: ChartManifold, sample=None, tol: float = None, n_samples: int = 20,
                      seed: int = 0) -> AssumptionReport:
    """Sample-based check of the hypotheses behind the Hopf-Cole transformation."""
    rng = np.random.default_rng(seed)
    if sample is None:
        sample = m.sample(n_samples, rng)
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    if len(sample) < 10:
        raise ValueError("need at least 10 sample points")
    for q in sample:
        if not m.admissible(q):
            raise DomainError(f"sample point {q.tolist()} is not admissible")
    if tol is None:
        tol = ANALYTIC_TOL if m.has_analytic_derivatives else FD_TOL

    T = np.array([metric_inv_derivative(m, q) for q in sample])
    W = np.array([grad_field_jacobian(m, q) for q in sample])
    metric_dev = _spread(T)
    potential_dev = _spread(W)

    sv_min = min(float(np.linalg.svd(potential_hessian(m, q), compute_uv=False).min())
                 for q in sample)
    injective = sv_min > SINGULAR_TOL

    invertible = True
    for i, q in enumerate(sample):
        start = sample[(i + 1) % len(sample)]
        try:
            x = invert_dV(m, potential_differential(m, q), start)
        except NewtonError:
            invertible = False
            break
        if np.abs(x - q).max() > 1e-6 * max(1.0, float(np.abs(q).max())):
            invertible = False
            break

    return AssumptionReport(
        metric_ok=metric_dev <= tol,
        metric_deviation=metric_dev,
        potential_ok=potential_dev <= tol,
        potential_deviation=potential_dev,
        dV_invertible=invertible,
        hessian_injective=injective,
        hessian_min_singular=sv_min,
        tol=float(tol),
        sample_points=sample,
    )


def _require_hypotheses(m, check, seed):
    if not check:
        return
    rep = check_assumptions(m, seed=seed)
    if not rep.theorem_ok:
        failed = [k for k in ("metric_ok", "potential_ok", "dV_invertible", "hessian_injective")
                  if not getattr(rep, k)]
        raise HypothesisError(f"Hopf-Cole hypotheses fail for {m.name!r}: {', '.join(failed)}")


def flow_residuals(m: ChartManifold, t: np.ndarray, eta: np.ndarray, eta_star: np.ndarray):
    """Max-norm residuals of ``eta' = grad V(eta)`` and ``eta_star' = -grad V(eta_star)``.

    Time derivatives use second-order finite differences on the grid.
    """
    d_eta = np.gradient(eta, t, axis=0, edge_order=2)
    d_star = np.gradient(eta_star, t, axis=0, edge_order=2)
    r1 = max(float(np.abs(d - grad_potential(m, x)).max()) for d, x in zip(d_eta, eta))
    r2 = max(float(np.abs(d + grad_potential(m, x)).max()) for d, x in zip(d_star, eta_star))
    return r1, r2


def hopf_cole_forward(m: ChartManifold, tr: Trajectory, check: bool = True,
                      seed: int = 0) -> HopfColePair:
    """Map a phase trajectory to the pair ``(eta, eta_star)`` node by node.

    With ``check=True`` the hypotheses are verified first and a
    :class:`HypothesisError` is raised when they fail.  ``check=False``
    forces the transformation, which is how negative cases are measured.
    """
    _require_hypotheses(m, check, seed)
    eta, eta_star = [], []
    prev_e = prev_s = None
    for k, (q, phi) in enumerate(zip(tr.q, tr.phi)):
        try:
            e = _invert_with_guesses(m, 0.5 * phi, [prev_e, q])
            s = _invert_with_guesses(m, potential_differential(m, q) - 0.5 * phi,
                                     [prev_s, q - e, q])
        except NewtonError as exc:
            raise NewtonError(f"Hopf-Cole inversion failed at t={tr.t[k]:.6g}: {exc}") from exc
        eta.append(e)
        eta_star.append(s)
        prev_e, prev_s = e, s
    eta, eta_star = np.array(eta), np.array(eta_star)
    r1, r2 = flow_residuals(m, tr.t, eta, eta_star)
    return HopfColePair(tr.t, eta, eta_star, r1, r2)


def reconstruct(m: ChartManifold, eta, eta_star, start=None):
    """Invert the transformation: ``dV(q) = dV(eta) + dV(eta_star)``, ``phi = 2 dV(eta)``."""
    eta = np.asarray(eta, dtype=float).reshape(m.dim)
    eta_star = np.asarray(eta_star, dtype=float).reshape(m.dim)
    dV_eta = potential_differential(m, eta)
    target = dV_eta + potential_differential(m, eta_star)
    q = _invert_with_guesses(m, target, [start, eta + eta_star, eta, eta_star])
    return q, 2.0 * dV_eta


def q_independence(m: ChartManifold, phi, sample) -> float:
    """Spread of ``dphi/dt`` over sample points ``q`` at a fixed covector ``phi``."""
    phi = np.asarray(phi, dtype=float).reshape(m.dim)
    rates = np.array([_el_rhs(m, np.asarray(q, dtype=float), phi)[1] for q in sample])
    return _spread(rates)


class _Alternation:
    """One sweep of the boundary-matching alternation in a chosen order.

    ``"eta_star_first"``: flow ``eta_star`` forward from ``eta_star(0)``, match
    ``dV(eta(1)) = dV(z) - dV(eta_star(1))``, flow ``eta`` back to ``t = 0``
    and match ``dV(eta_star(0)) = dV(y) - dV(eta(0))``.  The unknown is
    ``eta_star(0)``.

    ``"eta_first"`` runs the inverse cycle: flow ``eta`` forward from
    ``eta(0)``, match ``eta_star(1)`` at ``z``, flow ``eta_star`` back and
    match ``eta(0)`` at ``y``.  Its linearisation is the inverse of the
    first one, so exactly one of the two is contracting near a simple
    fixed point unless both are neutral.

    Backward-in-time flows are integrated forward on the reversed clock.
    """

    def __init__(self, m, y, z, N, order):
        self.m, self.y, self.z, self.N, self.order = m, y, z, N, order
        self.dV_y = potential_differential(m, y)
        self.dV_z = potential_differential(m, z)
        # eta_star' = -grad V; eta' = +grad V
        self.first_sign = -1 if order == "eta_star_first" else 1

    def sweep(self, x0, hint=None):
        m, N = self.m, self.N
        a_path = gradient_flow(m, x0, self.first_sign, N)
        b1 = _invert_with_guesses(m, self.dV_z - potential_differential(m, a_path[-1]),
                                  [hint, self.z])
        b_path = gradient_flow(m, b1, self.first_sign, N)[::-1]
        x0_new = _invert_with_guesses(m, self.dV_y - potential_differential(m, b_path[0]),
                                      [x0, self.y])
        if self.order == "eta_star_first":
            return a_path, b_path, x0_new
        return b_path, a_path, x0_new

    def hint(self, star_path, eta_path):
        return eta_path[-1] if self.order == "eta_star_first" else star_path[-1]

    def initial(self):
        for frac in sorted(np.linspace(0.01, 0.99, 99), key=lambda a: (abs(a - 0.5), a)):
            try:
                x0 = _invert_with_guesses(self.m, frac * self.dV_y, [self.y])
                return x0, self.sweep(x0)
            except (DomainError, NewtonError):
                continue
        raise NewtonError("no admissible starting split for the fixed-point iteration")


def _iterate(alt, x0, out, omega, tol, max_iter):
    star_path, eta_path, x_new = out
    history = []
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        step = float(np.abs(x_new - x0).max())
        history.append(step)
        if step <= tol * max(1.0, float(np.abs(x0).max())):
            converged = True
            break
        if len(history) > 5 and step > 1e3 * min(history):
            break
        w = omega
        for _ in range(40):
            cand = (1.0 - w) * x0 + w * x_new
            try:
                out = alt.sweep(cand, alt.hint(star_path, eta_path))
                break
            except (DomainError, NewtonError):
                w *= 0.5
        else:
            break
        x0 = cand
        star_path, eta_path, x_new = out
    return star_path, eta_path, converged, it, history


ORDERS = ("eta_star_first", "eta_first")


def schrodinger_fixed_point(spec: BridgeSpec, omega: float = 1.0, tol: float = 1e-12,
                            max_iter: int = 500, eta_star0=None, check: bool = True,
                            seed: int = 0, order: str = "auto"):
    """Alternating fixed-point solve of the boundary conditions for ``(eta, eta_star)``.

    ``order`` picks the sweep (see :class:`_Alternation`); ``"auto"`` runs
    ``"eta_star_first"`` and switches to the inverse cycle when that one
    stalls or diverges.  ``omega`` damps each update, and an update whose
    sweep leaves the chart is halved until it does not.  ``eta_star0``
    seeds the ``"eta_star_first"`` order.

    Returns ``(HopfColePair, BridgeSolution)``; the step history is in
    ``solution.history`` and the order used in ``solution.method``.
    """
    if not 0.0 < omega <= 1.0:
        raise ValueError("omega must lie in (0, 1]")
    if order not in ORDERS + ("auto",):
        raise ValueError(f"order must be one of {ORDERS + ('auto',)}")
    m, N = spec.manifold, spec.N
    _require_hypotheses(m, check, seed)

    attempts = ORDERS if order == "auto" else (order,)
    result = None
    for name in attempts:
        alt = _Alternation(m, spec.y, spec.z, N, name)
        try:
            if name == "eta_star_first" and eta_star0 is not None:
                x0 = np.asarray(eta_star0, dtype=float).reshape(m.dim)
                out = alt.sweep(x0)
            else:
                x0, out = alt.initial()
        except (DomainError, NewtonError) as exc:
            log.info("fixed-point order %s could not start: %s", name, exc)
            continue
        star_path, eta_path, converged, it, history = _iterate(alt, x0, out, omega, tol, max_iter)
        result = (name, star_path, eta_path, converged, it, history)
        if converged:
            break
        log.info("fixed-point order %s did not converge", name)
    if result is None:
        raise NewtonError("fixed-point iteration could not start in any order")
    name, star_path, eta_path, converged, it, history = result
    if not converged:
        log.warning("fixed point did not converge (last step %.3e)", history[-1])

    t = time_grid(N)
    q_path, phi_path = [], []
    prev = spec.y
    for e, s in zip(eta_path, star_path):
        q, phi = reconstruct(m, e, s, start=prev)
        q_path.append(q)
        phi_path.append(phi)
        prev = q
    tr = Trajectory(t, np.array(q_path), np.array(phi_path))
    r1, r2 = flow_residuals(m, t, eta_path, star_path)
    pair = HopfColePair(t, eta_path, star_path, r1, r2)
    sol = _finish(spec, tr, converged, f"fixed-point:{name}", it,
                  message="" if converged else "fixed-point iteration did not converge",
                  history=history)
    return pair, sol
