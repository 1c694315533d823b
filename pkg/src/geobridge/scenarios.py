"""Named scenarios: a chart or grid, default parameters and a verification pipeline.

Each runner takes a validated parameter dict and a seed and returns
``(results, checks)``.  Solver non-convergence raises
:class:`ConvergenceError`; the command line maps it to its exit code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import charts
from .bvp import (
    BridgeSpec,
    discrete_el_residual,
    equivalence_report,
    solve_direct,
    solve_shooting,
)
from .checks import Check
from .dynamics import hamiltonian_along, integrate_el
from .entropic_grid import (
    PeriodicGrid,
    bridge_actions,
    load_csv,
    sinkhorn_solve,
    uniform,
    wrapped_gaussian,
)
from .errors import ConfigError, ConvergenceError, HypothesisError
from .hopfcole import (
    check_assumptions,
    hopf_cole_forward,
    q_independence,
    reconstruct,
    schrodinger_fixed_point,
)
from .porous import PorousProblem, porous_direct

DEFAULT_OUTPUTS = ["report"]
OUTPUT_KINDS = ("report", "trajectory", "hopfcole", "frames")


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    anchor: str
    defaults: dict
    runner: Callable


def flag_check(name, flag, expected="pass"):
    return Check(name, 1.0 if flag else 0.0, 1.0, "ge", expected)


def _trajectory_rows(tr):
    return np.column_stack([tr.t, tr.q, tr.phi])


# --- finite-dimensional bridges ----------------------------------------


def _solve_bridge(m, p):
    spec = BridgeSpec(m, p["y"], p["z"], N=p["N"], shooting_tol=p["shooting_tol"])
    shoot = solve_shooting(spec)
    if not shoot.converged:
        raise ConvergenceError(f"shooting did not converge: {shoot.message}")
    direct = solve_direct(spec)
    if not direct.converged:
        raise ConvergenceError(f"direct method did not converge: {direct.message}")
    return spec, shoot, direct


def _bridge_checks(m, spec, shoot, direct, p):
    checks = [Check("shooting_endpoint_residual", shoot.residual, p["shooting_tol"])]
    rep = equivalence_report(shoot, direct, tol_path=p["tol_path"], tol_gap=p["tol_gap"],
                             tol_flip=p["tol_gap"])
    checks += rep.checks
    H = hamiltonian_along(m, shoot.trajectory)
    checks.append(Check("hamiltonian_drift", float(np.abs(H - H[0]).max()), 1e-8))
    # the shooting path should solve the direct method's discrete optimality system
    checks.append(Check("shooting_discrete_el_residual",
                        discrete_el_residual(m, shoot.trajectory.q), 1e-6))
    results = {
        "phi0": shoot.phi0,
        "q_half": shoot.trajectory.q[spec.N // 2] if spec.N % 2 == 0 else None,
        "A_oc": shoot.A_oc,
        "A_m": shoot.A_m,
        "H0": shoot.H0,
        "shooting_iterations": shoot.iterations,
        "shooting_method": shoot.method,
        "direct_iterations": direct.iterations,
    }
    return results, checks


def _assumption_checks(m, seed, expect_metric=True, expect_potential=True,
                       expect_invertible=True, expect_injective=True):
    rep = check_assumptions(m, seed=seed)
    e = lambda ok: "pass" if ok else "fail"  # noqa: E731
    checks = [
        Check("metric_derivative_spread", rep.metric_deviation, rep.tol, expected=e(expect_metric)),
        Check("grad_field_jacobian_spread", rep.potential_deviation, rep.tol,
              expected=e(expect_potential)),
        flag_check("dV_invertible", rep.dV_invertible, expected=e(expect_invertible)),
        Check("hessian_min_singular", rep.hessian_min_singular, 1e-8, "ge",
              expected=e(expect_injective)),
    ]
    return rep, checks


def _hopf_cole_block(m, spec, shoot, p, seed, outputs):
    """Forward transform, roundtrip, q-independence and fixed point on a valid chart."""
    rng = np.random.default_rng(seed)
    hc = hopf_cole_forward(m, shoot.trajectory, check=False)
    tr = shoot.trajectory
    idx = np.linspace(0, spec.N, 11).astype(int)
    roundtrip = 0.0
    for k in idx:
        q, phi = reconstruct(m, hc.eta[k], hc.eta_star[k], start=tr.q[k])
        roundtrip = max(roundtrip, float(np.abs(q - tr.q[k]).max()), float(np.abs(phi - tr.phi[k]).max()))
    spread = q_independence(m, tr.phi[0], m.sample(50, rng))
    _, fp = schrodinger_fixed_point(spec, omega=p["omega"], check=False)
    if not fp.converged:
        raise ConvergenceError(f"fixed-point iteration did not converge: {fp.message}")
    fp_gap = float(np.abs(fp.trajectory.q - tr.q).max())
    checks = [
        Check("hopf_cole_flow_residual", hc.flow_residual, 1e-5),
        Check("hopf_cole_roundtrip", roundtrip, 1e-10),
        Check("q_independence_spread", spread, 1e-6),
        Check("fixed_point_vs_shooting", fp_gap, 1e-5),
    ]
    results = {
        "eta0": hc.eta[0],
        "eta0_star": hc.eta_star[0],
        "hopf_cole_residual_eta": hc.residual_eta,
        "hopf_cole_residual_eta_star": hc.residual_eta_star,
        "fixed_point_iterations": fp.iterations,
        "fixed_point_order": fp.method.split(":")[-1],
    }
    if "hopfcole" in outputs:
        results["hopfcole_path"] = np.column_stack([hc.t, hc.eta, hc.eta_star])
    return results, checks


def _finish_bridge(results, shoot, outputs):
    if "trajectory" in outputs:
        results["trajectory"] = _trajectory_rows(shoot.trajectory)
    return results


BRIDGE_DEFAULTS = {"N": 1000, "shooting_tol": 1e-10, "tol_path": 1e-5, "tol_gap": 1e-6,
                   "omega": 1.0, "outputs": DEFAULT_OUTPUTS}


def quadratic_closed_form(a, y, z):
    """``eta(0), eta_star(0)`` for ``V = a q^2 / 2`` on the line.

    ``eta`` grows like ``exp(a t)`` and ``eta_star`` decays like ``exp(-a t)``;
    their sum is the path.
    """
    M = np.array([[1.0, 1.0], [math.exp(a), math.exp(-a)]])
    e0, s0 = np.linalg.solve(M, [y, z])
    return float(e0), float(s0)


def run_quadratic(p, seed):
    a = float(p["a"])
    if a == 0.0:
        raise ConfigError("a must be nonzero")
    m = charts.euclidean(1, A=[[a]])
    y, z = float(p["y"][0]), float(p["z"][0])
    spec, shoot, direct = _solve_bridge(m, p)
    results, checks = _bridge_checks(m, spec, shoot, direct, p)
    e0, s0 = quadratic_closed_form(a, y, z)
    t = shoot.trajectory.t
    exact = e0 * np.exp(a * t) + s0 * np.exp(-a * t)
    checks.insert(0, Check("phi0_error", abs(float(shoot.phi0[0]) - 2.0 * a * e0), 1e-6))
    checks.insert(1, Check("path_error", float(np.abs(shoot.trajectory.q[:, 0] - exact).max()), 1e-6))

    # fourth-order integrator: endpoint error ratio under step halving
    errs = []
    for n_steps in (10, 20):
        tr = integrate_el(m, [y], [2.0 * a * e0], n_steps)
        errs.append(abs(tr.q[-1, 0] - z))
    ratio = errs[0] / errs[1]
    checks.append(Check("rk4_halving_ratio_low", ratio, 12.0, "ge"))
    checks.append(Check("rk4_halving_ratio_high", ratio, 20.0))

    _, ac = _assumption_checks(m, seed)
    hres, hchecks = _hopf_cole_block(m, spec, shoot, p, seed, p["outputs"])
    results.update({"eta0_exact": e0, "eta0_star_exact": s0, "rk4_halving_ratio": ratio})
    results.update(hres)
    return _finish_bridge(results, shoot, p["outputs"]), checks + ac + hchecks


def run_cone(p, seed):
    m = charts.cone_entropy(c=p["c"], d=p["d"])
    spec, shoot, direct = _solve_bridge(m, p)
    results, checks = _bridge_checks(m, spec, shoot, direct, p)
    _, ac = _assumption_checks(m, seed)
    hres, hchecks = _hopf_cole_block(m, spec, shoot, p, seed, p["outputs"])
    # closed-form inverse on this chart: eta = 2d / (phi - 2c)
    eta_closed = 2.0 * p["d"] / (shoot.trajectory.phi[:, 0] - 2.0 * p["c"])
    hc = hopf_cole_forward(m, shoot.trajectory, check=False)
    checks.append(Check("eta_closed_form_gap", float(np.abs(hc.eta[:, 0] - eta_closed).max()), 1e-10))
    results.update(hres)
    return _finish_bridge(results, shoot, p["outputs"]), checks + ac + hchecks


def _refusal_check(m, shoot, seed):
    try:
        hopf_cole_forward(m, shoot.trajectory, check=True, seed=seed)
        refused = False
    except HypothesisError:
        refused = True
    return flag_check("hopf_cole_refused", refused)


def run_geodesic(p, seed):
    n = len(p["y"])
    m = charts.euclidean(n, A=np.zeros((n, n)))
    spec, shoot, direct = _solve_bridge(m, p)
    results, checks = _bridge_checks(m, spec, shoot, direct, p)
    y, z = np.asarray(p["y"]), np.asarray(p["z"])
    line = y[None, :] + shoot.trajectory.t[:, None] * (z - y)[None, :]
    checks.insert(0, Check("straight_line_gap", float(np.abs(shoot.trajectory.q - line).max()), 1e-10))
    _, ac = _assumption_checks(m, seed, expect_invertible=False, expect_injective=False)
    checks += ac + [_refusal_check(m, shoot, seed)]
    return _finish_bridge(results, shoot, p["outputs"]), checks


def run_linear(p, seed):
    f = np.asarray(p["f"], dtype=float)
    if len(p["y"]) != f.size or len(p["z"]) != f.size:
        raise ConfigError("y, z and f must have the same length")
    m = charts.linear_potential(f)
    spec, shoot, direct = _solve_bridge(m, p)
    results, checks = _bridge_checks(m, spec, shoot, direct, p)
    y, z = np.asarray(p["y"]), np.asarray(p["z"])
    line = y[None, :] + shoot.trajectory.t[:, None] * (z - y)[None, :]
    checks.insert(0, Check("straight_line_gap", float(np.abs(shoot.trajectory.q - line).max()), 1e-10))
    checks.insert(1, Check("phi0_error", float(np.abs(shoot.phi0 - (z - y + f)).max()), 1e-10))
    _, ac = _assumption_checks(m, seed, expect_invertible=False, expect_injective=False)
    checks += ac + [_refusal_check(m, shoot, seed)]
    return _finish_bridge(results, shoot, p["outputs"]), checks


def run_sphere(p, seed):
    m = charts.sphere_polar(center=p["center"])
    spec, shoot, direct = _solve_bridge(m, p)
    results, checks = _bridge_checks(m, spec, shoot, direct, p)
    rep, ac = _assumption_checks(m, seed, expect_metric=False, expect_potential=False)
    hc = hopf_cole_forward(m, shoot.trajectory, check=False)
    rng = np.random.default_rng(seed)
    spread = q_independence(m, shoot.trajectory.phi[0], m.sample(50, rng))
    checks += ac + [
        Check("hopf_cole_flow_residual", hc.flow_residual, 1e-2, "ge"),
        Check("q_independence_spread", spread, 1e-2, "ge"),
    ]
    results.update({
        "metric_ok": rep.metric_ok,
        "potential_ok": rep.potential_ok,
        "hopf_cole_residual_eta": hc.residual_eta,
        "hopf_cole_residual_eta_star": hc.residual_eta_star,
    })
    if "hopfcole" in p["outputs"]:
        results["hopfcole_path"] = np.column_stack([hc.t, hc.eta, hc.eta_star])
    return _finish_bridge(results, shoot, p["outputs"]), checks


# --- grid scenarios -----------------------------------------------------


def _marginal(grid, p, which):
    path = p[f"{which}_csv"]
    if path:
        return load_csv(path, grid)
    return wrapped_gaussian(grid, p[f"{which}_center"], p[f"{which}_sigma"])


def _frames(sol, n_frames):
    t = np.linspace(0.0, 1.0, n_frames + 1)
    return np.column_stack([t, np.array([sol.rho(s) for s in t])])


def _sinkhorn(grid, mu, nu, p):
    sol = sinkhorn_solve(grid, mu, nu, tol=p["tol"], max_iter=p["max_iter"], kernel=p["kernel"])
    if not sol.converged:
        raise ConvergenceError(
            f"Sinkhorn did not converge in {p['max_iter']} iterations (error {sol.marginal_err:.3e})")
    return sol


def _grid_common(sol, acts, p):
    hist = np.asarray(sol.history)
    increase = float(np.max(np.diff(hist), initial=0.0))
    times = np.linspace(0.0, 1.0, 11)
    mass = max(abs(float(sol.rho(t).sum()) - 1.0) for t in times)
    hc = 0.0
    for t in times:
        eta, eta_star = sol.eta(t), sol.eta_star(t)
        psi_direct = sol.grid.gamma * np.log(eta / eta_star)
        scale = max(1.0, float(np.abs(psi_direct).max()))
        hc = max(hc, float(np.abs(sol.psi(t, raw=True) - psi_direct).max()) / scale)
    checks = [
        Check("marginal_err", sol.marginal_err, p["tol"]),
        Check("marginal_err_increase", increase, 1e-14),
        Check("mass_drift", mass, 1e-12),
        Check("hopf_cole_consistency", hc, 1e-12),
    ]
    results = {"iterations": sol.iterations, "marginal_err": sol.marginal_err}
    results.update(acts.as_dict())
    return results, checks


GRID_DEFAULTS = {"n_cells": 64, "gamma": 0.05, "tol": 1e-10, "max_iter": 500,
                 "kernel": "laplacian", "n_time_samples": 256, "n_frames": 10,
                 "outputs": DEFAULT_OUTPUTS}


def run_gaussian_sinkhorn(p, seed):
    grid = PeriodicGrid(p["n_cells"], p["gamma"])
    mu, nu = _marginal(grid, p, "mu"), _marginal(grid, p, "nu")
    sol = _sinkhorn(grid, mu, nu, p)
    acts = bridge_actions(sol, p["n_time_samples"])
    results, checks = _grid_common(sol, acts, p)
    scale = max(1.0, acts.A_SB)
    checks += [
        Check("iterations", sol.iterations, p["max_iter"]),
        Check("entropy_identity_gap", abs(acts.entropy_gap) / scale, 5e-3),
        Check("forward_backward_action_gap", abs(acts.A_SB - acts.A_SB_star) / scale, 5e-3),
    ]
    swapped = _sinkhorn(grid, nu, mu, p)
    sym = max(float(np.abs(sol.rho(t) - swapped.rho(1.0 - t)).max()) for t in np.linspace(0, 1, 11))
    checks.append(Check("time_reversal_gap", sym, 1e-10))

    if p["refinement"] and not (p["mu_csv"] or p["nu_csv"]):
        # continuity residual under simultaneous refinement of space and time
        K = p["refinement_time_samples"]
        fine = PeriodicGrid(2 * grid.n_cells, grid.gamma)
        fine_sol = _sinkhorn(fine, _marginal(fine, p, "mu"), _marginal(fine, p, "nu"), p)
        coarse_res = bridge_actions(sol, K).residual_y
        fine_res = bridge_actions(fine_sol, 2 * K).residual_y
        ratio = coarse_res / fine_res
        results["continuity_residual_coarse"] = coarse_res
        results["continuity_residual_fine"] = fine_res
        results["continuity_refinement_ratio"] = ratio
        checks += [Check("continuity_refinement_ratio_low", ratio, 3.0, "ge"),
                   Check("continuity_refinement_ratio_high", ratio, 5.0)]
    if "frames" in p["outputs"]:
        results["frames"] = _frames(sol, p["n_frames"])
    return results, checks


def run_uniform_sinkhorn(p, seed):
    grid = PeriodicGrid(p["n_cells"], p["gamma"])
    u = uniform(grid)
    sol = _sinkhorn(grid, u, u, p)
    acts = bridge_actions(sol, p["n_time_samples"])
    results, checks = _grid_common(sol, acts, p)
    flat = max(float(np.abs(sol.rho(t) - grid.dx).max()) for t in np.linspace(0, 1, 11))
    checks += [
        Check("iterations", sol.iterations, 1),
        Check("rho_uniform_gap", flat, 1e-12),
        Check("A_SB", abs(acts.A_SB), 1e-10),
        Check("A_Y", abs(acts.A_Y), 1e-10),
        Check("residual_sb", acts.residual_sb, 1e-10),
        Check("residual_y", acts.residual_y, 1e-10),
        Check("residual_sb_star", acts.residual_sb_star, 1e-10),
    ]
    if "frames" in p["outputs"]:
        results["frames"] = _frames(sol, p["n_frames"])
    return results, checks


def _porous_grad_check(prob, rng, count):
    worst = 0.0
    for _ in range(count):
        x = rng.normal(size=prob.size)
        _, g = prob.objective(x)
        k = rng.choice(prob.size, size=min(8, prob.size), replace=False)
        for i in k:
            h = 1e-6
            e = np.zeros(prob.size)
            e[i] = h
            fd = (prob.objective(x + e, False) - prob.objective(x - e, False)) / (2 * h)
            worst = max(worst, abs(fd - g[i]) / max(np.abs(g).max(), 1e-300))
    return worst


def run_porous(p, seed):
    grid = PeriodicGrid(p["n_cells"], p["gamma"])
    mu, nu = _marginal(grid, p, "mu"), _marginal(grid, p, "nu")
    res = porous_direct(grid, mu, nu, m_exp=p["m_exp"], N_time=p["N_time"])
    if not res.converged:
        raise ConvergenceError(f"porous transcription did not converge: {res.message}")
    prob = PorousProblem(grid, mu, nu, m_exp=p["m_exp"], N_time=p["N_time"])
    rng = np.random.default_rng(seed)
    grad_err = _porous_grad_check(prob, rng, p["gradient_checks"])
    mass = float(np.abs(res.rho.sum(axis=1) - 1.0).max())
    checks = [
        Check("gradient_fd_rel_error", grad_err, 1e-5),
        Check("mass_drift", mass, 1e-12),
        Check("min_mass", float(res.rho.min()), 0.0, "ge"),
    ]
    results = {"action": res.action, "kinetic": res.kinetic, "potential": res.potential,
               "iterations": res.iterations}
    if p["compare_entropic"]:
        sol = _sinkhorn(grid, mu, nu, GRID_DEFAULTS | {"kernel": "laplacian"})
        A_Y = bridge_actions(sol, 1024).A_Y
        rel = abs(res.action - A_Y) / A_Y
        results["A_Y_entropic"] = A_Y
        results["relative_gap_to_entropic"] = rel
        checks.append(Check("entropic_limit_gap", rel, p["entropic_tol"]))
    if "frames" in p["outputs"]:
        results["frames"] = np.column_stack([res.t, res.rho])
    return results, checks


PAIR = {"mu_center": 0.25, "mu_sigma": 0.05, "nu_center": 0.75, "nu_sigma": 0.05,
        "mu_csv": "", "nu_csv": ""}

SCENARIOS = {
    s.name: s
    for s in [
        Scenario("quadratic-bridge",
                 "flat line, V = a q^2/2: closed-form bridge, solver cross-checks, Hopf-Cole pair",
                 "closed-form quadratic bridge; forward/backward gradient-flow reduction",
                 BRIDGE_DEFAULTS | {"a": 1.0, "y": [1.0], "z": [2.0]}, run_quadratic),
        Scenario("cone-entropy-bridge",
                 "g^11 = q, V = c q + d ln q: finite-dimensional shadow of the entropy",
                 "entropy shadow on the cone; forward/backward gradient-flow reduction",
                 BRIDGE_DEFAULTS | {"c": 1.0, "d": 1.0, "y": [0.5], "z": [0.3]}, run_cone),
        Scenario("geodesic",
                 "flat plane, V = 0: straight lines; Hopf-Cole refused (dV not invertible)",
                 "geodesic example (zero potential)",
                 BRIDGE_DEFAULTS | {"y": [0.0, 0.0], "z": [1.0, 2.0]}, run_geodesic),
        Scenario("linear-potential",
                 "flat plane, V = f.q: zero Hessian, Hopf-Cole refused",
                 "linear potential example (Hessian-degenerate)",
                 BRIDGE_DEFAULTS | {"f": [1.0, -0.5], "y": [0.0, 0.0], "z": [1.0, 1.0]}, run_linear),
        Scenario("sphere-assumption-check",
                 "polar chart of the sphere: metric derivative not constant, reduction fails",
                 "constant-coefficient assumptions (negative case)",
                 BRIDGE_DEFAULTS | {"center": [0.0, 0.0], "y": [0.8, 0.2], "z": [1.2, 1.0]},
                 run_sphere),
        Scenario("gaussian-sinkhorn",
                 "periodic grid, two wrapped Gaussians: Schrodinger system, actions, residuals",
                 "Schrodinger system on a grid; forward/backward/Yasue action equivalence",
                 GRID_DEFAULTS | PAIR | {"refinement": True, "refinement_time_samples": 1024},
                 run_gaussian_sinkhorn),
        Scenario("uniform-sinkhorn",
                 "periodic grid, uniform marginals: static bridge, zero actions",
                 "Schrodinger system on a grid (static case)",
                 GRID_DEFAULTS, run_uniform_sinkhorn),
        Scenario("porous-medium",
                 "periodic grid, nonlinear diffusion exponent m: direct transcription",
                 "porous-medium example (mechanics form)",
                 {"n_cells": 32, "gamma": 0.05, "m_exp": 2.0, "N_time": 8,
                  "gradient_checks": 20, "compare_entropic": False, "entropic_tol": 0.02,
                  "outputs": DEFAULT_OUTPUTS} | PAIR | {"mu_sigma": 0.1, "nu_sigma": 0.1},
                 run_porous),
        Scenario("porous-entropic-limit",
                 "porous transcription at m = 1.001 against the entropic Yasue action",
                 "porous-medium example, m -> 1 limit",
                 {"n_cells": 32, "gamma": 0.05, "m_exp": 1.001, "N_time": 32,
                  "gradient_checks": 20, "compare_entropic": True, "entropic_tol": 0.02,
                  "outputs": DEFAULT_OUTPUTS} | PAIR,
                 run_porous),
    ]
}


def get(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; try 'list'") from None


def _coerce(key, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        if key == "outputs":
            bad = [v for v in value if v not in OUTPUT_KINDS]
            if bad:
                raise ConfigError(f"outputs: unknown kinds {bad}; choose from {OUTPUT_KINDS}")
            return list(value)
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a list of numbers") from None
    raise ConfigError(f"{key}: unsupported value {value!r}")


def resolve(name: str, overrides: dict) -> dict:
    """Defaults merged with ``overrides``; unknown keys and type errors raise ConfigError."""
    sc = get(name)
    unknown = sorted(set(overrides) - set(sc.defaults))
    if unknown:
        raise ConfigError(f"{name}: unknown keys {unknown}")
    params = {}
    for key, default in sc.defaults.items():
        params[key] = _coerce(key, overrides[key], default) if key in overrides else (
            list(default) if isinstance(default, list) else default)
    return params


def run(name: str, params: dict, seed: int = 0):
    """Run a scenario on already-resolved parameters; returns ``(results, checks)``."""
    return get(name).runner(params, seed)
