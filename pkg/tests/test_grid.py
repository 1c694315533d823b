import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geobridge.entropic_grid import (
    GridDensity,
    PeriodicGrid,
    bridge_actions,
    centered_diff,
    entropy,
    heat_semigroup,
    interpolate,
    load_csv,
    sinkhorn_solve,
    uniform,
    wrapped_gaussian,
    yasue_action,
)
from geobridge.errors import ConfigError, DomainError


@pytest.fixture(scope="module")
def grid():
    return PeriodicGrid(64, 0.05)


@pytest.fixture(scope="module")
def gauss_sol(grid):
    mu = wrapped_gaussian(grid, 0.25, 0.05)
    nu = wrapped_gaussian(grid, 0.75, 0.05)
    return sinkhorn_solve(grid, mu, nu)


@pytest.fixture(scope="module")
def skew_sol(grid):
    mu = wrapped_gaussian(grid, 0.3, 0.05)
    nu = wrapped_gaussian(grid, 0.6, 0.09)
    return sinkhorn_solve(grid, mu, nu)


def test_grid_validation():
    with pytest.raises(ConfigError):
        PeriodicGrid(48, 0.05)
    with pytest.raises(ConfigError):
        PeriodicGrid(4, 0.05)
    with pytest.raises(ConfigError):
        PeriodicGrid(64, 0.001)


def test_density_validation():
    with pytest.raises(DomainError):
        GridDensity(np.array([0.5, 0.6]))
    with pytest.raises(DomainError):
        GridDensity(np.array([1.5, -0.5]))


def test_semigroup_properties(grid):
    P = heat_semigroup(grid, 0.3)
    Q = heat_semigroup(grid, 0.7)
    np.testing.assert_allclose(P @ Q, heat_semigroup(grid, 1.0), atol=1e-13)
    np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-13)
    np.testing.assert_allclose(P, P.T, atol=1e-15)
    assert P.min() > 0.0
    np.testing.assert_array_equal(heat_semigroup(grid, 0.0), np.eye(grid.n_cells))


def test_gaussian_kernel_close_to_laplacian():
    fine = PeriodicGrid(256, 0.05)
    a = heat_semigroup(fine, 0.5)
    b = heat_semigroup(fine, 0.5, kernel="gaussian")
    np.testing.assert_allclose(b.sum(axis=1), 1.0, atol=1e-13)
    assert np.abs(a - b).max() < 1e-3 * a.max()


def test_sinkhorn_converges(gauss_sol):
    assert gauss_sol.converged
    assert gauss_sol.marginal_err <= 1e-10
    assert gauss_sol.iterations <= 500
    hist = np.asarray(gauss_sol.history)
    assert np.all(np.diff(hist) <= 1e-14)


def test_marginals_and_mass(gauss_sol):
    np.testing.assert_allclose(gauss_sol.rho(0.0), gauss_sol.mu.mass, atol=1e-10)
    np.testing.assert_allclose(gauss_sol.rho(1.0), gauss_sol.nu.mass, atol=1e-10)
    for t in np.linspace(0.0, 1.0, 17):
        assert abs(gauss_sol.rho(t).sum() - 1.0) <= 1e-12
        assert isinstance(interpolate(gauss_sol, t), GridDensity)


def test_hopf_cole_consistency(gauss_sol):
    g = gauss_sol.grid.gamma
    for t in (0.0, 0.4, 1.0):
        eta, eta_star = gauss_sol.eta(t), gauss_sol.eta_star(t)
        psi = gauss_sol.psi(t, raw=True)
        np.testing.assert_allclose(psi, g * np.log(eta / eta_star), atol=1e-12)
        assert abs(gauss_sol.phi(t).sum()) <= 1e-12


def test_time_reversal(grid, gauss_sol):
    back = sinkhorn_solve(grid, gauss_sol.nu, gauss_sol.mu)
    for t in np.linspace(0.0, 1.0, 6):
        np.testing.assert_allclose(back.rho(1.0 - t), gauss_sol.rho(t), atol=1e-10)


def test_uniform_bridge_is_static(grid):
    u = uniform(grid)
    sol = sinkhorn_solve(grid, u, u)
    acts = bridge_actions(sol, 32)
    assert sol.iterations == 1
    np.testing.assert_allclose(sol.rho(0.5), grid.dx, atol=1e-14)
    assert acts.A_SB <= 1e-10 and acts.A_Y <= 1e-10
    assert max(acts.residual_sb, acts.residual_y, acts.residual_sb_star) <= 1e-10


@pytest.mark.parametrize("which", ["gauss_sol", "skew_sol"])
def test_action_identities(which, request):
    sol = request.getfixturevalue(which)
    acts = bridge_actions(sol, 256)
    scale = max(1.0, acts.A_SB)
    assert abs(acts.entropy_gap) <= 5e-3 * scale
    assert abs(acts.star_entropy_gap) <= 5e-3 * scale
    assert acts.mass_error <= 1e-12


def test_skewed_pair_has_entropy_difference(skew_sol):
    acts = bridge_actions(skew_sol, 256)
    # the identity is not trivially satisfied by equal entropies
    assert abs(acts.S_nu - acts.S_mu) > 10 * abs(acts.entropy_gap)
    assert abs(acts.A_SB - acts.A_SB_star) > 1e-3


def test_residuals_refine_quadratically():
    res = []
    for n, K in ((32, 512), (64, 1024)):
        g = PeriodicGrid(n, 0.05)
        sol = sinkhorn_solve(g, wrapped_gaussian(g, 0.25, 0.05), wrapped_gaussian(g, 0.75, 0.05))
        res.append(bridge_actions(sol, K).residual_y)
    assert 3.0 <= res[0] / res[1] <= 5.0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 1.0), st.integers(0, 2 ** 31))
def test_yasue_action_even_in_gamma(gamma, seed):
    r = np.random.default_rng(seed)
    rho = r.uniform(0.5, 1.5, size=(5, 16))
    rho /= rho.sum(axis=1, keepdims=True)
    v = r.normal(size=(5, 16))
    t = np.linspace(0, 1, 5)
    assert yasue_action(rho, v, gamma, t) == yasue_action(rho, v, -gamma, t)


def test_entropy_of_uniform_is_zero(grid):
    assert entropy(uniform(grid).mass, 0.05) == pytest.approx(0.0, abs=1e-15)


def test_centered_diff_exact_on_sine():
    n = 128
    x = np.arange(n) / n
    d = centered_diff(np.sin(2 * np.pi * x), 1.0 / n)
    h = 1.0 / n
    exact = np.cos(2 * np.pi * x) * 2 * np.pi * np.sin(2 * np.pi * h) / (2 * np.pi * h)
    np.testing.assert_allclose(d, exact, atol=1e-12)


def test_load_csv(tmp_path, grid):
    g8 = PeriodicGrid(8, 0.05)
    p = tmp_path / "m.csv"
    p.write_text("cell,mass\n" + "".join(f"{i},{0.125 + 1e-9 * (i == 0)}\n" for i in range(8)))
    d = load_csv(p, g8)
    assert d.mass.sum() == pytest.approx(1.0, abs=1e-15)
    bad = tmp_path / "bad.csv"
    bad.write_text("0,0.5\n9,0.5\n")
    with pytest.raises(ConfigError):
        load_csv(bad, g8)
    short = tmp_path / "short.csv"
    short.write_text("0,0.5\n1,0.4\n")
    with pytest.raises(ConfigError):
        load_csv(short, g8)
    dup = tmp_path / "dup.csv"
    dup.write_text("0,0.5\n0,0.5\n")
    with pytest.raises(ConfigError):
        load_csv(dup, g8)


def test_zero_mass_marginal_refused(grid):
    m = np.zeros(grid.n_cells)
    m[:2] = 0.5
    with pytest.raises(DomainError):
        sinkhorn_solve(grid, GridDensity(m), uniform(grid))
