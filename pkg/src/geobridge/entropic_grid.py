"""Entropic transport between densities on a one-dimensional periodic grid.

Densities are stored as cell masses summing to one.  The heat semigroup is
the matrix exponential of the periodic second-difference operator, so mass
conservation and the semigroup law hold to rounding.  The two Schrodinger
potentials are found by Sinkhorn scaling and the bridge is their product
``rho_t = (P_t eta_star_0) * (P_{1-t} eta_1)``.
"""

from __future__ import annotations

import csv
import functools
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError, DomainError

log = logging.getLogger(__name__)

POSITIVITY_FLOOR = 1e-300
MIN_GAMMA = 0.01
MASS_TOL = 1e-12


@dataclass(frozen=True)
class PeriodicGrid:
    n_cells: int = 64
    gamma: float = 0.05

    def __post_init__(self):
        n = int(self.n_cells)
        if n < 8 or n & (n - 1):
            raise ConfigError(f"n_cells must be a power of two >= 8, got {self.n_cells}")
        if not float(self.gamma) >= MIN_GAMMA:
            raise ConfigError(f"gamma must be >= {MIN_GAMMA}, got {self.gamma}")
        object.__setattr__(self, "n_cells", n)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_cells) * self.dx

    def laplacian(self) -> np.ndarray:
        return _laplacian(self.n_cells)


@functools.lru_cache(maxsize=8)
def _laplacian(n: int) -> np.ndarray:
    L = -2.0 * np.eye(n) + np.roll(np.eye(n), 1, axis=1) + np.roll(np.eye(n), -1, axis=1)
    L *= float(n) ** 2
    L.setflags(write=False)
    return L


@dataclass(frozen=True)
class GridDensity:
    mass: np.ndarray

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float).reshape(-1)
        if not np.all(np.isfinite(mass)) or np.any(mass < 0.0):
            raise DomainError("density masses must be finite and nonnegative")
        if abs(mass.sum() - 1.0) > MASS_TOL * mass.size:
            raise DomainError(f"density masses sum to {mass.sum():.15g}, not 1")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @property
    def n(self) -> int:
        return self.mass.size

    def entropy(self, gamma: float) -> float:
        return entropy(self.mass, gamma)


def entropy(mass, gamma: float) -> float:
    """``gamma * integral rho ln rho`` with ``rho = mass / dx``."""
    mass = np.asarray(mass, dtype=float)
    _require_positive(mass, "density")
    return float(gamma * np.sum(mass * np.log(mass * mass.size)))


def _require_positive(a, what):
    if np.any(~(a >= POSITIVITY_FLOOR)):
        raise DomainError(f"{what} has entries below {POSITIVITY_FLOOR:g}")


def uniform(grid: PeriodicGrid) -> GridDensity:
    return GridDensity(np.full(grid.n_cells, grid.dx))


def wrapped_gaussian(grid: PeriodicGrid, center: float, sigma: float, wraps: int = 4) -> GridDensity:
    """Periodised Gaussian sampled at the nodes ``i / n`` and normalised to unit mass."""
    if not sigma > 0:
        raise ConfigError("sigma must be positive")
    x = grid.x
    w = np.zeros_like(x)
    for k in range(-wraps, wraps + 1):
        w += np.exp(-0.5 * ((x - center + k) / sigma) ** 2)
    w = np.maximum(w, POSITIVITY_FLOOR)
    return GridDensity(w / w.sum())


def load_csv(path, grid: PeriodicGrid, renormalize_tol: float = 1e-6) -> GridDensity:
    """Read ``cell index, mass`` rows.  A header row is skipped if present.

    Missing cells get zero mass.  Totals within ``renormalize_tol`` of one
    are rescaled to exactly one; anything further off is rejected.
    """
    mass = np.zeros(grid.n_cells)
    seen = set()
    with open(Path(path), newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                i, value = int(row[0]), float(row[1])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue
                raise ConfigError(f"{path}:{lineno}: expected 'index,mass'") from None
            if not 0 <= i < grid.n_cells:
                raise ConfigError(f"{path}:{lineno}: cell index {i} outside 0..{grid.n_cells - 1}")
            if i in seen:
                raise ConfigError(f"{path}:{lineno}: duplicate cell index {i}")
            if not (np.isfinite(value) and value >= 0.0):
                raise ConfigError(f"{path}:{lineno}: mass must be finite and nonnegative")
            seen.add(i)
            mass[i] = value
    total = mass.sum()
    if abs(total - 1.0) > renormalize_tol:
        raise ConfigError(f"{path}: masses sum to {total:.12g}")
    return GridDensity(mass / total)


# --- heat semigroup -----------------------------------------------------


@functools.lru_cache(maxsize=256)
def _semigroup(n: int, gamma: float, t: float, kernel: str) -> np.ndarray:
    if t == 0.0:
        P = np.eye(n)
    elif kernel == "laplacian":
        P = expm((t * gamma) * _laplacian(n))
        P = 0.5 * (P + P.T)
    else:
        d = np.arange(n) / n
        d = np.minimum(d, 1.0 - d)
        row = np.zeros(n)
        for k in range(-4, 5):
            row += np.exp(-((d + k) ** 2) / (4.0 * gamma * t))
        row /= row.sum()
        idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
        P = row[idx]
    P.setflags(write=False)
    return P


def heat_semigroup(grid: PeriodicGrid, t: float, kernel: str = "laplacian") -> np.ndarray:
    """Transition matrix of the heat flow with diffusion ``gamma`` over time ``t``.

    ``kernel="laplacian"`` gives ``expm(t gamma L)``.  ``kernel="gaussian"``
    samples the periodised heat kernel instead and row-normalises it; it is
    only approximately a semigroup and is meant for comparison runs.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if kernel not in ("laplacian", "gaussian"):
        raise ConfigError(f"unknown kernel {kernel!r}")
    return _semigroup(grid.n_cells, grid.gamma, float(t), kernel)


# --- Sinkhorn -----------------------------------------------------------


@dataclass(frozen=True)
class GridBridgeSolution:
    grid: PeriodicGrid
    mu: GridDensity
    nu: GridDensity
    eta0_star: np.ndarray
    eta1: np.ndarray
    iterations: int
    marginal_err: float
    converged: bool
    kernel: str = "laplacian"
    history: list = field(default_factory=list, repr=False)

    def _P(self, t):
        return heat_semigroup(self.grid, t, self.kernel)

    def eta(self, t: float) -> np.ndarray:
        return self._P(1.0 - t) @ self.eta1

    def eta_star(self, t: float) -> np.ndarray:
        return self._P(t) @ self.eta0_star

    def rho(self, t: float) -> np.ndarray:
        return self.eta(t) * self.eta_star(t)

    def phi(self, t: float, raw: bool = False) -> np.ndarray:
        """Velocity potential ``2 gamma ln eta``; zero-mean unless ``raw``."""
        eta = self.eta(t)
        _require_positive(eta, "eta")
        phi = 2.0 * self.grid.gamma * np.log(eta)
        return phi if raw else phi - phi.mean()

    def psi(self, t: float, raw: bool = False) -> np.ndarray:
        """``phi - gamma ln rho``; with ``raw`` this equals ``gamma ln(eta / eta_star)``."""
        rho = self.rho(t)
        _require_positive(rho, "rho")
        psi = self.phi(t, raw=True) - self.grid.gamma * np.log(rho)
        return psi if raw else psi - psi.mean()


def sinkhorn_solve(grid: PeriodicGrid, mu: GridDensity, nu: GridDensity, tol: float = 1e-10,
                   max_iter: int = 500, kernel: str = "laplacian") -> GridBridgeSolution:
    """Alternating scaling for ``mu = eta_star_0 * P_1 eta_1`` and ``nu = eta_1 * P_1 eta_star_0``.

    The error after each sweep is the L1 defect of both marginals; the
    second one is zero up to rounding because ``eta_1`` is updated last.
    """
    for d in (mu, nu):
        if d.n != grid.n_cells:
            raise ConfigError("marginal size does not match the grid")
        _require_positive(d.mass, "marginal")
    P = heat_semigroup(grid, 1.0, kernel)
    a, b = mu.mass, nu.mass
    eta1 = np.ones(grid.n_cells)
    history = []
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        eta0_star = a / (P @ eta1)
        eta1 = b / (P @ eta0_star)
        for v, name in ((eta0_star, "eta_star_0"), (eta1, "eta_1")):
            if not np.all(np.isfinite(v)) or np.any(v < POSITIVITY_FLOOR):
                raise DomainError(f"Sinkhorn produced a nonpositive {name}")
        err = float(np.abs(eta0_star * (P @ eta1) - a).sum() + np.abs(eta1 * (P @ eta0_star) - b).sum())
        history.append(err)
        if err <= tol:
            converged = True
            break
    if not converged:
        log.warning("Sinkhorn stopped after %d iterations with marginal error %.3e", it, err)
    return GridBridgeSolution(grid, mu, nu, eta0_star, eta1, it, err, converged, kernel, history)


def interpolate(sol: GridBridgeSolution, t: float) -> GridDensity:
    rho = sol.rho(t)
    return GridDensity(rho / rho.sum()) if abs(rho.sum() - 1.0) > MASS_TOL else GridDensity(rho)


# --- actions and residuals ---------------------------------------------


def centered_diff(f: np.ndarray, dx: float) -> np.ndarray:
    """Periodic centred first difference along the last axis."""
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2.0 * dx)


def second_diff(f: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(f, -1, axis=-1) - 2.0 * f + np.roll(f, 1, axis=-1)) / dx ** 2


def yasue_action(rho: np.ndarray, v: np.ndarray, gamma: float, t: np.ndarray) -> float:
    """Kinetic plus Fisher-information action of a sampled path.

    ``rho`` holds cell masses with shape ``(times, cells)``; ``v`` the
    velocity at the same points.  ``gamma`` only enters squared.
    """
    rho = np.asarray(rho, dtype=float)
    _require_positive(rho, "rho")
    dx = 1.0 / rho.shape[-1]
    g = centered_diff(np.log(rho), dx)
    density = np.sum(rho * (0.5 * v ** 2 + 0.5 * gamma ** 2 * g ** 2), axis=-1)
    return float(np.trapezoid(density, t))


def _l2(r: np.ndarray, t: np.ndarray, dx: float) -> float:
    return float(np.sqrt(np.trapezoid(np.sum(r ** 2, axis=-1) * dx, t)))


@dataclass(frozen=True)
class BridgeActions:
    A_SB: float
    A_SB_star: float
    A_Y: float
    S_mu: float
    S_nu: float
    residual_sb: float
    residual_y: float
    residual_sb_star: float
    mass_error: float
    n_time_samples: int

    @property
    def entropy_gap(self) -> float:
        """``A_SB - A_Y - (S(nu) - S(mu))``; zero in the continuum limit."""
        return self.A_SB - self.A_Y - (self.S_nu - self.S_mu)

    @property
    def star_entropy_gap(self) -> float:
        """``A_SB* - A_Y + (S(nu) - S(mu))``."""
        return self.A_SB_star - self.A_Y + (self.S_nu - self.S_mu)

    def as_dict(self) -> dict:
        return {
            "A_SB": self.A_SB,
            "A_SB_star": self.A_SB_star,
            "A_Y": self.A_Y,
            "S_mu": self.S_mu,
            "S_nu": self.S_nu,
            "entropy_gap": self.entropy_gap,
            "star_entropy_gap": self.star_entropy_gap,
            "residual_sb": self.residual_sb,
            "residual_y": self.residual_y,
            "residual_sb_star": self.residual_sb_star,
            "mass_error": self.mass_error,
            "n_time_samples": self.n_time_samples,
        }


def sample_path(sol: GridBridgeSolution, n_time_samples: int):
    """``eta`` and ``eta_star`` at ``t_k = k / K``, stepping with one ``P_{1/K}``."""
    K = int(n_time_samples)
    if K < 2:
        raise ValueError("need at least 2 time intervals")
    t = np.linspace(0.0, 1.0, K + 1)
    P = sol._P(1.0 / K)
    eta = np.empty((K + 1, sol.grid.n_cells))
    eta_star = np.empty_like(eta)
    eta[K], eta_star[0] = sol.eta1, sol.eta0_star
    for k in range(K):
        eta_star[k + 1] = P @ eta_star[k]
        eta[K - 1 - k] = P @ eta[K - k]
    return t, eta, eta_star


def bridge_actions(sol: GridBridgeSolution, n_time_samples: int = 256) -> BridgeActions:
    """Actions of the forward, backward and Yasue forms and their constraint residuals.

    ``b = grad(2 gamma ln eta)``, ``v = b - gamma grad ln rho`` and
    ``b* = v - gamma grad ln rho``.  Space derivatives are centred
    differences, time derivatives second-order differences on the samples.
    """
    g, dx = sol.grid.gamma, sol.grid.dx
    t, eta, eta_star = sample_path(sol, n_time_samples)
    _require_positive(eta, "eta")
    _require_positive(eta_star, "eta_star")
    rho = eta * eta_star
    b = centered_diff(2.0 * g * np.log(eta), dx)
    dlog = centered_diff(np.log(rho), dx)
    v = b - g * dlog
    b_star = v - g * dlog

    def kinetic(u):
        return float(np.trapezoid(np.sum(0.5 * u ** 2 * rho, axis=-1), t))

    dens = rho / dx
    dt_rho = np.gradient(dens, t, axis=0, edge_order=2)
    lap = second_diff(dens, dx)
    r_sb = dt_rho + centered_diff(dens * b, dx) - g * lap
    r_y = dt_rho + centered_diff(dens * v, dx)
    r_star = dt_rho + centered_diff(dens * b_star, dx) + g * lap

    return BridgeActions(
        A_SB=kinetic(b),
        A_SB_star=kinetic(b_star),
        A_Y=yasue_action(rho, v, g, t),
        S_mu=entropy(sol.mu.mass, g),
        S_nu=entropy(sol.nu.mass, g),
        residual_sb=_l2(r_sb, t, dx),
        residual_y=_l2(r_y, t, dx),
        residual_sb_star=_l2(r_star, t, dx),
        mass_error=float(np.abs(rho.sum(axis=1) - 1.0).max()),
        n_time_samples=int(n_time_samples),
    )
