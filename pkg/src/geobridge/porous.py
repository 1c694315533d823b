"""Direct transcription of the porous-medium bridge in mechanics form.

Minimises

    integral  1/2 |v|^2 rho + (gamma^2 m^2 / 2) |grad rho|^2 rho^(2m-3)  dx dt

over paths from ``mu`` to ``nu`` subject to ``d rho/dt + div(rho v) = 0``.

Discretisation: masses at ``K + 1`` time nodes, fluxes on cell faces at the
``K`` half steps.  Interior masses are softmax images of free logits, so
they stay positive with unit total.  On a periodic 1-D grid the discrete
continuity equation fixes each flux profile up to one constant per half
step, so the constraint is eliminated exactly rather than penalised, and
that constant is then fixed by minimising the kinetic term.  The
potential term is written as ``C |grad u|^2`` with ``u = rho^(m - 1/2)`` and
integrated with the trapezoid rule in time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import softmax

from .entropic_grid import GridDensity, PeriodicGrid, _require_positive
from .errors import ConfigError

log = logging.getLogger(__name__)

MAX_CELLS = 64
MAX_STEPS = 32


@dataclass(frozen=True)
class PorousResult:
    t: np.ndarray
    rho: np.ndarray
    flux: np.ndarray
    action: float
    kinetic: float
    potential: float
    converged: bool
    iterations: int
    message: str


class PorousProblem:
    """Objective and analytic gradient for the transcribed problem.

    The unknowns are the ``(K - 1, n)`` interior logits.  The kinetic term
    is quadratic in the free flux constant of each half step, so that
    constant is set to its minimiser; by the envelope theorem the gradient
    is then the partial derivative with the constants held fixed.
    """

    def __init__(self, grid: PeriodicGrid, mu: GridDensity, nu: GridDensity,
                 gamma: float = None, m_exp: float = 2.0, N_time: int = 16):
        if not m_exp > 1.0:
            raise ConfigError(f"m_exp must exceed 1, got {m_exp}")
        if grid.n_cells > MAX_CELLS:
            raise ConfigError(f"porous transcription supports at most {MAX_CELLS} cells")
        if not 2 <= int(N_time) <= MAX_STEPS:
            raise ConfigError(f"N_time must lie in 2..{MAX_STEPS}")
        for d in (mu, nu):
            if d.n != grid.n_cells:
                raise ConfigError("marginal size does not match the grid")
            _require_positive(d.mass, "marginal")
        self.grid, self.mu, self.nu = grid, mu, nu
        self.gamma = grid.gamma if gamma is None else float(gamma)
        self.m_exp = float(m_exp)
        self.K = int(N_time)
        self.n = grid.n_cells
        self.dt = 1.0 / self.K
        self.dx = grid.dx
        self.a = self.m_exp - 0.5
        self.C = 0.5 * (self.gamma * self.m_exp / self.a) ** 2
        w = np.full(self.K + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        self.weights = w

    @property
    def size(self) -> int:
        return (self.K - 1) * self.n

    def initial_guess(self, path=None) -> np.ndarray:
        """Logits of ``path`` (interior nodes only) or of the linear mass interpolation."""
        if path is None:
            s = np.linspace(0.0, 1.0, self.K + 1)[1:-1, None]
            path = (1.0 - s) * self.mu.mass + s * self.nu.mass
        else:
            path = np.asarray(path, dtype=float)[1:-1]
        logits = np.log(path)
        logits -= logits.mean(axis=1, keepdims=True)
        return logits.ravel()

    @staticmethod
    def face_mass(masses):
        return 0.25 * (masses[:-1] + np.roll(masses[:-1], -1, axis=1)
                       + masses[1:] + np.roll(masses[1:], -1, axis=1))

    def unpack(self, x):
        """Masses at the time nodes and the kinetic-optimal face fluxes."""
        logits = np.asarray(x, dtype=float).reshape(self.K - 1, self.n)
        masses = np.empty((self.K + 1, self.n))
        masses[0], masses[-1] = self.mu.mass, self.nu.mass
        masses[1:-1] = softmax(logits, axis=1)
        S = np.cumsum(np.diff(masses, axis=0), axis=1) / self.dt
        inv_M = 1.0 / self.face_mass(masses)
        consts = np.sum(S * inv_M, axis=1) / np.sum(inv_M, axis=1)
        return masses, consts[:, None] - S

    def objective(self, x, with_grad: bool = True):
        masses, flux = self.unpack(x)
        dx, dt = self.dx, self.dt

        # kinetic: dt * sum_faces 1/2 dx^2 F^2 / M with M the four-point face mass
        M = self.face_mass(masses)
        kin_density = 0.5 * dx * dx * flux ** 2 / M
        kinetic = dt * float(kin_density.sum())

        u = (masses / dx) ** self.a
        du = np.roll(u, -1, axis=1) - u
        pot_nodes = (self.C / dx) * np.sum(du ** 2, axis=1)
        potential = float(self.weights @ pot_nodes)
        value = kinetic + potential
        if not with_grad:
            return value

        g_flux = dt * dx * dx * flux / M
        g_M = -dt * kin_density / M
        g_mass = np.zeros_like(masses)
        gm4 = 0.25 * g_M
        for lo in (0, 1):
            sl = slice(lo, masses.shape[0] - 1 + lo)
            g_mass[sl] += gm4 + np.roll(gm4, 1, axis=1)
        # flux_i = c - (1/dt) sum_{j <= i} (m_{k+1,j} - m_{k,j})
        g_dm = -np.cumsum(g_flux[:, ::-1], axis=1)[:, ::-1] / dt
        g_mass[1:] += g_dm
        g_mass[:-1] -= g_dm

        g_u = (2.0 * self.C / dx) * (np.roll(du, 1, axis=1) - du) * self.weights[:, None]
        g_mass += g_u * self.a * (masses / dx) ** (self.a - 1.0) / dx

        inner = masses[1:-1]
        g_in = g_mass[1:-1]
        g_logits = inner * (g_in - np.sum(inner * g_in, axis=1, keepdims=True))
        return value, g_logits.ravel()

    def split(self, x):
        masses, flux = self.unpack(x)
        M = self.face_mass(masses)
        kinetic = self.dt * float(np.sum(0.5 * self.dx ** 2 * flux ** 2 / M))
        return kinetic, self.objective(x, with_grad=False) - kinetic


def porous_direct(grid: PeriodicGrid, mu: GridDensity, nu: GridDensity, gamma: float = None,
                  m_exp: float = 2.0, N_time: int = 16, gtol: float = 1e-9,
                  maxiter: int = 50000) -> PorousResult:
    """Quasi-Newton minimisation of the transcribed porous-medium action.

    Starts from the linear interpolation of the masses.
    """
    prob = PorousProblem(grid, mu, nu, gamma, m_exp, N_time)
    x0 = prob.initial_guess()
    res = optimize.minimize(prob.objective, x0, jac=True, method="L-BFGS-B",
                            options={"maxiter": maxiter, "maxfun": 4 * maxiter, "gtol": gtol,
                                     "ftol": 0.0, "maxcor": 30})
    masses, flux = prob.unpack(res.x)
    kinetic, potential = prob.split(res.x)
    grad_norm = float(np.abs(res.jac).max())
    converged = grad_norm <= max(gtol, 1e-7)
    if not converged:
        log.warning("porous transcription stopped: %s", res.message)
    return PorousResult(
        t=np.linspace(0.0, 1.0, prob.K + 1),
        rho=masses,
        flux=flux,
        action=kinetic + potential,
        kinetic=kinetic,
        potential=potential,
        converged=converged,
        iterations=int(res.nit),
        message=f"{res.message}; max gradient {grad_norm:.3e}",
    )
