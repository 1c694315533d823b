"""Finite-dimensional and grid laboratories for entropic transport bridges."""

from .bvp import BridgeSpec, BridgeSolution, solve_direct, solve_shooting, equivalence_report
from .charts import CHARTS, make_chart
from .dynamics import PhaseState, Trajectory, integrate_el
from .entropic_grid import GridDensity, PeriodicGrid, bridge_actions, sinkhorn_solve
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateMetricError,
    DomainError,
    GeoBridgeError,
    HypothesisError,
    NewtonError,
)
from .geometry import ChartManifold
from .hopfcole import check_assumptions, hopf_cole_forward, reconstruct, schrodinger_fixed_point
from .kernels import BACKEND

__version__ = "0.1.0"
