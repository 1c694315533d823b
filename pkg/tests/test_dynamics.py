import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geobridge import charts
from geobridge.dynamics import (
    PhaseState,
    Trajectory,
    actions_along,
    el_vector_field,
    gradient_flow,
    hamiltonian,
    hamiltonian_along,
    integrate_controlled,
    integrate_el,
    potential_gap,
)
from geobridge.errors import BlowUpError, DomainError

from conftest import callbacks_only


def test_quadratic_flow_matches_exponentials(quadratic):
    e0, s0 = 0.3, 0.7
    tr = integrate_el(quadratic, [e0 + s0], [2.0 * e0], 400)
    t = tr.t
    np.testing.assert_allclose(tr.q[:, 0], e0 * np.exp(t) + s0 * np.exp(-t), atol=1e-11)
    np.testing.assert_allclose(tr.phi[:, 0], 2.0 * e0 * np.exp(t), atol=1e-11)


@pytest.mark.parametrize("name, q0, phi0", [
    ("euclidean", [0.4], [1.0]),
    ("cone-entropy", [1.0], [3.5]),
    ("sphere-polar", [0.9, 0.1], [0.3, -0.2]),
])
def test_hamiltonian_conserved(name, q0, phi0):
    m = charts.make_chart(name)
    H = hamiltonian_along(m, integrate_el(m, q0, phi0, 1000))
    assert np.abs(H - H[0]).max() <= 1e-8


def test_fourth_order_convergence(cone):
    ref = integrate_el(cone, [1.0], [3.5], 4096).q[-1]
    errs = [abs(integrate_el(cone, [1.0], [3.5], n).q[-1] - ref)[0] for n in (20, 40)]
    assert 12.0 <= errs[0] / errs[1] <= 20.0


def test_hamiltonian_equals_energy_difference(sphere):
    # 1/2|b|^2 - <dV,b> = 1/2|v|^2 - 1/2|grad V|^2 with b = v + grad V
    q, phi = np.array([1.2, 0.5]), np.array([0.4, -1.0])
    m = sphere
    g_up = m.metric_inv(q)
    dV = m.dV(q)
    v = g_up @ (phi - dV)
    g_low = np.linalg.inv(g_up)
    energy = 0.5 * v @ g_low @ v - 0.5 * dV @ g_up @ dV
    assert hamiltonian(m, PhaseState(0.0, q, phi)) == pytest.approx(energy, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.5, 3.0))
def test_action_identity_on_controlled_paths(c0, c1, w):
    m = charts.cone_entropy()
    control = lambda t: np.array([2.5 + c0 * np.sin(w * t) + c1 * t])  # noqa: E731
    tr = integrate_controlled(m, [1.0], control, 2000)
    A_oc, A_m = actions_along(m, tr)
    assert abs(A_oc - A_m - potential_gap(m, tr)) <= 1e-6


def test_gradient_flow_directions(quadratic):
    up = gradient_flow(quadratic, [0.5], +1, 200)
    down = gradient_flow(quadratic, [0.5], -1, 200)
    assert up[-1, 0] == pytest.approx(0.5 * np.e, rel=1e-10)
    assert down[-1, 0] == pytest.approx(0.5 / np.e, rel=1e-10)
    with pytest.raises(ValueError):
        gradient_flow(quadratic, [0.5], 0, 10)


def test_blow_up_reports_time(cone):
    with pytest.raises(BlowUpError) as info:
        integrate_el(cone, [0.1], [-20.0], 1000)
    assert 0.0 <= info.value.t < 1.0
    with pytest.raises(BlowUpError):
        integrate_el(callbacks_only(cone), [0.1], [-20.0], 1000)


def test_inadmissible_start(cone):
    with pytest.raises(DomainError):
        integrate_el(cone, [-1.0], [1.0], 10)


def test_vector_field_cone_closed_form(cone):
    # dq = q (phi - c) - d ; dphi = -phi^2 / 2 + c phi
    dq, dphi = el_vector_field(cone, PhaseState(0.0, np.array([2.0]), np.array([3.0])))
    assert dq[0] == pytest.approx(2.0 * 2.0 - 1.0)
    assert dphi[0] == pytest.approx(-4.5 + 3.0)


def test_trajectory_validation():
    t = np.linspace(0, 1, 3)
    with pytest.raises(ValueError):
        Trajectory(t, np.zeros((3, 1)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.7, 0.5]), np.zeros((3, 1)), np.zeros((3, 1)))
    with pytest.raises(ValueError):
        integrate_el(charts.euclidean(1), [0.0], [0.0], 1)
