import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geobridge import charts
from geobridge.errors import ConfigError, DegenerateMetricError
from geobridge.geometry import (
    ChartManifold,
    Cotangent,
    Tangent,
    christoffels,
    flat,
    grad_field_jacobian,
    metric_inv_derivative,
    metric_pair,
    musical,
    potential_differential,
    potential_hessian,
    scaled_potential,
    sharp,
)

from conftest import callbacks_only

theta = st.floats(0.2, np.pi - 0.2)
coord = st.floats(-3.0, 3.0)


def test_sphere_christoffels_match_closed_form(sphere):
    th = 0.7
    G = christoffels(sphere, np.array([th, 0.3]))
    expected = np.zeros((2, 2, 2))
    expected[0, 1, 1] = -np.sin(th) * np.cos(th)
    expected[1, 0, 1] = expected[1, 1, 0] = np.cos(th) / np.sin(th)
    np.testing.assert_allclose(G, expected, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(theta, coord)
def test_christoffels_symmetric_in_lower_indices(th, lon):
    G = christoffels(charts.sphere_polar(), np.array([th, lon]))
    np.testing.assert_allclose(G, np.transpose(G, (0, 2, 1)), atol=1e-12)


def test_flat_metric_has_zero_christoffels():
    m = charts.euclidean(3)
    assert np.abs(christoffels(m, np.ones(3))).max() == 0.0


@settings(max_examples=60, deadline=None)
@given(theta, coord, coord, coord)
def test_flat_and_sharp_are_inverse(th, lon, b1, b2):
    m = charts.sphere_polar()
    q = np.array([th, lon])
    b = np.array([b1, b2])
    np.testing.assert_allclose(sharp(m, q, flat(m, q, b)), b, rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 5.0), coord)
def test_musical_roundtrip_on_cone(q, phi):
    m = charts.cone_entropy()
    co = Cotangent(np.array([q]), np.array([phi]))
    back = musical(m, musical(m, co))
    assert isinstance(back, Cotangent)
    np.testing.assert_allclose(back.components, co.components, rtol=1e-13, atol=1e-13)


def test_musical_rejects_plain_arrays(cone):
    with pytest.raises(TypeError):
        musical(cone, np.ones(1))
    assert isinstance(musical(cone, Tangent(np.ones(1), np.ones(1))), Cotangent)


@pytest.mark.parametrize("name, q", [("cone-entropy", [0.8]), ("sphere-polar", [1.1, -0.4]),
                                     ("euclidean", [0.3])])
def test_finite_difference_fallbacks_match_analytic(name, q):
    m = charts.make_chart(name)
    fd = callbacks_only(m)
    q = np.asarray(q)
    np.testing.assert_allclose(potential_differential(fd, q), potential_differential(m, q), atol=1e-8)
    np.testing.assert_allclose(potential_hessian(fd, q), potential_hessian(m, q), atol=1e-5)
    np.testing.assert_allclose(metric_inv_derivative(fd, q), metric_inv_derivative(m, q), atol=1e-7)


def test_cone_grad_field_jacobian_is_constant(cone):
    # d(q V'(q)) = d(c q + d) = c
    for q in (0.1, 1.0, 7.0):
        assert grad_field_jacobian(cone, np.array([q]))[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_degenerate_metric_raises(cone, sphere):
    with pytest.raises(DegenerateMetricError):
        metric_pair(cone, np.array([-0.5]))
    with pytest.raises(DegenerateMetricError):
        metric_pair(sphere, np.array([0.0, 1.0]))
    bad = ChartManifold(dim=2, metric_inv=lambda q: np.array([[1.0, 2.0], [2.0, 1.0]]),
                        potential=lambda q: 0.0)
    with pytest.raises(DegenerateMetricError):
        metric_pair(bad, np.zeros(2))


def test_scaled_potential_flips_sign(quadratic):
    neg = scaled_potential(quadratic, -1.0)
    q = np.array([0.7])
    assert neg.potential(q) == pytest.approx(-quadratic.potential(q))
    np.testing.assert_allclose(potential_differential(neg, q), -potential_differential(quadratic, q))
    assert neg.kernel[1][-1] == -1.0


def test_make_chart_validation():
    with pytest.raises(ConfigError):
        charts.make_chart("torus")
    with pytest.raises(ConfigError):
        charts.make_chart("euclidean", bogus=1)
    with pytest.raises(ConfigError):
        charts.euclidean(2, A=[[1.0, 1.0], [0.0, 1.0]])


def test_sample_points_are_admissible(cone, rng):
    pts = cone.sample(30, rng)
    assert pts.shape == (30, 1)
    assert all(cone.admissible(p) for p in pts)
