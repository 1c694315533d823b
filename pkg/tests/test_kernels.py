import os
import subprocess
import sys

import numpy as np
import pytest

from geobridge import charts, kernels
from geobridge.dynamics import gradient_flow, integrate_el

CASES = [
    ("euclidean", {"n": 2, "A": [[2.0, 0.5], [0.5, 1.0]], "f": [0.1, -0.3]}, [0.3, -0.2], [1.0, 0.4]),
    ("cone-entropy", {"c": 0.7, "d": 1.3}, [1.0], [3.0]),
    ("sphere-polar", {"center": [0.5, 0.1]}, [1.0, 0.2], [0.3, -0.5]),
]


def test_backend_flag():
    assert kernels.BACKEND in ("compiled", "python")


@pytest.mark.parametrize("name, params, q0, phi0", CASES)
def test_kernel_matches_callbacks(name, params, q0, phi0):
    m = charts.make_chart(name, **params)
    a = integrate_el(m, q0, phi0, 200, engine="kernel")
    b = integrate_el(m, q0, phi0, 200, engine="callbacks")
    np.testing.assert_allclose(a.q, b.q, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(a.phi, b.phi, rtol=1e-11, atol=1e-12)
    fa = gradient_flow(m, q0, +1, 100, engine="kernel")
    fb = gradient_flow(m, q0, +1, 100, engine="callbacks")
    np.testing.assert_allclose(fa, fb, rtol=1e-11, atol=1e-12)


@pytest.mark.parametrize("name, params, q0, phi0", CASES)
def test_compiled_matches_python_fallback(name, params, q0, phi0):
    try:
        compiled = kernels.implementation("compiled")
    except ImportError:
        pytest.skip("compiled extension not built")
    py = kernels.implementation("python")
    family, p = charts.make_chart(name, **params).kernel
    p = np.asarray(p, dtype=float)
    y0 = np.ascontiguousarray(q0 + phi0, dtype=float)
    yc, _, sc = compiled.el_rk4(family, p, y0, 300)
    yp, _, sp = py.el_rk4(family, p, y0, 300)
    assert sc == sp == 0
    np.testing.assert_allclose(np.asarray(yc), yp, rtol=1e-13, atol=1e-14)


def test_both_backends_flag_domain_exit():
    family, p = charts.cone_entropy().kernel
    p = np.asarray(p, dtype=float)
    y0 = np.array([0.1, -20.0])
    for name in ("python", "compiled"):
        try:
            impl = kernels.implementation(name)
        except ImportError:
            continue
        _, t_fail, status = impl.el_rk4(family, p, y0, 1000)
        assert status in (1, 2) and 0.0 < t_fail < 1.0


def test_unknown_engine_and_backend():
    with pytest.raises(ValueError):
        kernels.implementation("fortran")
    with pytest.raises(ValueError):
        integrate_el(charts.euclidean(1), [0.0], [1.0], 10, engine="gpu")


def test_forced_fallback_selected_at_import():
    code = ("import numpy as np; from geobridge import charts, kernels; "
            "from geobridge.dynamics import integrate_el; "
            "tr = integrate_el(charts.cone_entropy(), [1.0], [3.0], 100); "
            "print(kernels.BACKEND, repr(float(tr.q[-1, 0])))")
    env = dict(os.environ, GEOBRIDGE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    backend, value = out.stdout.split()
    assert backend == "python"
    ref = integrate_el(charts.cone_entropy(), [1.0], [3.0], 100).q[-1, 0]
    assert float(value) == pytest.approx(ref, rel=1e-13)
