"""Backend selection for the RK4 hot loops.

The compiled extension ``_kernel`` is used when it was built; otherwise the
pure-Python twin ``_kernel_py`` is loaded.  Setting ``GEOBRIDGE_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _kernel_py

if os.environ.get("GEOBRIDGE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernel_py
else:
    try:
        from . import _kernel as _impl
    except ImportError:  # extension not built
        _impl = _kernel_py

BACKEND = "compiled" if _impl is not _kernel_py else "python"

EUCLID, CONE, SPHERE = 0, 1, 2

el_rk4 = _impl.el_rk4
flow_rk4 = _impl.flow_rk4


def implementation(name: str):
    """Return the ``"compiled"`` or ``"python"`` kernel module explicitly."""
    if name == "python":
        return _kernel_py
    if name == "compiled":
        from . import _kernel
        return _kernel
    raise ValueError(f"unknown kernel backend {name!r}")
