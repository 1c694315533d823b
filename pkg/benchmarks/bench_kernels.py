"""Time the RK4 loops: compiled kernel, pure-Python twin, generic callbacks.

    python3 benchmarks/bench_kernels.py [--steps 1000] [--repeat 5]
"""

import argparse
import json
import timeit

import numpy as np

from geobridge import charts, kernels
from geobridge.dynamics import integrate_el

CASES = [
    ("euclidean-2d", charts.euclidean(2, A=[[2.0, 0.3], [0.3, 1.0]]), [0.3, -0.2], [1.0, 0.4]),
    ("cone-entropy", charts.cone_entropy(), [1.0], [3.0]),
    ("sphere-polar", charts.sphere_polar(), [1.0, 0.2], [0.3, -0.5]),
]


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench(steps, repeat):
    rows = []
    py = kernels.implementation("python")
    try:
        compiled = kernels.implementation("compiled")
    except ImportError:
        compiled = None
    for name, m, q0, phi0 in CASES:
        family, params = m.kernel
        params = np.asarray(params, dtype=float)
        y0 = np.ascontiguousarray(q0 + phi0, dtype=float)
        row = {"case": name, "steps": steps}
        row["python_s"] = best_of(lambda: py.el_rk4(family, params, y0, steps), repeat)
        row["callbacks_s"] = best_of(lambda: integrate_el(m, q0, phi0, steps, engine="callbacks"), repeat)
        if compiled is not None:
            row["compiled_s"] = best_of(lambda: compiled.el_rk4(family, params, y0, steps), repeat)
            row["speedup_vs_python"] = row["python_s"] / row["compiled_s"]
        rows.append(row)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print rows as JSON")
    args = ap.parse_args()
    rows = bench(args.steps, args.repeat)
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"active backend: {kernels.BACKEND}; N = {args.steps}; best of {args.repeat}")
    print(f"{'case':<14} {'compiled':>11} {'python':>11} {'callbacks':>11} {'speedup':>9}")
    for r in rows:
        comp = f"{r['compiled_s'] * 1e3:9.3f}ms" if "compiled_s" in r else f"{'n/a':>11}"
        sp = f"{r['speedup_vs_python']:8.1f}x" if "speedup_vs_python" in r else f"{'':>9}"
        print(f"{r['case']:<14} {comp} {r['python_s'] * 1e3:9.3f}ms {r['callbacks_s'] * 1e3:9.3f}ms {sp}")


if __name__ == "__main__":
    main()
