"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--sizes 200 1000 5000] [--repeat 5]
"""
import argparse
import json
import sys
import timeit

import numpy as np

from forwarding import kernels
from forwarding.scenario import reference_initial_state, reference_system
from forwarding.simulate import assemble_closed_loop
from forwarding.design import design
from forwarding.sylvester import solve_sylvester


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_size(n, backends, repeat):
    rng = np.random.default_rng(0)
    sys_n = reference_system(n)
    lo, d, up = sys_n.A.bands
    rhs = rng.normal(size=(n, 2))
    sol = solve_sylvester(sys_n)
    cert = design(sys_n, sol)
    cl = assemble_closed_loop(sys_n, cert.H, cert.k)
    w0 = reference_initial_state(sys_n)
    rows = []
    for name in backends:
        cases = {
            "tridiag_solve": (lambda: kernels.tridiag_solve(lo, 1.0 - d, up, rhs, backend=name), 200),
            "theta_march_1000": (lambda: kernels.theta_march(lo, d, up, cl.U, cl.V, cl.S, w0, 0.01,
                                                             0.5, 1000, backend=name), 1),
            "solve_sylvester": (lambda: solve_sylvester(sys_n, backend=name), 5),
        }
        for case, (fn, number) in cases.items():
            rows.append({"n": n, "backend": name, "case": case, "seconds": _best(fn, repeat, number)})
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[200, 1000, 5000])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", action="store_true", help="print rows as JSON")
    args = parser.parse_args(argv)

    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled kernels unavailable; timing the fallback only", file=sys.stderr)
    rows = [r for n in args.sizes for r in bench_size(n, backends, args.repeat)]
    if args.json:
        print(json.dumps(rows, indent=2))
        return 0
    timing = {(r["n"], r["case"], r["backend"]): r["seconds"] for r in rows}
    print(f"{'n':>6} {'case':<18} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for n in args.sizes:
        for case in ("tridiag_solve", "theta_march_1000", "solve_sylvester"):
            py = timing[(n, case, "python")] * 1e3
            cy = timing.get((n, case, "cython"))
            if cy is None:
                print(f"{n:>6} {case:<18} {py:>12.3f} {'-':>12} {'-':>8}")
            else:
                print(f"{n:>6} {case:<18} {py:>12.3f} {cy * 1e3:>12.3f} {py / (cy * 1e3):>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
