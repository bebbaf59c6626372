"""Compare the compiled kernels with the numpy fallback.

Times each kernel on inputs shaped like an MZ6 step (11 quadrature nodes,
1000 grid points), then times whole MZ6 evolutions with each backend in a
fresh interpreter, since the backend is fixed at import.

    python benchmarks/bench_kernels.py [--grid-points 1000] [--steps 100]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from mzsplit import _kernels_py as py

try:
    from mzsplit import _kernels as cy
except ImportError:  # extension not built
    cy = None

EVOLVE_SNIPPET = """
import json, time
import mzsplit
from mzsplit import StepContext, evolve
from mzsplit.bench.presets import make_problem
pb = make_problem("double_well_chirp", 1e-2, {m})
ctx = StepContext(eps=1e-2, h=2.5 / {n})
evolve(pb.u0, pb.potential, 0.0, 0.25, 10, ctx)  # warm up
start = time.perf_counter()
evolve(pb.u0, pb.potential, 0.0, 2.5, {n}, ctx)
print(json.dumps({{"backend": mzsplit.BACKEND, "seconds": time.perf_counter() - start}}))
"""


def kernel_inputs(n_nodes: int, n_points: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    c = lambda *s: rng.normal(size=s) + 1j * rng.normal(size=s)  # noqa: E731
    return {
        "node_contract": (rng.normal(size=n_nodes), rng.normal(size=(n_nodes, n_points))),
        "parity_split": (rng.normal(size=(n_nodes, n_points)),),
        "bilinear_contract": (rng.normal(size=(n_nodes, n_nodes)), rng.normal(size=(n_nodes, n_points)),
                              rng.normal(size=(n_nodes, n_points))),
        "symop_accumulate": (c(n_points), c(n_points), c(4, n_points), c(4, n_points)),
    }


def time_call(fn, args, repeat: int = 7) -> float:
    number = max(1, int(0.05 / max(timeit.timeit(lambda: fn(*args), number=1), 1e-7)))
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def evolve_seconds(pure: bool, m: int, n: int) -> dict:
    env = {**os.environ, "MZSPLIT_PURE_PYTHON": "1" if pure else "0"}
    out = subprocess.run([sys.executable, "-c", EVOLVE_SNIPPET.format(m=m, n=n)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid-points", type=int, default=1000)
    ap.add_argument("--nodes", type=int, default=11)
    ap.add_argument("--steps", type=int, default=100)
    args = ap.parse_args(argv)

    print(f"kernels on {args.nodes} nodes x {args.grid_points} points")
    print(f"{'kernel':<20}{'numpy [us]':>12}{'cython [us]':>13}{'ratio':>8}")
    for name, inputs in kernel_inputs(args.nodes, args.grid_points).items():
        t_py = time_call(getattr(py, name), inputs)
        if cy is None:
            print(f"{name:<20}{1e6 * t_py:>12.2f}{'-':>13}{'-':>8}")
            continue
        t_cy = time_call(getattr(cy, name), inputs)
        print(f"{name:<20}{1e6 * t_py:>12.2f}{1e6 * t_cy:>13.2f}{t_py / t_cy:>8.2f}")

    print(f"\nMZ6 evolution, eps=1e-2, M={args.grid_points}, N={args.steps}")
    for pure in (True, False):
        if not pure and cy is None:
            print("cython backend not built")
            continue
        res = evolve_seconds(pure, args.grid_points, args.steps)
        print(f"{res['backend']:<8}{res['seconds']:8.3f} s  ({1e3 * res['seconds'] / args.steps:.2f} ms/step)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
