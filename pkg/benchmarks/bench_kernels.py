"""Compare the numba and numpy element kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints, per disc mesh size, the best-of-N time of each path and the largest
difference between their outputs.
"""

import argparse
import timeit

import numpy as np

from twistdn import _jit
from twistdn._kernels import element_matrices
from twistdn.geometry import CrossSection, build_mesh


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--sizes", default="0.05,0.02,0.01")
    args = p.parse_args()
    if not _jit.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'h':>6} {'triangles':>10} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8} {'max diff':>9}")
    for h in (float(s) for s in args.sizes.split(",")):
        mesh = build_mesh(CrossSection.unit_disc(), h)
        v, t = mesh.vertices, mesh.triangles
        element_matrices(v, t, use_jit=True)  # compile / load cache
        t_np = min(timeit.repeat(lambda: element_matrices(v, t, use_jit=False), number=1, repeat=args.repeat))
        t_jit = min(timeit.repeat(lambda: element_matrices(v, t, use_jit=True), number=1, repeat=args.repeat))
        diff = max(float(np.max(np.abs(a - b))) for a, b in
                   zip(element_matrices(v, t, use_jit=True), element_matrices(v, t, use_jit=False)))
        print(f"{h:6.3f} {len(t):10d} {1e3 * t_np:11.2f} {1e3 * t_jit:11.2f} {t_np / t_jit:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
