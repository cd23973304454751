"""Time the numba and numpy kernels of the two-body assembly on one parity block.

    python benchmarks/bench_kernels.py --points 61 91 121
"""

import argparse
import time

import numpy as np

from dimer import kernels
from dimer.grid import GridSpec, build_grid
from dimer.hamiltonian import ParityBasis, build_interferometer_h


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(n, repeat=3):
    grid = build_grid(GridSpec(9.0, n))
    h = build_interferometer_h(grid, -7.0, 0.4)
    imap = h.index_map
    basis = ParityBasis(imap, 1)
    args = (np.ascontiguousarray(h.one_body.matrix), np.full(n, h.contact), imap.pair_a[basis.reps],
            imap.pair_b[basis.reps], imap.lookup, imap.nu, basis.col, basis.coef, basis.f, basis.f)
    dim = basis.dimension
    kernels.assemble_block_numba(*args, np.zeros((dim, dim)))  # compile outside the timing

    t_nb, a = _best(lambda: kernels.assemble_block_numba(*args, np.zeros((dim, dim))), repeat)
    t_np, b = _best(lambda: kernels.assemble_block_numpy(*args, np.zeros((dim, dim))), repeat)
    assert np.allclose(a, b, atol=1e-10)

    u = np.random.default_rng(0).normal(size=imap.dimension)
    unpack_args = (u, imap.pair_a, imap.pair_b, 1 / np.sqrt(2))
    kernels.unpack_numba(*unpack_args, np.zeros((n, n)))
    u_nb, _ = _best(lambda: kernels.unpack_numba(*unpack_args, np.zeros((n, n))), 20)
    u_np, _ = _best(lambda: kernels.unpack_numpy(*unpack_args, np.zeros((n, n))), 20)
    return dim, t_nb, t_np, u_nb, u_np


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--points", type=int, nargs="+", default=[41, 61, 91, 121])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    print(f"{'n':>5} {'block':>7} {'assemble numba':>15} {'numpy':>9} {'x':>6} "
          f"{'unpack numba':>13} {'numpy':>9} {'x':>6}")
    for n in args.points:
        dim, t_nb, t_np, u_nb, u_np = bench(n, args.repeat)
        print(f"{n:5d} {dim:7d} {t_nb:14.4f}s {t_np:8.4f}s {t_np / t_nb:6.1f} "
              f"{u_nb * 1e3:11.3f}ms {u_np * 1e3:7.3f}ms {u_np / u_nb:6.1f}")


if __name__ == "__main__":
    main()
