"""Compare the numba and numpy kernel paths.

    python3 benchmarks/bench_kernels.py [--sizes 256 512 1024] [--repeat 20]

Kernel timings are taken in-process from both implementations. The
end-to-end row runs one Krylov evolution in a subprocess per backend, with
``DQCOMM_DISABLE_NUMBA`` selecting the path.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dqcomm import _kernels as k

E2E = """
import time
from dqcomm import _kernels
from dqcomm.lattice import AbsorbingLayer, LatticeSpec
from dqcomm.propagation import evolve_krylov
from dqcomm.states import FULLGRID, inject_delta
lat = LatticeSpec(({n}, {n}), absorbing_layer=AbsorbingLayer(20, 1.0))
s = inject_delta(lat, ({n} // 2, {n} // 2), FULLGRID)
evolve_krylov(s, 0.5)
t = time.perf_counter()
evolve_krylov(s, {t})
print(_kernels.backend(), time.perf_counter() - t)
"""


def _best(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        diag = rng.uniform(1, 3, (n, n)).astype(complex)
        out = np.empty_like(x)
        lo, hi = (n // 4, n // 4), (3 * n // 4, 3 * n // 4)
        entry = {"n": n,
                 "matvec_numpy": _best(lambda: k.stencil_matvec_numpy(diag, x, out), repeat),
                 "box_numpy": _best(lambda: k.box_weight_numpy(x, lo, hi), repeat)}
        if k.stencil_matvec_numba is not None:
            entry["matvec_numba"] = _best(lambda: k.stencil_matvec_numba(diag, x, out), repeat)
            entry["box_numba"] = _best(lambda: k.box_weight_numba(x, lo, hi), repeat)
        rows.append(entry)
    return rows


def bench_end_to_end(n, t):
    results = {}
    for flag in ("0", "1"):
        env = dict(os.environ, DQCOMM_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", E2E.format(n=n, t=t)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        results[out[0]] = float(out[1])
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 512, 1024])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--e2e-size", type=int, default=256)
    ap.add_argument("--e2e-time", type=float, default=10.0)
    args = ap.parse_args(argv)

    print(f"kernel backend available: {'numba' if k.HAS_NUMBA else 'numpy only'}")
    print(f"{'n':>6} {'matvec numpy':>14} {'matvec numba':>14} {'box numpy':>12} {'box numba':>12}")
    for r in bench_kernels(args.sizes, args.repeat):
        mn = r.get("matvec_numba", float("nan"))
        bn = r.get("box_numba", float("nan"))
        print(f"{r['n']:>6} {r['matvec_numpy'] * 1e3:>12.3f}ms {mn * 1e3:>12.3f}ms "
              f"{r['box_numpy'] * 1e3:>10.3f}ms {bn * 1e3:>10.3f}ms")
    e2e = bench_end_to_end(args.e2e_size, args.e2e_time)
    print(f"krylov evolve {args.e2e_size}x{args.e2e_size} to t={args.e2e_time}: "
          + ", ".join(f"{b} {s:.3f}s" for b, s in sorted(e2e.items())))


if __name__ == "__main__":
    main()
