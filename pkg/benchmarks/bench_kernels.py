"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Also times one full Ricci evaluation per backend in a subprocess, since the
backend is fixed at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from kahlervar import _kernels_py, kernels

RICCI_SNIPPET = """
import time, numpy as np
from kahlervar import kernels
from kahlervar.bakry_emery import KahlerState
from kahlervar.spectral_fields import TorusGrid
grid = TorusGrid({n}, {res})
x = grid.coords()
phi = 0.002 * np.cos(x[0]) + 0.001 * np.sin(x[1] + x[2 % grid.dim])
st = KahlerState.from_potential(grid, phi)
t0 = time.perf_counter(); st.ricci; print(kernels.BACKEND, time.perf_counter() - t0)
"""


def _fields(n, res, seed=0):
    rng = np.random.default_rng(seed)
    d = 2 * n
    grid = (res,) * d
    a = rng.standard_normal((d, d) + grid) * 0.05
    g = np.eye(d).reshape((d, d) + (1,) * d) + 0.5 * (a + a.swapaxes(0, 1))
    dg = rng.standard_normal((d, d, d) + grid) * 0.05
    dg = 0.5 * (dg + dg.swapaxes(1, 2))
    T = rng.standard_normal((d, d) + grid)
    return g, dg, T


def bench(n, res, repeat):
    g, dg, T = _fields(n, res)
    ginv, _ = _kernels_py.sym_inverse(g)
    gamma = _kernels_py.christoffel(ginv, dg)
    cases = {
        "sym_inverse": (lambda: _kernels_py.sym_inverse(g), lambda: kernels.sym_inverse(g)),
        "christoffel": (lambda: _kernels_py.christoffel(ginv, dg), lambda: kernels.christoffel(ginv, dg)),
        "connection_terms": (lambda: _kernels_py.connection_terms(T, gamma, (0, 1)),
                             lambda: kernels.connection_terms(T, gamma, (0, 1))),
    }
    rows = []
    for name, (py, comp) in cases.items():
        a, b = py(), comp()
        a = a[0] if isinstance(a, tuple) else a
        b = b[0] if isinstance(b, tuple) else b
        diff = float(np.max(np.abs(a - b)))
        t_py = min(timeit.repeat(py, number=1, repeat=repeat))
        t_c = min(timeit.repeat(comp, number=1, repeat=repeat))
        rows.append((name, n, res, t_py, t_c, diff))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"backend at import: {kernels.BACKEND}")
    print(f"{'kernel':<18}{'n':>3}{'res':>5}{'python [s]':>13}{'compiled [s]':>14}{'speedup':>9}{'max diff':>11}")
    for n, res in ((1, 64), (2, 16)):
        for name, n_, r, tp, tc, diff in bench(n, res, args.repeat):
            print(f"{name:<18}{n_:>3}{r:>5}{tp:>13.4f}{tc:>14.4f}{tp / tc:>9.2f}{diff:>11.1e}")
    print("\nRicci tensor, full pipeline (n=2, res 16):")
    for env in ({"KAHLERVAR_PURE_PYTHON": "1"}, {"KAHLERVAR_PURE_PYTHON": "0"}):
        out = subprocess.run([sys.executable, "-c", RICCI_SNIPPET.format(n=2, res=16)],
                             env={**os.environ, **env}, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"  {backend:<10}{float(secs):.3f} s")


if __name__ == "__main__":
    main()
