"""Time the circle-mean kernels with and without numba.

Each backend runs in its own interpreter because ``BREMERMANN_DISABLE_NUMBA``
is read at import time.  Usage::

    python benchmarks/bench_kernels.py [--spacing 0.1] [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from bremermann import DomainSpec, ScalarField, build_grid, psh_envelope
from bremermann._accel import use_numba
from bremermann.envelope import _cfg, field_scheme

h, repeat = float(sys.argv[1]), int(sys.argv[2])
out = {"numba": use_numba()}
for n, sp in ((1, h / 8), (2, h)):
    g = build_grid(DomainSpec("ball", n, {"radius": 1.0}), [[-1.2, 1.2]] * (2 * n), sp)
    f = ScalarField.from_function(g, lambda X: np.sum(X**2, axis=1))
    sch = field_scheme(f, _cfg(None, g))
    sch.means(f.interior)  # warm up (jit compile, stencil)
    policy = np.zeros(g.n_interior, dtype=np.int64)
    sch.matrix(policy)
    t = time.perf_counter()
    for _ in range(repeat):
        sch.means(f.interior)
    t_means = (time.perf_counter() - t) / repeat
    t = time.perf_counter()
    for _ in range(repeat):
        sch.matrix(policy)
    t_assemble = (time.perf_counter() - t) / repeat
    t = time.perf_counter()
    psh_envelope(g, lambda X: X[:, 0] ** 2 + X[:, 1] ** 2)
    t_solve = time.perf_counter() - t
    out[f"C{n}"] = {"nodes": int(g.n_interior), "means_s": t_means, "assemble_s": t_assemble,
                    "envelope_s": t_solve}
print(json.dumps(out))
"""


def run(disable, spacing, repeat):
    env = dict(os.environ, BREMERMANN_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(spacing), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spacing", type=float, default=0.1, help="C^2 lattice spacing (C^1 uses spacing/8)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast = run(False, args.spacing, args.repeat)
    slow = run(True, args.spacing, args.repeat)
    if not fast["numba"]:
        print("numba unavailable: both columns use numpy")
    print(f"{'case':<14}{'nodes':>8}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for dim in ("C1", "C2"):
        for key in ("means_s", "assemble_s", "envelope_s"):
            a, b = fast[dim][key], slow[dim][key]
            print(f"{dim + ' ' + key[:-2]:<14}{fast[dim]['nodes']:>8}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}")


if __name__ == "__main__":
    main()
