"""Throughput comparison of the compiled and pure-Python kernels.

Runs the main batch drivers on both backends with identical inputs (the
outputs are bit-identical by construction; this script only times them) and
prints a small table.  Usage:

    python3 benchmarks/bench_backends.py [--n 20000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from renewbound import dist
from renewbound._kernel import _core, _pure
from renewbound.bounds import BoundParams, assemble_certificate


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20000, help="replicas per op")
    ap.add_argument("--repeat", type=int, default=3, help="timing repeats")
    args = ap.parse_args()
    n = args.n

    model = dist.uniform(1.0, 2.0)
    comp = dist.UniformComponent(1.5, 0.5, 0.9)
    cert = assemble_certificate(model, comp, BoundParams(1.0, 0.5, 7e-3))

    backends = [("pure", _pure)]
    if _core is not None:
        backends.append(("compiled", _core))
    else:
        print("compiled kernel unavailable; timing the pure backend only")

    out_x = np.empty(n)
    out_t = np.empty(n)
    out_tbar = np.empty(n)
    out_gap = np.empty(n)
    out_steps = np.empty(n, dtype=np.int64)
    out_iters = np.empty(n, dtype=np.int64)

    def ops(backend):
        h = model.kernel_handle(backend)
        return [
            ("sample_batch", lambda: backend.sample_batch(h, 1, 0, n, out_x)),
            ("step1_batch", lambda: backend.step1_batch(
                h, 4.0, cert.r, 10**9, 1, 0, n,
                out_t, out_tbar, out_gap, out_steps)),
            ("coupling_batch", lambda: backend.coupling_batch(
                h, comp.c, comp.L, comp.eta, cert.r, 2.0,
                10**9, 10**6, 1, 0, n, out_t, out_iters)),
        ]

    names = [name for name, _ in ops(backends[0][1])]
    results = {}
    for bname, backend in backends:
        for opname, fn in ops(backend):
            results[(bname, opname)] = _time(fn, args.repeat)

    width = max(len(s) for s in names)
    header = f"{'op':<{width}}  {'n':>8}"
    for bname, _ in backends:
        header += f"  {bname + ' (s)':>14}"
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for opname in names:
        row = f"{opname:<{width}}  {n:>8}"
        for bname, _ in backends:
            row += f"  {results[(bname, opname)]:>14.4f}"
        if len(backends) == 2:
            ratio = results[("pure", opname)] / results[("compiled", opname)]
            row += f"  {ratio:>7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
