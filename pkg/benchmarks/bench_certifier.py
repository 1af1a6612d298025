"""Time the exhaustive (r, s)-robustness scan on the compiled and pure-Python kernels.

Speedup is relative to the single-thread pure-Python time at the same n.

    python benchmarks/bench_certifier.py [--sizes 8 9 10 11 12] [--threads 1 4] [--repeat 3]

The pure-Python kernel is skipped above --python-max nodes (default 11)
because it grows as 3^n.
"""

import argparse
import statistics
import time

from msrsim import graph as G


def timed(fn, repeat):
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 9, 10, 11, 12])
    ap.add_argument("--threads", type=int, nargs="+", default=[1, 4])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--python-max", type=int, default=11)
    ap.add_argument("--density", type=float, default=0.6)
    args = ap.parse_args(argv)

    if "compiled" not in G.BACKENDS:
        print("compiled kernel not built; only the python kernel is timed")
    print(f"{'n':>3} {'backend':>9} {'threads':>7} {'median s':>10} {'speedup':>8}")
    for n in args.sizes:
        g = G.random_digraph(n, args.density, seed=n)
        base = None
        results = {}
        for backend in ["python", "compiled"]:
            if backend not in G.BACKENDS or (backend == "python" and n > args.python_max):
                continue
            for threads in args.threads:
                dt, rep = timed(
                    lambda: G.max_robustness(g, cap=max(n, G.DEFAULT_CAP), threads=threads, backend=backend),
                    args.repeat,
                )
                results[(backend, threads)] = (rep.certified, rep.refuted)
                if backend == "python" and threads == 1:
                    base = dt
                speed = f"{base / dt:>7.1f}x" if base else f"{'-':>8}"
                print(f"{n:>3} {backend:>9} {threads:>7} {dt:>10.4f} {speed}")
        reports = list(results.values())
        if any(rp != reports[0] for rp in reports):
            raise SystemExit(f"n={n}: backends disagree")


if __name__ == "__main__":
    main()
