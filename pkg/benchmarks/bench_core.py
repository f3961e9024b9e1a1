"""Compare the compiled and pure-Python kernel backends.

Usage::

    python3 benchmarks/bench_core.py [--repeat 3] [--quick]

Times the thinning simulator and the cross-covariance estimator on the
block model, compares the outputs of both backends and prints
the speedup. Simulated streams match bit for bit; covariance estimates
agree to rounding.
"""

import argparse
import time

import numpy as np

from ghawkes import RandomKey, build_block_model, simulate
from ghawkes._backend import available_backends
from ghawkes.estimate import bandwidth_rule, default_grid, estimate_cross_cov


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the Python backend is available")
    p, T = (8, 200.0) if args.quick else (20, 400.0)
    model = build_block_model(p)
    key = RandomKey(2024)
    h = bandwidth_rule(T)
    grid = default_grid(h, 10.0)

    cases = {
        f"simulate p={p} T={T:g}": lambda be: simulate(model, T, key, backend=be),
        f"estimate_cross_cov p={p} T={T:g} grid={grid.size}": lambda be: estimate_cross_cov(stream, grid, h,
                                                                                            backend=be),
    }
    stream = simulate(model, T, key)
    print(f"{len(stream)} events in the estimation stream\n")
    print(f"{'case':<48}" + "".join(f"{be:>12}" for be in backends) + f"{'speedup':>10}")
    for name, fn in cases.items():
        results = {}
        timings = {}
        for be in backends:
            timings[be], results[be] = best_of(lambda: fn(be), args.repeat)
        speed = timings["python"] / timings["cython"] if "cython" in timings else float("nan")
        print(f"{name:<48}" + "".join(f"{timings[be]:>11.4f}s" for be in backends) + f"{speed:>9.1f}x")
        if len(backends) == 2:
            a, b = results["python"], results["cython"]
            if hasattr(a, "times"):
                same = np.array_equal(a.times, b.times) and np.array_equal(a.marks, b.marks)
                print(f"{'':<48}identical event streams: {same}")
            else:
                # summation order differs between backends, so agreement is to rounding
                diff = float(np.max(np.abs(a.values - b.values)))
                print(f"{'':<48}max abs difference: {diff:.1e}")

if __name__ == "__main__":
    main()
