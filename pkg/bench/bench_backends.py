"""Time the hot kernels on both backends and print a comparison table.

Runs the particle schemes and the tagged-path machinery once per backend
through the public entry points (backend="numba" vs backend="numpy") so the
numbers include exactly the code the simulator executes. Invoke from the
repository root:

    python3 bench/bench_backends.py [--n 20000] [--t 0.5] [--repeat 3]

The numba path includes a warmup call so JIT compilation is not billed to
the measurement. With BOLTZNC_NUMBA=0 the numba column is skipped.
"""

import argparse
import time

import numpy as np

from boltznc._backend import NUMBA_AVAILABLE
from boltznc.collision import CrossSection
from boltznc.coupling import freeze_error_curve
from boltznc.simulate import SimConfig, simulate


def sim_seconds(scheme, backend, n, t, seed=9):
    cs = CrossSection(gamma=0.5, nu=0.5, k=10.0)
    cfg = SimConfig(
        n_particles=n, t_end=t, cross_section=cs, scheme=scheme, seed=seed,
        snapshot_times=(t,), f0={"family": "two_point"}, backend=backend,
    )
    start = time.perf_counter()
    simulate(cfg)
    return time.perf_counter() - start


def paths_seconds(backend, n, t, seed=9):
    cs = CrossSection(gamma=0.5, nu=0.5, k=10.0)
    cfg = SimConfig(
        n_particles=min(n, 4000), t_end=t, cross_section=cs, seed=seed,
        snapshot_times=tuple(np.round(np.linspace(0.0, t, 9), 10)),
        f0={"family": "two_point"}, backend=backend,
    )
    background = simulate(cfg)
    start = time.perf_counter()
    freeze_error_curve(
        background, t, cs, [t / 4.0, t / 8.0], 100, seed=seed, backend=backend
    )
    return time.perf_counter() - start


def best_of(fn, repeat, *args):
    return min(fn(*args) for _ in range(repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000, help="particle count")
    ap.add_argument("--t", type=float, default=0.5, help="simulated time span")
    ap.add_argument("--repeat", type=int, default=3, help="timings per cell, best kept")
    args = ap.parse_args()

    cases = [
        ("one-sided scheme", sim_seconds, ("nanbu",)),
        ("pair scheme", sim_seconds, ("symmetric_pair",)),
        ("tagged paths + replay", paths_seconds, ()),
    ]
    backends = ["numpy"] + (["numba"] if NUMBA_AVAILABLE else [])
    if NUMBA_AVAILABLE:
        # warmup: compile every kernel outside the timed region
        sim_seconds("nanbu", "numba", 500, 0.05)
        sim_seconds("symmetric_pair", "numba", 500, 0.05)
        paths_seconds("numba", 500, 0.05)
    else:
        print("numba unavailable or disabled; timing the fallback only\n")

    width = max(len(name) for name, _, _ in cases)
    header = f"{'kernel':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if NUMBA_AVAILABLE:
        header += f"{'speedup':>10}"
    print(f"N = {args.n}, T = {args.t}, best of {args.repeat}")
    print(header)
    print("-" * len(header))
    for name, fn, extra in cases:
        row = [best_of(fn, args.repeat, *extra, b, args.n, args.t) for b in backends]
        line = f"{name:<{width}}  " + "".join(f"{s:>11.3f}s" for s in row)
        if NUMBA_AVAILABLE:
            line += f"{row[0] / row[-1]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
