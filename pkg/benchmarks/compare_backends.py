#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-Python fallback.

Runs the same scenario through both backends, reports steps/second, and
verifies that the two trajectories are bit-for-bit identical (they execute
the same operations in the same order, so any drift is a bug).

Usage:
    python benchmarks/compare_backends.py [--scenario nominal]
        [--duration 5.0] [--repeat 3]
"""

import argparse
import time

import numpy as np

from safeform.scenario_io import load_scenario
from safeform.sim import run

BACKENDS = ("python", "cython")


def time_backend(scenario, backend: str, repeat: int):
    best = float("inf")
    log = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        log = run(scenario, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return log, best


def bit_identical(a, b) -> bool:
    arrays = ("positions", "velocities", "controls", "nominal_controls", "qp_slack", "scalars")
    return (
        all(np.array_equal(getattr(a, n), getattr(b, n)) for n in arrays)
        and a.edges == b.edges
        and [(e.t, e.kind, e.detail) for e in a.events]
        == [(e.t, e.kind, e.detail) for e in b.events]
    )


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="nominal", help="shipped scenario name")
    ap.add_argument("--duration", type=float, default=5.0, help="simulated seconds")
    ap.add_argument("--repeat", type=int, default=3, help="timing repetitions (best wins)")
    args = ap.parse_args()

    sc = load_scenario(args.scenario, [f"duration={args.duration}"])
    steps = round(sc.duration / sc.dt)
    print(f"scenario {sc.name}: {sc.n_agents} agents, {steps} steps of dt={sc.dt}")

    logs = {}
    times = {}
    for backend in BACKENDS:
        log, best = time_backend(sc, backend, args.repeat)
        logs[backend] = log
        times[backend] = best
        print(f"  {backend:>7}: {best:8.3f} s  ({steps / best:10.0f} steps/s)")

    speedup = times["python"] / times["cython"]
    same = bit_identical(logs["python"], logs["cython"])
    print(f"  speedup: {speedup:.1f}x, trajectories bit-identical: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())
