"""Compare the compiled and pure-Python integrator kernels.

Runs the same hover workload through both backends and reports per-call and
whole-scenario timings.  The two must agree byte-for-byte (asserted here as
well as in the test suite); speed is the only difference.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tmdc import kernels
from tmdc.cli import resolve_scenario
from tmdc.scenario import run_scenario


def bench_raw(integrate, n_calls: int = 2000) -> float:
    """Time integrate() on a representative near-hover state."""
    state = np.zeros(15)
    state[2] = 0.5
    cmd = np.array([0.41, 0.02, -0.01, 0.1])
    phys = np.array([
        2.5, 0.082, 0.082, 0.149, 60.0, 1.0, 0.23, 1.0, 1.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 12.0, 0.9, 0.15, 9.81,
    ])
    # warm up, then time
    integrate(state.copy(), cmd, phys, 0.0125, 0.0025)
    t0 = time.perf_counter()
    s = state.copy()
    for _ in range(n_calls):
        integrate(s, cmd, phys, 0.0125, 0.0025)
    return (time.perf_counter() - t0) / n_calls


def bench_scenario(name: str = "hover") -> dict[str, float]:
    out = {}
    scenario = resolve_scenario(name)
    traces = {}
    for backend in kernels.available_backends():
        kernels.use(backend)
        t0 = time.perf_counter()
        result = run_scenario(scenario)
        out[backend] = time.perf_counter() - t0
        traces[backend] = result.record.to_csv()
    if len(traces) == 2:
        a, b = traces.values()
        assert a == b, "backends diverged; traces are not byte-identical"
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3, help="scenario repetitions")
    parser.add_argument("--calls", type=int, default=2000, help="raw kernel calls")
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"backends available: {', '.join(backends)}")

    print("\nraw integrate(), one 80 Hz tick (5 substeps at 2.5 ms):")
    per_call = {}
    for backend in backends:
        dt = bench_raw(kernels.get_backend(backend), args.calls)
        per_call[backend] = dt
        print(f"  {backend:<7} {dt * 1e6:8.2f} us/call")
    if len(per_call) == 2:
        print(f"  speedup: {per_call['python'] / per_call['cython']:.1f}x")

    print("\nfull hover scenario (30 s simulated):")
    best = {b: float("inf") for b in backends}
    for _ in range(args.repeat):
        for backend, wall in bench_scenario().items():
            best[backend] = min(best[backend], wall)
    for backend in backends:
        print(f"  {backend:<7} {best[backend]:6.2f} s")
    if len(best) == 2:
        print(f"  speedup: {best['python'] / best['cython']:.1f}x")
    print("\ntraces byte-identical across backends: ok")


if __name__ == "__main__":
    main()
