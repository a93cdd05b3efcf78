"""Compare the compiled and pure-Python simulation kernels.

    python benchmarks/bench_kernels.py [--repeat N] [--t-end SECONDS]

Each registry scenario (and the standalone estimator loop) is run on every
available backend; the table lists the best wall time, the speedup over the
Python fallback and the largest difference between the backends' traces.
"""

from __future__ import annotations

import argparse
import dataclasses
import time

import numpy as np

from noncollocated.kernels import available, get_backend
from noncollocated.sim.engine import Event, EventTimeline, run_scenario
from noncollocated.sim.scenarios import scenario_registry


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def shortened(cfg, t_end):
    # keep the events that still fall inside the window, shifted to start at 0.5 s
    first = min(cfg.events.times(), default=0.0)
    evs = tuple(dataclasses.replace(e, time=e.time - first + 0.5) for e in cfg.events
                if e.time - first + 0.5 < t_end)
    return dataclasses.replace(cfg, t_end=t_end, events=EventTimeline(evs))


def max_diff(a, b):
    return max(float(np.max(np.abs(a[n] - b[n]))) for n in a.names)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--t-end", type=float, default=2.0, help="simulated seconds per case")
    args = ap.parse_args(argv)
    backends = available()
    print(f"backends: {', '.join(backends)}; {args.t_end:g} s simulated per case, "
          f"best of {args.repeat}\n")
    head = f"{'case':45s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}{'max |diff|':>12s}"
    print(head)
    print("-" * len(head))
    for name, sc in scenario_registry().items():
        for cfg in sc.variants:
            cfg = shortened(cfg, args.t_end)
            times, traces = {}, {}
            for b in backends:
                times[b], traces[b] = best_of(lambda: run_scenario(cfg, b), args.repeat)
            row(f"{name}/{cfg.label}", times, traces, backends)

    n = int(round(args.t_end / 2e-4))
    sig = 0.2 + np.sin(16.4 * np.arange(n) * 2e-4)
    times, outs = {}, {}
    for b in backends:
        impl = get_backend(b)
        times[b], outs[b] = best_of(
            lambda: impl.run_estimator(sig, 2e-4, 40.0, 200.0, 0.1, 0.0, 24.6), args.repeat)
    diff = (max(float(np.max(np.abs(x - y))) for x, y in zip(outs["python"], outs["cython"]))
            if "cython" in outs else 0.0)
    print_row("estimator loop", times, backends, diff)


def row(label, times, traces, backends):
    diff = max_diff(traces["python"], traces["cython"]) if "cython" in traces else 0.0
    print_row(label, times, backends, diff)


def print_row(label, times, backends, diff):
    cells = "".join(f"{times[b] * 1e3:10.1f}ms" for b in backends)
    speed = times["python"] / times["cython"] if "cython" in times else 1.0
    print(f"{label:45s}{cells}{speed:9.0f}x{diff:12.2e}")


if __name__ == "__main__":
    main()
