"""Benchmark the compiled kernels against the pure-Python fallback.

Run as ``python -m ranktwo.bench``.  The workloads mirror the three kernel
entry points; both backends consume identical random streams, so the outputs
are checked for equality while timing.
"""

from __future__ import annotations

import math
import time

import numpy as np

from ._engine import HAVE_COMPILED
from .chain import constant_chain, simulate_chain_batch
from .coupling import run_coupled_batch
from .geometry import Catenoid
from .martingale import SimConfig, simulate_paths


def _time(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def run(n_paths: int = 30, chain_runs: int = 2000, coupled_runs: int = 1000) -> list[dict]:
    rows = []
    cat = Catenoid(a=1.0)
    start = cat.point_at_radius(math.e**2)
    cfg = SimConfig(inner_level=1, step_mode="radial", dt=1e-3 * math.e**2,
                    max_steps=20_000, track_walk=True, watch_levels=(3,),
                    rho_grid=(10.0,))

    def paths(engine):
        return simulate_paths(cat, start, cfg, n_paths, 7, engine=engine)

    spec = constant_chain(0.5)

    def chains(engine):
        return simulate_chain_batch(spec, 1, 4000, chain_runs, 7, engine=engine)

    phi = np.full(10_002, 0.4)

    def coupled(engine):
        return run_coupled_batch(spec, phi, coupled_runs, 7, max_steps=10_000,
                                 engine=engine)

    for name, fn, key in (
        ("sde_paths", paths, "t_end"),
        ("chain_walks", chains, "steps"),
        ("coupled_runs", coupled, "steps"),
    ):
        py_out, py_t = _time(lambda: fn("python"))
        row = {"workload": name, "python_s": py_t}
        if HAVE_COMPILED:
            c_out, c_t = _time(lambda: fn("compiled"))
            a = getattr(py_out, key) if hasattr(py_out, key) else py_out[key]
            b = getattr(c_out, key) if hasattr(c_out, key) else c_out[key]
            row["compiled_s"] = c_t
            row["speedup"] = py_t / c_t
            row["identical"] = bool(np.array_equal(a, b))
        rows.append(row)
    return rows


def main() -> None:
    rows = run()
    width = max(len(r["workload"]) for r in rows)
    print(f"{'workload':<{width}}  python[s]  compiled[s]  speedup  identical")
    for r in rows:
        if "compiled_s" in r:
            print(
                f"{r['workload']:<{width}}  {r['python_s']:9.3f}  "
                f"{r['compiled_s']:11.3f}  {r['speedup']:7.1f}  {r['identical']}"
            )
        else:
            print(f"{r['workload']:<{width}}  {r['python_s']:9.3f}  (no extension)")


if __name__ == "__main__":
    main()
