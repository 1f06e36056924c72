"""Per-call latency of the hot kernels: compiled extension vs numpy fallback.

    python benchmarks/bench_backends.py [--calls N] [--csv out.csv]
"""

from __future__ import annotations

import argparse
import csv
import time

import numpy as np

from soft_cbf._backend import available_backends
from soft_cbf.bench import random_rows
from soft_cbf.kinematics import RobotModel, embed, sphere_abscissae
from soft_cbf.sim import load_scenario


def _cases(model, layout, obstacles, rng):
    tw = embed(model, rng.uniform(-1.0, 1.0, model.n_q) * np.where(model.active_columns % 6 < 3, 8.0, 0.05))
    s40 = sphere_abscissae(model, 40)
    centers = np.array([o.center for o in obstacles])
    radii = np.array([o.radius for o in obstacles])
    offsets, term = layout.offsets(), layout.termination
    rows = random_rows(rng)
    return {
        "chain_positions (40 pts)": lambda k: k.chain_positions(tw, model.segment_lengths, model.mount, s40),
        "chain_jacobians (40 pts)": lambda k: k.chain_jacobians(tw, model.segment_lengths, model.mount, s40),
        "min_pair_barrier (40x3)": lambda k: k.min_pair_barrier(
            tw, model.segment_lengths, model.mount, s40, model.body_radius, centers, radii, 0.0
        ),
        "tendon_kinematics (6 tendons)": lambda k: k.tendon_kinematics(tw, model.segment_lengths, offsets, term),
        "closed_form (m=6)": lambda k: k.closed_form(rows.a_V, rows.b_V, rows.a_h, rows.b_h, 100.0, False),
    }


def time_call(fn, calls: int) -> float:
    for _ in range(max(1, calls // 10)):
        fn()
    t0 = time.perf_counter()
    for _ in range(calls):
        fn()
    return (time.perf_counter() - t0) / calls


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--calls", type=int, default=2000)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args(argv)

    backends = available_backends()
    sc = load_scenario("setpoint_three_obstacles")
    model: RobotModel = sc.robot
    cases = _cases(model, sc.layout, sc.obstacles, np.random.default_rng(0))
    rows = []
    for name, fn in cases.items():
        row = {"kernel": name}
        for bname, mod in backends.items():
            row[f"{bname}_us"] = time_call(lambda: fn(mod), args.calls) * 1e6
        if "cython" in backends:
            row["speedup"] = row["python_us"] / row["cython_us"]
        rows.append(row)
        print("  ".join(f"{k}={v:.2f}" if isinstance(v, float) else f"{v:32s}" for k, v in row.items()))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return rows


if __name__ == "__main__":
    main()
