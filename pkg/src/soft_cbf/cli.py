"""Command-line entry point: ``soft-cbf {run,plan,bench,validate}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, checks
from ._backend import BACKEND
from .closed_loop import steps_for
from .sim import CONTROLLERS, bundled_scenarios, load_scenario, plan_scenario, run_scenario


def _scenario(args):
    sc = load_scenario(args.scenario)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.dt is not None:
        changes["dt_s"] = args.dt
    if args.duration is not None:
        changes["duration_s"] = args.duration
    if getattr(args, "controller", None):
        changes["controller"] = args.controller
    return sc.replace(**changes) if changes else sc


def _write_json(obj, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, default=float) + "\n")
    return path


def cmd_run(args) -> int:
    sc = _scenario(args)
    log = run_scenario(sc)
    out = Path(args.out)
    stem = f"{sc.name}_{sc.controller.replace('*', 'star')}"
    csv_path = log.write_csv(out / f"{stem}.csv")
    summary = log.summary()
    summary["backend"] = BACKEND
    _write_json(summary, out / f"{stem}_summary.json")
    print(f"wrote {csv_path} ({len(log)} records, {steps_for(sc.duration_s, sc.dt_s)} steps)")
    print(f"final V = {summary['final_V']:.6g}, min b_min = {summary['min_b_min']:.6g}")
    return 0


def cmd_plan(args) -> int:
    sc = _scenario(args)
    result, pmodel = plan_scenario(sc)
    report = {
        "scenario": sc.name,
        "seed": sc.seed,
        "q_labels": pmodel.q_labels(),
        "waypoints": [np.asarray(w).tolist() for w in result.waypoints],
        "reached_goal": result.reached_goal,
        "best_V": result.best_V,
        "samples_used": result.samples_used,
        "node_count": result.node_count,
        "path_cost": result.path_cost,
        "planning_seconds": result.planning_seconds,
    }
    path = _write_json(report, Path(args.out) / f"{sc.name}_plan.json")
    print(f"wrote {path}: {len(result.waypoints)} waypoints, reached_goal={result.reached_goal}, "
          f"best V = {result.best_V:.4g}, {result.planning_seconds:.1f} s")
    return 0


def cmd_bench_table1(args) -> int:
    rep = bench.benchmark_table1(args.instances, args.calls, args.m, args.seed or 0)
    out = Path(args.out)
    bench.write_table1_csv(rep, out / "table1.csv")
    _write_json(rep, out / "table1.json")
    for k in bench.METRICS:
        s = rep["accuracy"][k]
        print(f"{k:22s} mean={s['mean']:.2e} median={s['median']:.2e} p95={s['p95']:.2e} max={s['max']:.2e}")
    print(f"closed form {rep['closed_form_seconds'] * 1e6:.2f} us, interior point {rep['qp_seconds'] * 1e6:.2f} us, "
          f"speedup {rep['speedup']:.1f}x, active sets {rep['active_set_matches']}/{rep['n_instances']}")
    return 0


def cmd_bench_resolution(args) -> int:
    sc = load_scenario(args.scenario)
    rows = bench.benchmark_resolution_scaling(sc, args.n_res, args.calls, args.oracle_calls, args.seed or 0)
    path = bench.write_rows_csv(rows, Path(args.out) / "resolution.csv")
    for r in rows:
        print(f"N_res={r['n_res']:4d} closed-form {r['closed_form_seconds'] * 1e3:.3f} ms, "
              f"oracle {r['oracle_seconds'] * 1e3:.3f} ms, pairwise oracle {r['pairwise_oracle_seconds'] * 1e3:.3f} ms, "
              f"Hausdorff {r['hausdorff_error'] * 1e3:.3f} mm")
    print(f"wrote {path}")
    return 0


def cmd_validate(args) -> int:
    results = checks.run_all()
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_list(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand; the subcommand
    # copies default to SUPPRESS so they never overwrite a top-level value
    def add_globals(parser, defaults):
        parser.add_argument("--seed", type=int, default=defaults["seed"], help="override the scenario/benchmark seed")
        parser.add_argument("--out", default=defaults["out"], help="output directory (default: ./out)")
        parser.add_argument("--dt", type=float, default=defaults["dt"], help="override the time step [s]")
        parser.add_argument("--duration", type=float, default=defaults["duration"], help="override the duration [s]")

    common = argparse.ArgumentParser(add_help=False)
    add_globals(common, dict.fromkeys(("seed", "out", "dt", "duration"), argparse.SUPPRESS))

    p = argparse.ArgumentParser(prog="soft-cbf", description=__doc__)
    add_globals(p, {"seed": None, "out": "out", "dt": None, "duration": None})
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="simulate a scenario and write its log")
    r.add_argument("scenario", help="YAML file or bundled scenario name")
    r.add_argument("--controller", choices=CONTROLLERS, help="override the scenario controller")
    r.set_defaults(func=cmd_run)

    pl = sub.add_parser("plan", parents=[common], help="RRT* plan only; writes the plan as JSON")
    pl.add_argument("scenario")
    pl.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="benchmarks")
    bsub = b.add_subparsers(dest="bench", required=True)
    t1 = bsub.add_parser("table1", parents=[common], help="closed form vs interior point")
    t1.add_argument("--instances", type=int, default=200)
    t1.add_argument("--calls", type=int, default=10000)
    t1.add_argument("--m", type=int, default=6)
    t1.set_defaults(func=cmd_bench_table1)
    rs = bsub.add_parser("resolution", parents=[common], help="latency and body error vs sphere count")
    rs.add_argument("--scenario", default="setpoint_three_obstacles")
    rs.add_argument("--n-res", type=int, nargs="+", default=[20, 40, 100, 200, 400])
    rs.add_argument("--calls", type=int, default=50)
    rs.add_argument("--oracle-calls", type=int, default=5)
    rs.set_defaults(func=cmd_bench_resolution)

    v = sub.add_parser("validate", parents=[common], help="run the quick invariant suites")
    v.set_defaults(func=cmd_validate)

    ls = sub.add_parser("list", parents=[common], help="list bundled scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
