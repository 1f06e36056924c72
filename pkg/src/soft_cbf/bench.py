"""Accuracy/latency benchmark of the closed form against the interior-point
oracle, and the sphere-resolution scaling study."""

from __future__ import annotations

import csv
import math
import time
from pathlib import Path

import numpy as np

from .controller import HARD, solve_closed_form
from .kinematics import hausdorff_body_error
from .qp import solve_clf_cbf_qp, solve_multi_cbf_qp
from .safety import ConstraintRows, evaluate_rows, pairwise_rows

ACTIVE_TOL = 1e-6

METRICS = (
    "||u_c-u_qp||_inf",
    "||u_c-u_qp||_2",
    "|f(u_c)-f(u_qp)|",
    "max(A u_c - b, 0)",
    "max(A u_qp - b, 0)",
)


def random_rows(rng: np.random.Generator, m: int = 6) -> ConstraintRows:
    """Rows with standard normal entries and ``b_V = |N(0, 1)|``."""
    return ConstraintRows(rng.standard_normal(m), abs(rng.standard_normal()), rng.standard_normal(m), rng.standard_normal())


def active_from_multipliers(lam_V: float, lam_h: float, tol: float = ACTIVE_TOL) -> str:
    return ("none", "clf-only", "cbf-only", "both")[(lam_V > tol) + 2 * (lam_h > tol)]


def constraint_violation(rows: ConstraintRows, u, delta: float = 0.0) -> float:
    """``max(A u - b, 0)`` for the stacked rows ``a_V u - delta <= -b_V``, ``-a_h u <= b_h``."""
    clf = float(rows.a_V @ u) + rows.b_V - delta
    cbf = -(float(rows.a_h @ u) + rows.b_h)
    return max(clf, cbf, 0.0)


def _time_calls(fn, instances, n_calls: int, warmup: int) -> float:
    k = len(instances)
    for i in range(warmup):
        fn(instances[i % k])
    t0 = time.perf_counter()
    for i in range(n_calls):
        fn(instances[i % k])
    return (time.perf_counter() - t0) / n_calls


def _stats(x) -> dict:
    x = np.asarray(x, dtype=float)
    return {
        "mean": float(x.mean()),
        "median": float(np.median(x)),
        "p95": float(np.percentile(x, 95)),
        "max": float(x.max()),
    }


def benchmark_table1(
    n_instances: int = 200,
    n_calls: int = 10000,
    m: int = 6,
    seed: int = 0,
    w_clf: float = math.inf,
    warmup: int | None = None,
) -> dict:
    """Closed form vs interior point on random rows (hard-CLF by default)."""
    rng = np.random.default_rng(seed)
    inst = [random_rows(rng, m) for _ in range(n_instances)]
    diffs = {k: [] for k in METRICS}
    matches = 0
    for r in inst:
        c = solve_closed_form(r, w_clf)
        o = solve_clf_cbf_qp(r, w_clf)
        du = c.u_star - o.u_star
        diffs["||u_c-u_qp||_inf"].append(np.max(np.abs(du)))
        diffs["||u_c-u_qp||_2"].append(np.linalg.norm(du))
        diffs["|f(u_c)-f(u_qp)|"].append(abs(c.objective(w_clf) - o.objective(w_clf)))
        diffs["max(A u_c - b, 0)"].append(constraint_violation(r, c.u_star, c.delta_star))
        diffs["max(A u_qp - b, 0)"].append(constraint_violation(r, o.u_star, o.delta_star))
        matches += active_from_multipliers(c.lambda_V, c.lambda_h) == active_from_multipliers(
            o.lambda_V, o.lambda_h
        )
    warmup = min(1000, n_calls) if warmup is None else warmup
    t_c = _time_calls(lambda r: solve_closed_form(r, w_clf), inst, n_calls, warmup)
    t_q = _time_calls(lambda r: solve_clf_cbf_qp(r, w_clf), inst, n_calls, warmup)
    return {
        "n_instances": n_instances,
        "n_calls": n_calls,
        "m": m,
        "mode": HARD if math.isinf(w_clf) else "relaxed",
        "closed_form_seconds": t_c,
        "qp_seconds": t_q,
        "speedup": t_q / t_c,
        "active_set_matches": matches,
        "accuracy": {k: _stats(v) for k, v in diffs.items()},
    }


def write_table1_csv(report: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "mean", "median", "p95", "max"])
        for k in METRICS:
            s = report["accuracy"][k]
            w.writerow([k, s["mean"], s["median"], s["p95"], s["max"]])
        w.writerow(["closed_form_seconds", report["closed_form_seconds"], "", "", ""])
        w.writerow(["qp_seconds", report["qp_seconds"], "", "", ""])
        w.writerow(["speedup", report["speedup"], "", "", ""])
        w.writerow(["active_set_matches", report["active_set_matches"], "", "", report["n_instances"]])
    return path


def benchmark_resolution_scaling(
    scenario,
    n_res_list=(20, 40, 100, 200, 400),
    n_calls: int = 50,
    oracle_calls: int = 5,
    seed: int = 0,
    q=None,
) -> list[dict]:
    """Per-resolution control-step latency of three paths plus the body error.

    * closed-form path: aggregated rows + closed form
    * oracle path: aggregated rows + interior point
    * pairwise oracle path: one CBF row per sphere-obstacle pair + interior point
    """
    sc = scenario
    model, layout, cfg = sc.robot, sc.layout, sc.safety
    q = sc.initial_state() if q is None else np.asarray(q, dtype=float)
    target = sc.task.reference(0.0)
    rng = np.random.default_rng(seed)
    # shape used for the body-error column: a generic bent configuration
    q_shape = rng.uniform(-1.0, 1.0, model.n_q) * np.where(model.active_columns % 6 < 3, 8.0, 0.05)
    rows = []
    for n_res in n_res_list:
        def cf():
            ev = evaluate_rows(model, layout, q, target, sc.obstacles, cfg, n_res)
            return solve_closed_form(ev.rows, cfg.w_clf)

        def orc():
            ev = evaluate_rows(model, layout, q, target, sc.obstacles, cfg, n_res)
            return solve_clf_cbf_qp(ev.rows, cfg.w_clf)

        def pair():
            a_V, b_V, A_h, b_h = pairwise_rows(model, layout, q, target, sc.obstacles, cfg, n_res)
            return solve_multi_cbf_qp(a_V, b_V, A_h, b_h, cfg.w_clf)

        t_cf = _time_calls(lambda _: cf(), [None], n_calls, max(1, n_calls // 10))
        t_or = _time_calls(lambda _: orc(), [None], oracle_calls, 1)
        t_pw = _time_calls(lambda _: pair(), [None], oracle_calls, 1)
        rows.append({
            "n_res": n_res,
            "closed_form_seconds": t_cf,
            "oracle_seconds": t_or,
            "pairwise_oracle_seconds": t_pw,
            "hausdorff_error": hausdorff_body_error(model, q_shape, n_res),
        })
    return rows


def write_rows_csv(rows: list[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return path
