"""Closed-form KKT solution of the two-row CLF-CBF quadratic program.

The program solved per control step is

    min_{u, delta}  ||u||^2 + w_clf * delta^2
    s.t.  a_V u + b_V <= delta,   a_h u + b_h >= 0,   delta >= 0

and, in hard-CLF mode, the same without ``delta``. With multipliers
``lambda_V, lambda_h >= 0`` stationarity gives ``u = -(lambda_V a_V -
lambda_h a_h) / 2`` and ``delta = lambda_V / (2 w_clf)``, so the optimum is
fixed by which rows are active. All four active sets are enumerated and the
cheapest primal-feasible one is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .safety import ConstraintRows, SafetyConfig, evaluate_rows

ACTIVE_SET_NAMES = ("none", "clf-only", "cbf-only", "both")
_DEGENERATE = kernels.FLAG_DEGENERATE
_INFEASIBLE = kernels.FLAG_INFEASIBLE
RELAXED = "relaxed"
HARD = "hard-clf"


@dataclass(frozen=True)
class ControlSolution:
    u_star: np.ndarray
    lambda_V: float
    lambda_h: float
    delta_star: float
    active_set: str
    mode: str
    degenerate: bool = False
    infeasible: bool = False

    def objective(self, w_clf: float) -> float:
        f = float(self.u_star @ self.u_star)
        if self.mode == RELAXED:
            f += w_clf * self.delta_star**2
        return f


def gram_entries(rows: ConstraintRows) -> tuple[float, float, float]:
    return (
        float(rows.a_V @ rows.a_V),
        float(rows.a_V @ rows.a_h),
        float(rows.a_h @ rows.a_h),
    )


def _mode(w_clf: float, mode: str | None) -> str:
    if mode is None:
        return HARD if w_clf == math.inf else RELAXED
    if mode not in (RELAXED, HARD):
        raise ValueError(f"unknown mode {mode!r}")
    return mode


def solve_closed_form(rows: ConstraintRows, w_clf: float = 100.0, mode: str | None = None) -> ControlSolution:
    """KKT-optimal input for ``rows``; see the module docstring."""
    mode = _mode(w_clf, mode)
    hard = mode == HARD
    # the kernel rejects non-finite rows
    u, lv, lh, delta, code, flags = kernels.closed_form(
        rows.a_V, rows.b_V, rows.a_h, rows.b_h, 1.0 if hard else w_clf, hard
    )
    return ControlSolution(
        u, lv, lh, delta, ACTIVE_SET_NAMES[code], mode, bool(flags & _DEGENERATE), bool(flags & _INFEASIBLE)
    )


def kkt_residuals(rows: ConstraintRows, sol: ControlSolution) -> dict:
    """Stationarity, feasibility and complementarity residuals of a solution."""
    u = sol.u_star
    clf = float(rows.a_V @ u) + rows.b_V
    cbf = float(rows.a_h @ u) + rows.b_h
    return {
        "stationarity": float(np.linalg.norm(2.0 * u + sol.lambda_V * rows.a_V - sol.lambda_h * rows.a_h)),
        "clf_violation": max(0.0, clf - sol.delta_star),
        "cbf_violation": max(0.0, -cbf),
        "clf_complementarity": abs(sol.lambda_V * (clf - sol.delta_star)),
        "cbf_complementarity": abs(sol.lambda_h * cbf) if math.isfinite(cbf) else 0.0,
    }


def control_step(
    model,
    layout,
    q,
    p_target,
    obstacles,
    config: SafetyConfig,
    n_res: int,
    u_clip: float = math.inf,
    return_info: bool = False,
):
    """Rows -> closed-form solve -> optional element-wise clamp.

    With ``return_info`` the :class:`ControlSolution` and the row evaluation
    are returned alongside ``u``.
    """
    ev = evaluate_rows(model, layout, q, p_target, obstacles, config, n_res)
    sol = solve_closed_form(ev.rows, config.w_clf)
    u = sol.u_star if math.isinf(u_clip) else np.clip(sol.u_star, -u_clip, u_clip)
    if return_info:
        return u, sol, ev
    return u
