"""Fixed-step closed-loop simulation of the tendon-rate kinematics."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .integrators import integrate_step_tsit5
from .kinematics import RobotModel, positions
from .safety import SafetyConfig, lse_barrier, pairwise_barriers
from .tendons import TendonLayout, tendon_jacobian, truncated_pinv
from .trajlog import TrajectoryLog


def steps_for(duration_s: float, dt_s: float) -> int:
    if not dt_s > 0:
        raise ValueError("dt must be positive")
    if duration_s < 0:
        raise ValueError("duration must be non-negative")
    return int(round(duration_s / dt_s))


@dataclass(frozen=True)
class Monitor:
    """Evaluates V and the barriers for logging when a policy does not report them."""

    target: object  # callable t -> 3-vector
    obstacles: tuple = ()
    safety: SafetyConfig = SafetyConfig()
    n_res: int = 40

    def __call__(self, model: RobotModel, t: float, q) -> dict:
        tip = positions(model, q, model.total_length)[0]
        e = np.asarray(self.target(t)) - tip
        out = {"tip": tip, "V": float(e @ e)}
        if self.obstacles:
            b = pairwise_barriers(model, q, self.n_res, self.obstacles, self.safety.d_safe)
            out["b_lse"] = lse_barrier(b, self.safety.kappa_lse)
            out["b_min"] = float(b.min())
        return out


def actuation_field(model: RobotModel, layout: TendonLayout, u):
    """``q -> J_l(q)^+ u`` with ``u`` held fixed."""
    u = np.asarray(u, dtype=float)

    def rhs(q):
        pinv, _, _ = truncated_pinv(tendon_jacobian(model, layout, q))
        return pinv @ u

    return rhs


def simulate(
    model: RobotModel,
    layout: TendonLayout,
    q0,
    dt: float,
    n_steps: int,
    policy,
    monitor: Monitor | None = None,
    done=None,
    meta: dict | None = None,
) -> TrajectoryLog:
    """Run ``n_steps`` zero-order-hold steps of ``policy``.

    ``policy(t, q)`` returns ``(u, info)``; ``info`` may provide ``tip``,
    ``V``, ``b_lse``, ``b_min``, ``lambda_V``, ``lambda_h``, ``delta``,
    ``active_set`` and ``solve_seconds``; missing state entries come from
    ``monitor``. The optional
    ``done(t, q)`` ends the run early. Records are taken at ``t = k dt`` for
    ``k = 0..n_steps``, each with the input applied from that instant.
    Exceptions carry the partial log as ``exc.partial_log``.
    """
    log = TrajectoryLog(model.q_labels(), layout.count, meta=dict(meta or {}))
    q = np.array(q0, dtype=float)
    try:
        for k in range(n_steps + 1):
            t = k * dt
            t0 = time.perf_counter()
            u, info = policy(t, q)
            elapsed = time.perf_counter() - t0
            if monitor is not None and (
                not {"tip", "V"} <= info.keys() or (monitor.obstacles and "b_min" not in info)
            ):
                info = {**monitor(model, t, q), **info}
            log.append(
                t, q, info["tip"], u, info["V"],
                info.get("b_lse", math.nan), info.get("b_min", math.nan),
                info.get("lambda_V", math.nan), info.get("lambda_h", math.nan),
                info.get("delta", math.nan), info.get("active_set", ""), elapsed,
                info.get("solve_seconds", math.nan),
            )
            if k == n_steps or (done is not None and done(t, q)):
                break
            q, err, _ = integrate_step_tsit5(actuation_field(model, layout, u), q, dt, return_info=True)
            log.error_estimates.append(err)
    except Exception as exc:  # attach what was simulated so far
        exc.partial_log = log
        raise
    return log
