"""Scenarios, closed-loop runs and tracking metrics."""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .closed_loop import Monitor, simulate, steps_for
from .controller import solve_closed_form
from .kinematics import (
    BENDING_AXIAL_MASK,
    FULL_MASK,
    NO_SHEAR_MASK,
    STRAIN_NAMES,
    Z_UP_MOUNT,
    RobotModel,
)
from .planner import PlannerConfig, default_bounds, lift, low_level_track, plan
from .qp import solve_clf_cbf_qp
from .safety import Obstacle, SafetyConfig, evaluate_rows
from .tendons import TendonLayout

CONTROLLERS = ("closed-form", "qp", "clf-only", "rrt*")
SCENARIO_DIR = Path(__file__).parent / "scenarios"


@dataclass(frozen=True)
class SetpointTask:
    target: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float).reshape(3))

    def reference(self, t: float) -> np.ndarray:
        return self.target


@dataclass(frozen=True)
class CircleTask:
    center: np.ndarray
    radius: float
    rpm: float
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    phase: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3)
        n = n / np.linalg.norm(n)
        a = np.asarray(self.axis, dtype=float).reshape(3)
        a = a - (a @ n) * n
        if np.linalg.norm(a) < 1e-12:
            raise ValueError("circle axis must not be parallel to its normal")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "axis", a / np.linalg.norm(a))

    def plane_point(self, angle: float, radius: float | None = None) -> np.ndarray:
        r = self.radius if radius is None else radius
        e2 = np.cross(self.normal, self.axis)
        return self.center + r * (math.cos(angle) * self.axis + math.sin(angle) * e2)

    def reference(self, t: float) -> np.ndarray:
        return circular_reference(self, t)


def circular_reference(circle: CircleTask, t: float) -> np.ndarray:
    """Point on ``circle`` after ``t`` seconds at ``circle.rpm``."""
    return circle.plane_point(circle.phase + 2.0 * math.pi * circle.rpm / 60.0 * t)


def tracking_rmse(log, reference) -> float:
    """RMS of the tip-to-reference distance over the log's time grid.

    ``reference`` is a callable of time or an array of reference points.
    """
    tips = np.asarray(log.tip)
    if tips.size == 0:
        raise ValueError("empty log")
    if callable(reference):
        ref = np.array([reference(t) for t in log.t])
    else:
        ref = np.asarray(reference, dtype=float).reshape(tips.shape)
    return float(np.sqrt(np.mean(np.sum((tips - ref) ** 2, axis=1))))


@dataclass(frozen=True)
class TrackerConfig:
    kp: float = 2.0
    advance_radius: float = 0.05
    timeout_s: float = 4.0


@dataclass(frozen=True)
class Scenario:
    robot: RobotModel
    layout: TendonLayout
    safety: SafetyConfig
    obstacles: tuple
    task: object
    controller: str = "closed-form"
    duration_s: float = 20.0
    dt_s: float = 1e-3
    n_res: int = 40
    u_clip: float = math.inf
    seed: int = 0
    name: str = "scenario"
    q0: np.ndarray | None = None
    planner: PlannerConfig = PlannerConfig()
    planning_mask: tuple = BENDING_AXIAL_MASK
    tracker: TrackerConfig = TrackerConfig()

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}")
        if not self.dt_s > 0:
            raise ValueError("dt_s must be positive")
        if self.duration_s < 0:
            raise ValueError("duration_s must be non-negative")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def initial_state(self) -> np.ndarray:
        return self.robot.zero() if self.q0 is None else np.asarray(self.q0, dtype=float)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


# -- config file -----------------------------------------------------------

_MASKS = {"full": FULL_MASK, "no-shear": NO_SHEAR_MASK, "bending-axial": BENDING_AXIAL_MASK}


def _parse_mask(spec):
    if isinstance(spec, str):
        return _MASKS[spec]
    if all(isinstance(x, str) for x in spec):
        return tuple(name in spec for name in STRAIN_NAMES)
    return tuple(bool(x) for x in spec)


def _mask_name(mask) -> list:
    return [n for n, on in zip(STRAIN_NAMES, np.asarray(mask).reshape(-1, 6)[0]) if on]


def _parse_mount(spec):
    if spec is None or spec == "z-up":
        return Z_UP_MOUNT.copy()
    if spec == "identity":
        return np.eye(4)
    return np.asarray(spec, dtype=float)


def _num(x) -> float:
    if x is None:
        return math.inf
    return float(x)


def scenario_from_dict(d: dict) -> Scenario:
    rb = d.get("robot", {})
    robot = RobotModel(
        segment_lengths=rb.get("segment_lengths")
        or [rb.get("total_length", 0.3) / rb.get("n_segments", 2)] * rb.get("n_segments", 2),
        body_radius=rb.get("body_radius", 0.036),
        active_mask=_parse_mask(rb.get("active_strains", "full")),
        mount=_parse_mount(rb.get("mount")),
    )
    td = d.get("tendons", {})
    if "angles_deg" in td:
        layout = TendonLayout(
            np.radians(td["angles_deg"]), td["termination"], td.get("routing_radius", 0.025)
        )
    else:
        layout = TendonLayout.symmetric(
            robot.num_segments, td.get("per_segment", 3), td.get("routing_radius", 0.025),
            math.radians(td.get("group_offset_deg", 0.0)),
        )
    sf = d.get("safety", {})
    safety = SafetyConfig(
        d_safe=sf.get("d_safe", 0.0), kappa_lse=sf.get("kappa_lse", 100.0),
        gamma=sf.get("gamma", 1.0), c3=sf.get("c3", 1.0), w_clf=_num(sf.get("w_clf", 100.0)),
    )
    obstacles = tuple(Obstacle(o["center"], o["radius"]) for o in d.get("obstacles", []) or [])
    task_d = d["task"]
    if "setpoint" in task_d:
        task = SetpointTask(task_d["setpoint"])
    else:
        c = task_d["circle"]
        task = CircleTask(
            c["center"], c["radius"], c["rpm"], c.get("normal", [0, 0, 1]),
            c.get("axis", [1, 0, 0]), math.radians(c.get("phase_deg", 0.0)),
        )
    pl = dict(d.get("planner", {}) or {})
    planning_mask = _parse_mask(pl.pop("active_strains", "bending-axial"))
    if "bounds" in pl:
        pl["bounds"] = np.asarray(pl["bounds"], dtype=float)
    planner = PlannerConfig(seed=d.get("seed", 0), n_res=d.get("n_res", 40),
                            d_safe=safety.d_safe, **pl)
    tracker = TrackerConfig(**(d.get("tracker", {}) or {}))
    return Scenario(
        robot=robot, layout=layout, safety=safety, obstacles=obstacles, task=task,
        controller=d.get("controller", "closed-form"), duration_s=d.get("duration_s", 20.0),
        dt_s=d.get("dt_s", 1e-3), n_res=d.get("n_res", 40), u_clip=_num(d.get("u_clip")),
        seed=d.get("seed", 0), name=d.get("name", "scenario"),
        q0=None if d.get("q0") is None else np.asarray(d["q0"], dtype=float),
        planner=planner, planning_mask=planning_mask, tracker=tracker,
    )


def load_scenario(path) -> Scenario:
    """Load a YAML scenario; bare names resolve to the bundled scenarios."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        p = SCENARIO_DIR / f"{path}.yaml"
    with p.open() as fh:
        return scenario_from_dict(yaml.safe_load(fh))


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.yaml"))


def scenario_to_dict(sc: Scenario) -> dict:
    def inf_none(x):
        return None if math.isinf(x) else float(x)

    task = sc.task
    if isinstance(task, SetpointTask):
        task_d = {"setpoint": task.target.tolist()}
    else:
        task_d = {"circle": {
            "center": task.center.tolist(), "radius": task.radius, "rpm": task.rpm,
            "normal": task.normal.tolist(), "axis": task.axis.tolist(),
            "phase_deg": math.degrees(task.phase),
        }}
    return {
        "name": sc.name,
        "robot": {
            "segment_lengths": sc.robot.segment_lengths.tolist(),
            "body_radius": sc.robot.body_radius,
            "active_strains": _mask_name(sc.robot.active_mask),
            "mount": sc.robot.mount.tolist(),
        },
        "tendons": {
            "angles_deg": np.degrees(sc.layout.angles).tolist(),
            "termination": sc.layout.termination.tolist(),
            "routing_radius": sc.layout.routing_radius,
        },
        "safety": {
            "d_safe": sc.safety.d_safe, "kappa_lse": sc.safety.kappa_lse, "gamma": sc.safety.gamma,
            "c3": sc.safety.c3, "w_clf": inf_none(sc.safety.w_clf),
        },
        "obstacles": [{"center": o.center.tolist(), "radius": o.radius} for o in sc.obstacles],
        "task": task_d,
        "controller": sc.controller,
        "duration_s": sc.duration_s,
        "dt_s": sc.dt_s,
        "n_res": sc.n_res,
        "u_clip": inf_none(sc.u_clip),
        "seed": sc.seed,
    }


# -- controllers ------------------------------------------------------------

def _solution_info(ev, sol, seconds):
    info = {
        "tip": ev.tip, "V": ev.V,
        "lambda_V": sol.lambda_V, "lambda_h": sol.lambda_h, "delta": sol.delta_star,
        "active_set": sol.active_set, "solve_seconds": seconds,
    }
    if ev.barrier is not None:
        info["b_lse"] = ev.barrier.b_lse
        info["b_min"] = ev.barrier.b_min
    return info


def _clip(u, u_clip):
    return u if math.isinf(u_clip) else np.clip(u, -u_clip, u_clip)


def make_policy(sc: Scenario):
    """Feedback law ``(t, q) -> (u, info)`` for the closed-form, qp and clf-only controllers."""
    model, layout, cfg = sc.robot, sc.layout, sc.safety
    obstacles = () if sc.controller == "clf-only" else sc.obstacles

    def policy(t, q):
        ev = evaluate_rows(model, layout, q, sc.task.reference(t), obstacles, cfg, sc.n_res)
        t0 = time.perf_counter()
        if sc.controller == "qp":
            sol, qs = solve_clf_cbf_qp(ev.rows, cfg.w_clf, return_qp=True)
            seconds = time.perf_counter() - t0
            info = _solution_info(ev, sol, seconds)
            if not qs.optimal:
                # no certified solution: hold still (f = 0 keeps every barrier constant)
                info["active_set"] = f"fallback:{qs.status}"
                return np.zeros(layout.count), info
            return _clip(sol.u_star, sc.u_clip), info
        sol = solve_closed_form(ev.rows, cfg.w_clf)
        seconds = time.perf_counter() - t0
        return _clip(sol.u_star, sc.u_clip), _solution_info(ev, sol, seconds)

    return policy


def scenario_monitor(sc: Scenario) -> Monitor:
    return Monitor(sc.task.reference, sc.obstacles, sc.safety, sc.n_res)


def run_scenario(sc: Scenario):
    """Closed-loop run of ``sc``; returns the :class:`TrajectoryLog`.

    For ``rrt*`` the plan is made first (its statistics go into the log's
    ``meta``) and then tracked for the scenario duration.
    """
    n_steps = steps_for(sc.duration_s, sc.dt_s)
    meta = {"scenario": sc.name, "controller": sc.controller, "dt_s": sc.dt_s,
            "duration_s": sc.duration_s}
    if sc.controller == "rrt*":
        if not isinstance(sc.task, SetpointTask):
            raise ValueError("the RRT* baseline needs a setpoint task")
        result, pmodel = plan_scenario(sc)
        wps = [lift(pmodel, w, sc.robot) for w in result.waypoints]
        meta.update({
            "planning_seconds": result.planning_seconds, "reached_goal": result.reached_goal,
            "plan_best_V": result.best_V, "samples_used": result.samples_used,
            "node_count": result.node_count, "waypoints": len(wps),
        })
        tr = sc.tracker
        return low_level_track(
            sc.robot, sc.layout, wps, tr.kp, tr.advance_radius, tr.timeout_s, sc.dt_s,
            q0=sc.initial_state(), bounds=default_bounds(sc.robot), duration_s=sc.duration_s,
            monitor=scenario_monitor(sc), meta=meta,
        )
    return simulate(
        sc.robot, sc.layout, sc.initial_state(), sc.dt_s, n_steps, make_policy(sc),
        scenario_monitor(sc), meta=meta,
    )


def planning_model(sc: Scenario) -> RobotModel:
    return sc.robot.with_mask(sc.planning_mask)


def plan_scenario(sc: Scenario):
    """RRT* plan for ``sc`` in its planning coordinates: ``(PlanResult, planning_model)``."""
    pmodel = planning_model(sc)
    q_start = lift(sc.robot, sc.initial_state(), pmodel)
    cfg = dataclasses.replace(sc.planner, seed=sc.seed, n_res=sc.n_res, d_safe=sc.safety.d_safe)
    return plan(pmodel, q_start, sc.task.reference(0.0), sc.obstacles, cfg), pmodel


__all__ = [
    "CONTROLLERS", "SetpointTask", "CircleTask", "TrackerConfig", "Scenario",
    "circular_reference", "tracking_rmse", "scenario_from_dict", "scenario_to_dict",
    "load_scenario", "bundled_scenarios", "make_policy", "run_scenario", "plan_scenario",
    "planning_model",
]
