"""RRT* baseline in an affinely normalized strain space, plus the kinematic
setpoint tracker that executes its waypoints."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .closed_loop import Monitor, simulate, steps_for
from .errors import StartInCollisionError
from .kinematics import RobotModel, embed, extract, sphere_abscissae
from .tendons import TendonLayout, tendon_jacobian

CURVATURE_LIMIT = 15.0  # rad/m
LINEAR_LIMIT = 0.2


def default_bounds(model: RobotModel) -> np.ndarray:
    """(n_q, 2) planning limits: +-15 rad/m on curvatures, +-0.2 on linear strains."""
    lim = np.where(model.active_columns % 6 < 3, CURVATURE_LIMIT, LINEAR_LIMIT)
    return np.column_stack([-lim, lim])


def _check_bounds(bounds) -> np.ndarray:
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise ValueError("bounds must be an (n, 2) array")
    if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 0] >= bounds[:, 1]):
        raise ValueError("bounds must be finite with lo < hi")
    return bounds


def normalize(q, bounds) -> np.ndarray:
    bounds = _check_bounds(bounds)
    return (np.asarray(q, dtype=float) - bounds[:, 0]) / (bounds[:, 1] - bounds[:, 0])


def denormalize(x, bounds) -> np.ndarray:
    bounds = _check_bounds(bounds)
    return bounds[:, 0] + np.asarray(x, dtype=float) * (bounds[:, 1] - bounds[:, 0])


def in_unit_cube(x) -> bool:
    x = np.asarray(x)
    return bool(np.all(x >= 0.0) and np.all(x <= 1.0))


def lift(src: RobotModel, q, dst: RobotModel) -> np.ndarray:
    """Re-express a configuration of ``src`` in the coordinates of ``dst``.

    Strains inactive in ``src`` sit at their reference value.
    """
    if not np.allclose(src.segment_lengths, dst.segment_lengths):
        raise ValueError("models must share the segment layout")
    return extract(dst, embed(src, q))


@dataclass(frozen=True)
class PlannerConfig:
    q_step: float = 0.02
    collision_stride: float = 0.01
    neighbor_count: int = 32
    max_samples: int = 20480
    goal_threshold: float = 1e-4  # on V, m^2
    bounds: np.ndarray | None = None
    seed: int = 0
    n_res: int = 40
    d_safe: float = 0.0
    check_invariants: bool = False

    def __post_init__(self):
        if not 0 < self.collision_stride <= self.q_step:
            raise ValueError("need 0 < collision_stride <= q_step")
        if self.neighbor_count < 1 or self.max_samples < 0:
            raise ValueError("neighbor_count >= 1 and max_samples >= 0 required")


@dataclass
class PlanResult:
    waypoints: list
    reached_goal: bool
    best_V: float
    samples_used: int
    planning_seconds: float
    node_count: int = 0
    path_cost: float = 0.0
    tree: dict = field(default_factory=dict, repr=False)


class _Collision:
    """Sphere-chain screen: every sphere-obstacle barrier non-negative."""

    def __init__(self, model: RobotModel, obstacles, n_res: int, d_safe: float):
        self.model = model
        self.s = sphere_abscissae(model, n_res)
        self.empty = len(obstacles) == 0
        if not self.empty:
            self.centers = np.array([o.center for o in obstacles])
            self.radii = np.array([o.radius for o in obstacles])
        self.d_safe = d_safe

    def barrier(self, q) -> float:
        if self.empty:
            return math.inf
        m = self.model
        return kernels.min_pair_barrier(
            embed(m, q), m.segment_lengths, m.mount, self.s, m.body_radius,
            self.centers, self.radii, self.d_safe,
        )

    def free(self, q) -> bool:
        return self.barrier(q) >= 0.0


def _edge_free(xa, xb, bounds, coll: _Collision, stride: float) -> bool:
    if coll.empty:
        return True
    n = max(1, int(math.ceil(np.linalg.norm(xb - xa) / stride)))
    # endpoint xa is already in the tree; check the rest from the far end
    for i in range(n, 0, -1):
        if not coll.free(denormalize(xa + (xb - xa) * (i / n), bounds)):
            return False
    return True


def edge_collision_free(
    x_a, x_b, model: RobotModel, obstacles, stride: float, bounds,
    n_res: int = 40, d_safe: float = 0.0,
) -> bool:
    """True iff the barrier is non-negative at points spaced <= ``stride``
    along the normalized segment, both endpoints included."""
    coll = _Collision(model, obstacles, n_res, d_safe)
    x_a = np.asarray(x_a, dtype=float)
    x_b = np.asarray(x_b, dtype=float)
    if not coll.free(denormalize(x_a, bounds)):
        return False
    return _edge_free(x_a, x_b, bounds, coll, stride)


def plan(model: RobotModel, q_start, p_target, obstacles, cfg: PlannerConfig = PlannerConfig()) -> PlanResult:
    """RRT* with k-nearest rewiring; cost is path length in normalized space."""
    t_start = time.perf_counter()
    bounds = _check_bounds(default_bounds(model) if cfg.bounds is None else cfg.bounds)
    coll = _Collision(model, obstacles, cfg.n_res, cfg.d_safe)
    q_start = np.asarray(q_start, dtype=float)
    if not coll.free(q_start):
        raise StartInCollisionError("start configuration is in collision")
    target = np.asarray(p_target, dtype=float)
    L = model.total_length

    def clf(q):
        e = target - kernels.chain_positions(embed(model, q), model.segment_lengths, model.mount, [L])[0]
        return float(e @ e)

    n = model.n_q
    cap = cfg.max_samples + 1
    X = np.empty((cap, n))
    parent = np.full(cap, -1, dtype=np.int64)
    cost = np.zeros(cap)
    V = np.zeros(cap)
    children: list[set] = [set()]
    X[0] = normalize(q_start, bounds)
    V[0] = clf(q_start)
    count = 1
    goal = 0 if V[0] < cfg.goal_threshold else -1
    rng = np.random.default_rng(cfg.seed)
    samples = 0

    while goal < 0 and samples < cfg.max_samples:
        samples += 1
        x_rand = rng.random(n)
        d2 = np.sum((X[:count] - x_rand) ** 2, axis=1)
        near = int(np.argmin(d2))
        dist = math.sqrt(d2[near])
        if dist == 0.0:
            continue
        x_new = x_rand if dist <= cfg.q_step else X[near] + (x_rand - X[near]) * (cfg.q_step / dist)
        q_new = denormalize(x_new, bounds)
        if not coll.free(q_new):
            continue

        k = min(cfg.neighbor_count, count)
        dn = np.sqrt(np.sum((X[:count] - x_new) ** 2, axis=1))
        nbrs = np.argpartition(dn, k - 1)[:k] if k < count else np.arange(count)
        # lazy choose-parent: cheapest candidate first, stop at the first free edge
        order = nbrs[np.argsort(cost[nbrs] + dn[nbrs], kind="stable")]
        best = -1
        for j in order:
            if _edge_free(X[j], x_new, bounds, coll, cfg.collision_stride):
                best = int(j)
                break
        if best < 0:
            continue

        i = count
        count += 1
        X[i] = x_new
        parent[i] = best
        cost[i] = cost[best] + dn[best]
        V[i] = clf(q_new)
        children.append(set())
        children[best].add(i)

        # rewire: lazily check only edges that would lower a neighbour's cost
        before = cost[:count].copy() if cfg.check_invariants else None
        for j in nbrs:
            j = int(j)
            if j == best:
                continue
            c_new = cost[i] + dn[j]
            if c_new < cost[j] - 1e-12 and _edge_free(x_new, X[j], bounds, coll, cfg.collision_stride):
                children[parent[j]].discard(j)
                parent[j] = i
                children[i].add(j)
                delta = c_new - cost[j]
                stack = [j]
                while stack:
                    v = stack.pop()
                    cost[v] += delta
                    stack.extend(children[v])
        if before is not None:
            assert np.all(cost[:count] <= before + 1e-12), "rewiring increased a cost"

        if V[i] < cfg.goal_threshold:
            goal = i

    end = goal if goal >= 0 else int(np.argmin(V[:count]))
    path = []
    v = end
    while v >= 0:
        path.append(denormalize(X[v], bounds))
        v = parent[v]
    path.reverse()
    return PlanResult(
        waypoints=path,
        reached_goal=goal >= 0,
        best_V=float(V[end]),
        samples_used=samples,
        planning_seconds=time.perf_counter() - t_start,
        node_count=count,
        path_cost=float(cost[end]),
        tree={"X": X[:count].copy(), "parent": parent[:count].copy(), "cost": cost[:count].copy(),
              "V": V[:count].copy(), "bounds": bounds},
    )


def low_level_track(
    model: RobotModel,
    layout: TendonLayout,
    waypoints,
    Kp=2.0,
    advance_radius: float = 0.05,
    timeout_s: float = 4.0,
    dt: float = 1e-3,
    q0=None,
    bounds=None,
    duration_s: float | None = None,
    monitor: Monitor | None = None,
    meta: dict | None = None,
):
    """Track ``waypoints`` with ``u = J_l Kp (q_d - q)``.

    The active waypoint advances once the normalized error is within
    ``advance_radius`` or after ``timeout_s`` on it. Without ``duration_s`` the
    run ends when the last waypoint is released; with it the last waypoint is
    held until the horizon.
    """
    wps = [np.asarray(w, dtype=float) for w in waypoints]
    if not wps:
        raise ValueError("need at least one waypoint")
    bounds = _check_bounds(default_bounds(model) if bounds is None else bounds)
    span = bounds[:, 1] - bounds[:, 0]
    Kp = np.asarray(Kp, dtype=float)
    q0 = wps[0] if q0 is None else np.asarray(q0, dtype=float)
    if monitor is None:
        monitor = Monitor(lambda t: np.zeros(3))
    state = {"idx": 0, "since": 0.0, "finished": False}

    def advance(t, q):
        # release every waypoint already within the radius (or timed out)
        while not state["finished"]:
            e = (wps[state["idx"]] - q) / span
            if np.linalg.norm(e) <= advance_radius or t - state["since"] >= timeout_s - 1e-12:
                if state["idx"] + 1 < len(wps):
                    state["idx"] += 1
                    state["since"] = t
                else:
                    state["finished"] = True
            else:
                break

    def policy(t, q):
        advance(t, q)
        e = wps[state["idx"]] - q
        J = tendon_jacobian(model, layout, q)
        v = Kp @ e if Kp.ndim == 2 else Kp * e
        return J @ v, {"active_set": f"wp{state['idx']}"}

    if duration_s is None:
        n_steps = steps_for(timeout_s * len(wps), dt)
        done = lambda t, q: state["finished"]
    else:
        n_steps = steps_for(duration_s, dt)
        done = None
    return simulate(model, layout, q0, dt, n_steps, policy, monitor, done, meta)
