"""Whole-body collision barriers, LSE aggregation, tip CLF and QP row assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import RobotModel, positions, positions_and_jacobians, sphere_abscissae
from .tendons import TendonLayout, tendon_jacobian, truncated_pinv


@dataclass(frozen=True)
class Obstacle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        if c.size != 3:
            raise ValueError("obstacle center must be a 3-vector")
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class SafetyConfig:
    """Barrier and CLF tuning. ``w_clf = inf`` selects the hard-CLF mode."""

    d_safe: float = 0.0
    kappa_lse: float = 100.0
    gamma: float = 1.0
    c3: float = 1.0
    w_clf: float = 100.0

    def __post_init__(self):
        for name in ("kappa_lse", "gamma", "c3", "w_clf"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def hard(self) -> bool:
        return math.isinf(self.w_clf)

    def alpha(self, b: float) -> float:
        return self.gamma * b


@dataclass(frozen=True)
class ConstraintRows:
    """CLF row ``a_V u + b_V <= delta`` and CBF row ``a_h u + b_h >= 0``."""

    a_V: np.ndarray
    b_V: float
    a_h: np.ndarray
    b_h: float

    def __post_init__(self):
        aV = np.asarray(self.a_V, dtype=float).reshape(-1)
        ah = np.asarray(self.a_h, dtype=float).reshape(-1)
        if aV.shape != ah.shape:
            raise ValueError("a_V and a_h must have the same length")
        object.__setattr__(self, "a_V", aV)
        object.__setattr__(self, "a_h", ah)
        object.__setattr__(self, "b_V", float(self.b_V))
        object.__setattr__(self, "b_h", float(self.b_h))

    @property
    def m(self) -> int:
        return self.a_V.size


def _obstacle_arrays(obstacles):
    if len(obstacles) == 0:
        raise ValueError("need at least one obstacle")
    centers = np.array([o.center for o in obstacles])
    radii = np.array([o.radius for o in obstacles])
    return centers, radii


def _pair_barriers(centers_body, R_body, centers, radii, d_safe):
    diff = centers_body[:, None, :] - centers[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    return dist - radii[None, :] - R_body - d_safe, diff, dist


def pairwise_barriers(model: RobotModel, q, n_res: int, obstacles, d_safe: float = 0.0) -> np.ndarray:
    """(n_res, n_obs) matrix of sphere-obstacle barriers."""
    centers, radii = _obstacle_arrays(obstacles)
    p = positions(model, q, sphere_abscissae(model, n_res))
    return _pair_barriers(p, model.body_radius, centers, radii, d_safe)[0]


def lse_weights(b, kappa_lse: float) -> np.ndarray:
    """Softmax weights of ``-kappa * b`` (same shape as ``b``)."""
    z = -kappa_lse * np.asarray(b, dtype=float)
    z = z - z.max()
    w = np.exp(z)
    return w / w.sum()


def lse_barrier(b, kappa_lse: float) -> float:
    """Smooth minimum ``-(1/kappa) log sum exp(-kappa b)`` with the max-shift."""
    if not kappa_lse > 0:
        raise ValueError("kappa_lse must be positive")
    b = np.asarray(b, dtype=float).reshape(-1)
    bmin = b.min()
    return float(bmin - np.log(np.sum(np.exp(-kappa_lse * (b - bmin)))) / kappa_lse)


@dataclass(frozen=True)
class BarrierEval:
    pairwise: np.ndarray
    b_lse: float
    gradient: np.ndarray
    weights: np.ndarray
    degenerate: bool

    @property
    def b_min(self) -> float:
        return float(self.pairwise.min())


def evaluate_barrier(model: RobotModel, q, n_res: int, obstacles, config: SafetyConfig) -> BarrierEval:
    centers, radii = _obstacle_arrays(obstacles)
    p, jac = positions_and_jacobians(model, q, sphere_abscissae(model, n_res))
    b, diff, dist = _pair_barriers(p, model.body_radius, centers, radii, config.d_safe)
    w = lse_weights(b, config.kappa_lse)
    degenerate = bool(np.any(dist == 0.0))
    safe = np.where(dist > 0.0, dist, 1.0)
    # unit vector obstacle -> sphere center; coincident pairs contribute nothing
    n = np.where((dist > 0.0)[..., None], diff / safe[..., None], 0.0)
    dirs = np.einsum("ij,ijk->ik", w, n)
    grad = np.einsum("ik,ikq->q", dirs, jac)
    return BarrierEval(b, lse_barrier(b, config.kappa_lse), grad, w, degenerate)


def lse_barrier_gradient(model: RobotModel, q, n_res: int, obstacles, config: SafetyConfig) -> np.ndarray:
    return evaluate_barrier(model, q, n_res, obstacles, config).gradient


def clf_value(model: RobotModel, q, p_target) -> float:
    e = np.asarray(p_target, dtype=float) - positions(model, q, model.total_length)[0]
    return float(e @ e)


def clf_gradient(model: RobotModel, q, p_target) -> np.ndarray:
    p, jac = positions_and_jacobians(model, q, model.total_length)
    e = np.asarray(p_target, dtype=float) - p[0]
    return -2.0 * jac[0].T @ e


@dataclass(frozen=True)
class RowsEval:
    """Rows together with the quantities they were built from (for logging)."""

    rows: ConstraintRows
    V: float
    barrier: BarrierEval | None
    tip: np.ndarray
    pinv: np.ndarray


def evaluate_rows(
    model: RobotModel,
    layout: TendonLayout,
    q,
    p_target,
    obstacles,
    config: SafetyConfig,
    n_res: int,
) -> RowsEval:
    """Rows plus V, barrier data and the tendon pseudoinverse at ``q``.

    With no obstacles the CBF row is vacuous (``a_h = 0``, ``b_h = +inf``).
    """
    pinv, _, _ = truncated_pinv(tendon_jacobian(model, layout, q))
    p_tip, J_tip = positions_and_jacobians(model, q, model.total_length)
    e = np.asarray(p_target, dtype=float) - p_tip[0]
    V = float(e @ e)
    gV = -2.0 * J_tip[0].T @ e
    a_V = gV @ pinv
    if len(obstacles):
        bar = evaluate_barrier(model, q, n_res, obstacles, config)
        a_h = bar.gradient @ pinv
        b_h = config.alpha(bar.b_lse)
    else:
        bar = None
        a_h = np.zeros_like(a_V)
        b_h = math.inf
    return RowsEval(ConstraintRows(a_V, config.c3 * V, a_h, b_h), V, bar, p_tip[0], pinv)


def assemble_rows(
    model: RobotModel,
    layout: TendonLayout,
    q,
    p_target,
    obstacles,
    config: SafetyConfig,
    n_res: int,
) -> ConstraintRows:
    return evaluate_rows(model, layout, q, p_target, obstacles, config, n_res).rows


def pairwise_rows(
    model: RobotModel,
    layout: TendonLayout,
    q,
    p_target,
    obstacles,
    config: SafetyConfig,
    n_res: int,
):
    """Unaggregated rows: one CBF row per sphere-obstacle pair.

    Returns ``(a_V, b_V, A_h, b_h)`` with ``A_h`` of shape (n_res * n_obs, m).
    """
    pinv, _, _ = truncated_pinv(tendon_jacobian(model, layout, q))
    p_tip, J_tip = positions_and_jacobians(model, q, model.total_length)
    e = np.asarray(p_target, dtype=float) - p_tip[0]
    a_V = (-2.0 * J_tip[0].T @ e) @ pinv
    centers, radii = _obstacle_arrays(obstacles)
    p, jac = positions_and_jacobians(model, q, sphere_abscissae(model, n_res))
    b, diff, dist = _pair_barriers(p, model.body_radius, centers, radii, config.d_safe)
    n = diff / np.where(dist > 0.0, dist, 1.0)[..., None]
    grads = np.einsum("ijk,ikq->ijq", n, jac).reshape(-1, model.n_q)
    return a_V, config.c3 * float(e @ e), grads @ pinv, config.gamma * b.reshape(-1)
