"""Tendon routing, tendon lengths and the differential actuation kinematics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import DegenerateTangentError
from .kinematics import RobotModel, embed
from .se3 import _as_twist, tilde3

TANGENT_EPS = 1e-9
SIGMA_CUT = 1e-8
SIGMA_FLOOR = 1e-14


@dataclass(frozen=True)
class TendonLayout:
    """Tendons at radius ``routing_radius`` and polar angles ``angles``.

    Tendon ``j`` runs through segments ``0..termination[j]`` (0-based) with
    the same cross-section offset in every segment it crosses.
    """

    angles: np.ndarray
    termination: np.ndarray
    routing_radius: float = 0.025

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float).reshape(-1)
        term = np.asarray(self.termination, dtype=np.int64).reshape(-1)
        if angles.size < 1 or term.size != angles.size:
            raise ValueError("need one termination index per tendon")
        if self.routing_radius <= 0:
            raise ValueError("routing radius must be positive")
        # wrap into [-pi, pi)
        angles = (angles + np.pi) % (2.0 * np.pi) - np.pi
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "termination", term)

    @classmethod
    def symmetric(
        cls,
        n_segments: int = 2,
        per_segment: int = 3,
        routing_radius: float = 0.025,
        group_offset: float = 0.0,
    ) -> "TendonLayout":
        """``per_segment`` tendons ending at each segment, phi_j = 2*pi*j/per_segment.

        ``group_offset`` rotates each successive termination group (the
        hardware variant uses 60 degrees).
        """
        j = np.arange(1, n_segments * per_segment + 1)
        group = (j - 1) // per_segment
        angles = 2.0 * np.pi / per_segment * j + group * group_offset
        return cls(angles, group, routing_radius)

    @property
    def count(self) -> int:
        return self.angles.size

    def offsets(self) -> np.ndarray:
        """(m, 3) tendon offsets ``(0, R cos phi, R sin phi)``."""
        R = self.routing_radius
        return np.column_stack(
            [np.zeros(self.count), R * np.cos(self.angles), R * np.sin(self.angles)]
        )


def tendon_tangent(xi, d_t) -> np.ndarray:
    xi = _as_twist(xi)
    x = np.cross(xi[:3], np.asarray(d_t, dtype=float)) + xi[3:]
    nrm = float(np.linalg.norm(x))
    if nrm < TANGENT_EPS:
        raise DegenerateTangentError("degenerate tendon tangent")
    return x / nrm


def local_actuation_map(xi, d_t) -> np.ndarray:
    d_t = np.asarray(d_t, dtype=float)
    t = tendon_tangent(xi, d_t)
    return np.concatenate([tilde3(d_t) @ t, t])


@dataclass(frozen=True)
class ActuationMatrices:
    tendon_lengths: np.ndarray
    jacobian: np.ndarray
    pseudoinverse: np.ndarray
    singular_values: np.ndarray
    rank: int

    @property
    def actuation_matrix(self) -> np.ndarray:
        """Maps tendon forces to generalized forces."""
        return self.jacobian.T


def _check_fit(model: RobotModel, layout: TendonLayout):
    if layout.termination.max() >= model.num_segments:
        raise ValueError("tendon terminates beyond the last segment")


def tendon_lengths(model: RobotModel, layout: TendonLayout, q) -> np.ndarray:
    _check_fit(model, layout)
    ell, _ = kernels.tendon_kinematics(
        embed(model, q), model.segment_lengths, layout.offsets(), layout.termination
    )
    return ell


def tendon_jacobian(model: RobotModel, layout: TendonLayout, q) -> np.ndarray:
    """m x n_q tendon Jacobian restricted to the active strains."""
    _check_fit(model, layout)
    _, J = kernels.tendon_kinematics(
        embed(model, q), model.segment_lengths, layout.offsets(), layout.termination
    )
    return J[:, model.active_columns]


def truncated_pinv(J: np.ndarray, sigma_cut: float = SIGMA_CUT):
    """SVD pseudoinverse dropping singular values below ``sigma_cut * sigma_max``.

    Returns ``(pinv, singular_values, rank)``.
    """
    U, sv, Vt = np.linalg.svd(J, full_matrices=False)
    smax = sv[0] if sv.size else 0.0
    if smax < SIGMA_FLOOR:
        warnings.warn("tendon Jacobian is numerically zero; returning zero map", RuntimeWarning)
        return np.zeros(J.T.shape), sv, 0
    keep = sv > sigma_cut * smax
    rank = int(np.count_nonzero(keep))
    if rank < min(J.shape):
        warnings.warn(f"rank-deficient tendon Jacobian (rank {rank})", RuntimeWarning)
    pinv = (Vt[keep].T / sv[keep]) @ U[:, keep].T
    return pinv, sv, rank


def actuation_matrices(model: RobotModel, layout: TendonLayout, q) -> ActuationMatrices:
    _check_fit(model, layout)
    ell, J = kernels.tendon_kinematics(
        embed(model, q), model.segment_lengths, layout.offsets(), layout.termination
    )
    J = J[:, model.active_columns]
    pinv, sv, rank = truncated_pinv(J)
    return ActuationMatrices(ell, J, pinv, sv, rank)


def actuation_rhs(model: RobotModel, layout: TendonLayout, q, u) -> np.ndarray:
    """Configuration rate produced by tendon length rates ``u``."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("tendon rates must be finite")
    pinv, _, _ = truncated_pinv(tendon_jacobian(model, layout, q))
    return pinv @ u
