"""Piecewise-constant-strain (PCS) robot model.

The configuration ``q`` stacks, segment by segment, the deviations of the
*active* strain components from the reference strain. Inactive components
stay frozen at their reference value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import ConfigurationShapeError
from .se3 import Pose

STRAIN_NAMES = ("kx", "ky", "kz", "sx", "sy", "sz")

# local backbone tangent (x) -> world +z; local y stays world y
Z_UP_MOUNT = np.array(
    [
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)

FULL_MASK = (True,) * 6
NO_SHEAR_MASK = (True, True, True, True, False, False)
BENDING_AXIAL_MASK = (False, True, True, True, False, False)


def _mask_array(mask, n_segments: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape == (6,):
        mask = np.tile(mask, (n_segments, 1))
    if mask.shape != (n_segments, 6):
        raise ValueError(f"active mask must be (6,) or ({n_segments}, 6)")
    return mask


@dataclass(frozen=True)
class RobotModel:
    segment_lengths: np.ndarray
    body_radius: float = 0.036
    reference_strain: np.ndarray | None = None
    active_mask: np.ndarray | None = None
    mount: np.ndarray = field(default_factory=lambda: Z_UP_MOUNT.copy())

    def __post_init__(self):
        lengths = np.asarray(self.segment_lengths, dtype=float).reshape(-1)
        if lengths.size < 1 or np.any(lengths <= 0):
            raise ValueError("need at least one segment with positive length")
        N = lengths.size
        ref = self.reference_strain
        if ref is None:
            ref = np.tile([0.0, 0.0, 0.0, 1.0, 0.0, 0.0], (N, 1))
        ref = np.asarray(ref, dtype=float).reshape(N, 6)
        if not np.allclose(ref[:, 3], 1.0):
            raise ValueError("reference axial strain must be 1 for every segment")
        mask = _mask_array(FULL_MASK if self.active_mask is None else self.active_mask, N)
        mount = np.asarray(self.mount, dtype=float)
        if mount.shape != (4, 4):
            raise ValueError("mount must be a 4x4 homogeneous transform")
        object.__setattr__(self, "segment_lengths", lengths)
        object.__setattr__(self, "reference_strain", ref)
        object.__setattr__(self, "active_mask", mask)
        object.__setattr__(self, "mount", mount)
        object.__setattr__(self, "_cols", np.flatnonzero(mask.reshape(-1)))

    @classmethod
    def uniform(
        cls,
        n_segments: int = 2,
        total_length: float = 0.3,
        body_radius: float = 0.036,
        active_mask=FULL_MASK,
        mount=None,
    ) -> "RobotModel":
        return cls(
            segment_lengths=np.full(n_segments, total_length / n_segments),
            body_radius=body_radius,
            active_mask=active_mask,
            mount=Z_UP_MOUNT.copy() if mount is None else mount,
        )

    @property
    def num_segments(self) -> int:
        return self.segment_lengths.size

    @property
    def total_length(self) -> float:
        return float(self.segment_lengths.sum())

    @property
    def n_q(self) -> int:
        return int(self._cols.size)

    @property
    def active_columns(self) -> np.ndarray:
        """Indices of the active strains in the stacked 6N twist vector."""
        return self._cols

    def q_labels(self) -> list[str]:
        return [f"{STRAIN_NAMES[c % 6]}{c // 6 + 1}" for c in self._cols]

    def zero(self) -> np.ndarray:
        return np.zeros(self.n_q)

    def with_mask(self, active_mask) -> "RobotModel":
        return RobotModel(
            self.segment_lengths, self.body_radius, self.reference_strain,
            active_mask, self.mount,
        )


def embed(model: RobotModel, q) -> np.ndarray:
    """Per-segment twists (N, 6) for configuration ``q``."""
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != model.n_q:
        raise ConfigurationShapeError(
            f"configuration has {q.size} entries, model expects {model.n_q}"
        )
    flat = model.reference_strain.reshape(-1).copy()
    flat[model.active_columns] += q
    return flat.reshape(model.num_segments, 6)


def extract(model: RobotModel, twists) -> np.ndarray:
    """Inverse of :func:`embed` on the active components."""
    flat = np.asarray(twists, dtype=float).reshape(-1) - model.reference_strain.reshape(-1)
    return flat[model.active_columns]


def _check_s(model: RobotModel, s) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    L = model.total_length
    if np.any(s <= 0.0) or np.any(s > L * (1.0 + 1e-12)):
        raise ValueError(f"abscissa must lie in (0, {L}]")
    return np.minimum(s, L)


def forward_kinematics(model: RobotModel, q, s: float) -> Pose:
    R, p = kernels.chain_poses(embed(model, q), model.segment_lengths, model.mount, _check_s(model, s))
    return Pose(R[0], p[0])


def positions(model: RobotModel, q, s) -> np.ndarray:
    """Backbone positions (n, 3) at abscissae ``s``."""
    return kernels.chain_positions(
        embed(model, q), model.segment_lengths, model.mount, _check_s(model, s)
    )


def positions_and_jacobians(model: RobotModel, q, s):
    """Positions (n, 3) and positional Jacobians (n, 3, n_q)."""
    p, jac = kernels.chain_jacobians(
        embed(model, q), model.segment_lengths, model.mount, _check_s(model, s)
    )
    return p, jac[:, :, model.active_columns]


def positional_jacobian(model: RobotModel, q, s: float) -> np.ndarray:
    """3 x n_q Jacobian of the backbone position at ``s``."""
    return positions_and_jacobians(model, q, s)[1][0]


def tip_position(model: RobotModel, q) -> np.ndarray:
    return positions(model, q, model.total_length)[0]


@dataclass(frozen=True)
class SphereChain:
    centers: np.ndarray
    radii: np.ndarray
    abscissae: np.ndarray


def sphere_abscissae(model: RobotModel, n_res: int) -> np.ndarray:
    if n_res < 1:
        raise ValueError("need at least one sphere")
    return model.total_length * np.arange(1, n_res + 1) / n_res


def sphere_chain(model: RobotModel, q, n_res: int) -> SphereChain:
    s = sphere_abscissae(model, n_res)
    return SphereChain(positions(model, q, s), np.full(n_res, model.body_radius), s)


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def body_surface_samples(model: RobotModel, q, dense_count: int = 2000, ring: int = 64, cap_rings: int = 16):
    """Surface samples of the continuous body and its dense backbone.

    The body is the sphere of radius ``body_radius`` swept along the
    backbone: a tube closed by hemispherical caps at both ends.
    Returns ``(surface_points, backbone_points)``.
    """
    L = model.total_length
    R_body = model.body_radius
    s = np.linspace(0.0, L, dense_count)
    s[0] = L * 1e-12
    Rw, pw = kernels.chain_poses(embed(model, q), model.segment_lengths, model.mount, s)
    ang = 2.0 * np.pi * np.arange(ring) / ring
    circle = np.column_stack([np.zeros(ring), np.cos(ang), np.sin(ang)])  # local y-z plane
    wall = pw[:, None, :] + R_body * np.einsum("nij,kj->nki", Rw, circle)
    pts = [wall.reshape(-1, 3)]
    # caps: rings at polar angles toward -x at the base and +x at the tip
    polar = np.linspace(0.0, 0.5 * np.pi, cap_rings + 1)[1:]
    for idx, sign in ((0, -1.0), (-1, 1.0)):
        for a in polar:
            k = max(1, int(round(ring * np.cos(a))))
            ang_k = 2.0 * np.pi * np.arange(k) / k
            local = np.column_stack(
                [sign * np.full(k, np.sin(a)), np.cos(a) * np.cos(ang_k), np.cos(a) * np.sin(ang_k)]
            )
            pts.append(pw[idx] + R_body * local @ Rw[idx].T)
    return np.vstack(pts), pw


def hausdorff_body_error(
    model: RobotModel, q, n_res: int, dense_count: int = 2000, ring: int = 64, sphere_samples: int = 256
) -> float:
    """Symmetric Hausdorff distance between the sphere-chain surface and the body surface.

    Body -> chain uses exact distances to the sphere union (every body surface
    point lies outside or on the union). Chain -> body uses exact distances to
    the swept body (every union surface point lies inside or on it), measured
    through the dense backbone.
    """
    from scipy.spatial import cKDTree

    chain = sphere_chain(model, q, n_res)
    R_body = model.body_radius
    body_pts, backbone = body_surface_samples(model, q, dense_count, ring)
    center_tree = cKDTree(chain.centers)

    d_body, _ = center_tree.query(body_pts)
    body_to_chain = float(np.max(np.abs(d_body - R_body)))

    unit = _fibonacci_sphere(sphere_samples)
    cand = (chain.centers[:, None, :] + R_body * unit[None, :, :]).reshape(-1, 3)
    d_own, _ = center_tree.query(cand)
    # drop samples swallowed by a neighbouring sphere
    on_surface = d_own >= R_body * (1.0 - 1e-9)
    surf = cand[on_surface]
    d_bb, _ = cKDTree(backbone).query(surf)
    chain_to_body = float(np.max(np.abs(R_body - d_bb)))
    return max(body_to_chain, chain_to_body)
