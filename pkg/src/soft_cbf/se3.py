"""SE(3) primitives for constant-strain segments.

Twists are 6-vectors ordered angular-first: ``(kx, ky, kz, sx, sy, sz)``.
The angular block holds curvature/torsion strains (1/m), the linear block
holds shear/elongation strains (dimensionless, axial ``sx`` is 1 when the
segment is unstretched). The segment-local x-axis is the backbone tangent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# ||kappa|| * s below this uses the Taylor series of the exponential
TAYLOR_EPS = 1e-8
# below this the Jacobian coefficients switch to their series expansions
_SERIES_EPS = 1e-2


def tilde3(v) -> np.ndarray:
    """Skew matrix with ``tilde3(v) @ w == cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee3(S: np.ndarray) -> np.ndarray:
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def twist(kappa, sigma) -> np.ndarray:
    """Stack angular and linear strains into a twist."""
    kappa = np.asarray(kappa, dtype=float).reshape(-1)
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    if kappa.size != 3 or sigma.size != 3:
        raise ValueError("kappa and sigma must both be 3-vectors")
    return np.concatenate([kappa, sigma])


def _as_twist(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != 6:
        raise ValueError(f"twist must have 6 entries, got {xi.size}")
    return xi


def hat6(xi) -> np.ndarray:
    """4x4 se(3) matrix of a twist."""
    xi = _as_twist(xi)
    out = np.zeros((4, 4))
    out[:3, :3] = tilde3(xi[:3])
    out[:3, 3] = xi[3:]
    return out


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3].copy(), T[:3, 3].copy())

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def is_valid(self, tol: float = 1e-10) -> bool:
        R = self.rotation
        return bool(
            np.allclose(R.T @ R, np.eye(3), atol=tol)
            and abs(np.linalg.det(R) - 1.0) <= tol
        )


def _exp_coeffs(theta: float) -> tuple[float, float, float]:
    """sin(t)/t, (1-cos t)/t^2, (t-sin t)/t^3 with the Taylor branch at TAYLOR_EPS."""
    if theta <= TAYLOR_EPS:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    half = np.sin(0.5 * theta) / theta
    return np.sin(theta) / theta, 2.0 * half * half, (theta - np.sin(theta)) / theta**3


def exp_se3(xi, s: float = 1.0) -> Pose:
    """Transform reached after arclength ``s`` under constant strain ``xi``."""
    xi = _as_twist(xi)
    if s < 0:
        raise ValueError("arclength must be non-negative")
    phi = xi[:3] * s
    rho = xi[3:] * s
    theta = float(np.linalg.norm(phi))
    a, b, c = _exp_coeffs(theta)
    K = tilde3(phi)
    K2 = K @ K
    R = np.eye(3) + a * K + b * K2
    V = np.eye(3) + b * K + c * K2
    return Pose(R, V @ rho)


def jacobian_coeffs(theta: float) -> tuple[float, float, float, float]:
    """Coefficients B, C, D, E of the SE(3) tangent operator."""
    if theta < _SERIES_EPS:
        t2 = theta * theta
        t4 = t2 * t2
        return (
            0.5 - t2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0,
            1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0,
            1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0,
        )
    st, ct = np.sin(theta), np.cos(theta)
    t2 = theta * theta
    return (
        (1.0 - ct) / t2,
        (theta - st) / (t2 * theta),
        (t2 + 2.0 * ct - 2.0) / (2.0 * t2 * t2),
        (2.0 * theta - 3.0 * st + theta * ct) / (2.0 * t2 * t2 * theta),
    )


def right_jacobian(omega) -> np.ndarray:
    """Tangent operator ``T`` with ``d exp(W) = exp(W) hat(T(W) dW)``.

    ``omega`` is a full (already arclength-scaled) twist. Block layout is
    ``[[J, 0], [Q, J]]`` in the angular-first ordering.
    """
    omega = _as_twist(omega)
    phi, rho = omega[:3], omega[3:]
    B, C, D, E = jacobian_coeffs(float(np.linalg.norm(phi)))
    P = tilde3(phi)
    Rh = tilde3(rho)
    P2 = P @ P
    PR = P @ Rh
    RP = Rh @ P
    PRP = PR @ P
    J = np.eye(3) - B * P + C * P2
    Q = (
        -0.5 * Rh
        + C * (PR + RP - PRP)
        + D * (-P2 @ Rh - RP @ P + 3.0 * PRP)
        + E * (PRP @ P + P @ PRP)
    )
    out = np.zeros((6, 6))
    out[:3, :3] = J
    out[3:, :3] = Q
    out[3:, 3:] = J
    return out


def log_so3(R: np.ndarray) -> tuple[np.ndarray, str]:
    """Rotation vector of ``R`` and the branch used ("small", "regular", "pi")."""
    R = np.asarray(R, dtype=float)
    cos_t = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    theta = float(np.arccos(cos_t))
    w = vee3(R - R.T)
    if theta < 1e-6:
        # R - R^T = 2 sin(t)/t * tilde(phi)
        return 0.5 * w * (1.0 + theta * theta / 6.0), "small"
    if np.pi - theta > 1e-6:
        return 0.5 * theta / np.sin(theta) * w, "regular"
    # near pi: sym(R) = cos(t) I + (1 - cos t) n n^T
    B = (0.5 * (R + R.T) - cos_t * np.eye(3)) / (1.0 - cos_t)
    k = int(np.argmax(np.diag(B)))
    n = B[:, k] / np.sqrt(max(B[k, k], 1e-300))
    n /= np.linalg.norm(n)
    # fix the sign from the (small) antisymmetric part
    if np.dot(w, n) < 0:
        n = -n
    return theta * n, "pi"


def log_se3(T, return_branch: bool = False):
    """Unit-arclength twist whose exponential is ``T``.

    ``T`` may be a :class:`Pose` or a 4x4 matrix. With ``return_branch`` the
    rotation branch label is returned as a second value.
    """
    if not isinstance(T, Pose):
        T = Pose.from_matrix(T)
    phi, branch = log_so3(T.rotation)
    theta = float(np.linalg.norm(phi))
    _, b, c = _exp_coeffs(theta)
    K = tilde3(phi)
    V = np.eye(3) + b * K + c * (K @ K)
    rho = np.linalg.solve(V, T.translation)
    xi = np.concatenate([phi, rho])
    if return_branch:
        return xi, branch
    return xi
