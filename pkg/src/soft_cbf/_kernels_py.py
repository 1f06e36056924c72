"""Pure-numpy kernels. Same signatures as the compiled ``_ckernels`` module.

Array conventions shared by both backends:

* ``twists``: (N, 6) per-segment strain twists (angular first)
* ``lengths``: (N,) segment lengths
* ``mount``: (4, 4) base transform
* ``s``: (n,) backbone abscissae in (0, L], non-decreasing
* Jacobians are taken w.r.t. the full stacked twist vector (6N columns);
  callers select active columns.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateTangentError, InfeasibleCBFError

TAYLOR_EPS = 1e-8
SERIES_EPS = 1e-2
TANGENT_EPS = 1e-9

# active-set codes shared with the compiled kernel
NONE, CLF_ONLY, CBF_ONLY, BOTH = 0, 1, 2, 3
# flag bits
FLAG_DEGENERATE = 1
FLAG_INFEASIBLE = 2


def _skew_batch(v: np.ndarray) -> np.ndarray:
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def _exp_coeffs(theta: np.ndarray):
    small = theta <= TAYLOR_EPS
    t = np.where(small, 1.0, theta)
    st = np.sin(t)
    half = np.sin(0.5 * t) / t
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0, st / t)
    b = np.where(small, 0.5 - t2 / 24.0, 2.0 * half * half)
    c = np.where(small, 1.0 / 6.0 - t2 / 120.0, (t - st) / (t * t * t))
    return a, b, c


def _jac_coeffs(theta: np.ndarray):
    small = theta < SERIES_EPS
    t = np.where(small, 1.0, theta)
    st, ct = np.sin(t), np.cos(t)
    t2 = theta * theta
    t4 = t2 * t2
    T2 = t * t
    B = np.where(small, 0.5 - t2 / 24.0 + t4 / 720.0, (1.0 - ct) / T2)
    C = np.where(small, 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0, (t - st) / (T2 * t))
    D = np.where(
        small, 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0, (T2 + 2.0 * ct - 2.0) / (2.0 * T2 * T2)
    )
    E = np.where(
        small,
        1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0,
        (2.0 * t - 3.0 * st + t * ct) / (2.0 * T2 * T2 * t),
    )
    return B, C, D, E


def _exp_batch(omega: np.ndarray):
    """Rotations and translations of exp(hat(omega)) for a (k, 6) batch."""
    phi, rho = omega[:, :3], omega[:, 3:]
    a, b, c = _exp_coeffs(np.linalg.norm(phi, axis=1))
    K = _skew_batch(phi)
    K2 = K @ K
    eye = np.eye(3)
    R = eye + a[:, None, None] * K + b[:, None, None] * K2
    V = eye + b[:, None, None] * K + c[:, None, None] * K2
    return R, np.einsum("kij,kj->ki", V, rho)


def _right_jac_batch(omega: np.ndarray):
    """(J, Q) blocks of the SE(3) tangent operator for a (k, 6) batch."""
    phi, rho = omega[:, :3], omega[:, 3:]
    B, C, D, E = _jac_coeffs(np.linalg.norm(phi, axis=1))
    B, C, D, E = (x[:, None, None] for x in (B, C, D, E))
    P = _skew_batch(phi)
    Rh = _skew_batch(rho)
    P2 = P @ P
    PR = P @ Rh
    RP = Rh @ P
    PRP = PR @ P
    J = np.eye(3) - B * P + C * P2
    Q = (
        -0.5 * Rh
        + C * (PR + RP - PRP)
        + D * (-(P2 @ Rh) - RP @ P + 3.0 * PRP)
        + E * (PRP @ P + P @ PRP)
    )
    return J, Q


def _locate(lengths: np.ndarray, s: np.ndarray):
    cum = np.cumsum(lengths)
    seg = np.searchsorted(cum, s - 1e-15 * cum[-1], side="left")
    seg = np.minimum(seg, len(lengths) - 1)
    start = np.concatenate([[0.0], cum[:-1]])
    return seg, s - start[seg]


def _prefix(twists, lengths, mount):
    N = len(lengths)
    R_seg, p_seg = _exp_batch(twists * lengths[:, None])
    R_pre = np.empty((N + 1, 3, 3))
    p_pre = np.empty((N + 1, 3))
    R_pre[0] = mount[:3, :3]
    p_pre[0] = mount[:3, 3]
    for k in range(N):
        p_pre[k + 1] = R_pre[k] @ p_seg[k] + p_pre[k]
        R_pre[k + 1] = R_pre[k] @ R_seg[k]
    return R_pre, p_pre


def chain_poses(twists, lengths, mount, s):
    """World rotations (n, 3, 3) and positions (n, 3) at abscissae ``s``."""
    twists = np.asarray(twists, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    R_pre, p_pre = _prefix(twists, lengths, np.asarray(mount, dtype=float))
    seg, local = _locate(lengths, s)
    R_loc, p_loc = _exp_batch(twists[seg] * local[:, None])
    R = R_pre[seg] @ R_loc
    p = np.einsum("kij,kj->ki", R_pre[seg], p_loc) + p_pre[seg]
    return R, p


def chain_positions(twists, lengths, mount, s):
    return chain_poses(twists, lengths, mount, s)[1]


def chain_jacobians(twists, lengths, mount, s):
    """Positions (n, 3) and position Jacobians (n, 3, 6N) w.r.t. all strains."""
    twists = np.asarray(twists, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    mount = np.asarray(mount, dtype=float)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    N = len(lengths)
    R_pre, p_pre = _prefix(twists, lengths, mount)

    # full segments: world-rotated tangent blocks at each distal frame
    Jf, Qf = _right_jac_batch(twists * lengths[:, None])
    Gw = R_pre[1:] @ Jf * lengths[:, None, None]  # d omega columns (angular part)
    Gv_ang = R_pre[1:] @ Qf * lengths[:, None, None]
    Gv_lin = Gw  # J block is shared by both diagonal positions

    seg, local = _locate(lengths, s)
    R_loc, p_loc = _exp_batch(twists[seg] * local[:, None])
    R = R_pre[seg] @ R_loc
    p = np.einsum("kij,kj->ki", R_pre[seg], p_loc) + p_pre[seg]

    n = len(s)
    jac = np.zeros((n, 3, 6 * N))
    for k in range(N):
        rows = seg > k
        if np.any(rows):
            r = p[rows] - p_pre[k + 1]
            Rr = _skew_batch(r)
            # dp = G_v - tilde(r) G_w with G = R_distal [J 0; Q J] L
            jac[rows, :, 6 * k : 6 * k + 3] = Gv_ang[k] - Rr @ Gw[k]
            jac[rows, :, 6 * k + 3 : 6 * k + 6] = Gv_lin[k]
    Jl, Ql = _right_jac_batch(twists[seg] * local[:, None])
    scale = local[:, None, None]
    for k in range(N):
        rows = seg == k
        if np.any(rows):
            jac[rows, :, 6 * k : 6 * k + 3] = R[rows] @ Ql[rows] * scale[rows]
            jac[rows, :, 6 * k + 3 : 6 * k + 6] = R[rows] @ Jl[rows] * scale[rows]
    return p, jac


def min_pair_barrier(twists, lengths, mount, s, radius, obs_centers, obs_radii, d_safe):
    p = chain_positions(twists, lengths, mount, s)
    d = np.linalg.norm(p[:, None, :] - obs_centers[None, :, :], axis=2)
    return float(np.min(d - obs_radii[None, :] - radius - d_safe))


def tendon_kinematics(twists, lengths, offsets, termination):
    """Tendon lengths (m,) and tendon Jacobian (m, 6N).

    ``offsets``: (m, 3) tendon offsets in the cross-section; ``termination``:
    (m,) index of the last segment each tendon passes through.
    """
    twists = np.asarray(twists, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    m = offsets.shape[0]
    N = len(lengths)
    ell = np.zeros(m)
    J = np.zeros((m, 6 * N))
    for j in range(m):
        d = offsets[j]
        for i in range(int(termination[j]) + 1):
            k = twists[i, :3]
            x = np.cross(k, d) + twists[i, 3:]
            nrm = np.sqrt(x @ x)
            if nrm < TANGENT_EPS:
                raise DegenerateTangentError(
                    f"degenerate tendon tangent (tendon {j}, segment {i})"
                )
            t = x / nrm
            theta = np.concatenate([np.cross(d, t), t])
            ell[j] += (theta @ twists[i]) * lengths[i]
            J[j, 6 * i : 6 * i + 6] = theta * lengths[i]
    return ell, J


def closed_form(aV, bV, ah, bh, w_clf, hard):
    """Closed-form KKT solution of the two-constraint CLF-CBF QP.

    Returns ``(u, lambda_V, lambda_h, delta, active_code, flags)``.
    """
    aV = np.asarray(aV, dtype=float)
    ah = np.asarray(ah, dtype=float)
    bV = float(bV)
    bh = float(bh)
    if aV.shape != ah.shape:
        raise ValueError("a_V and a_h must have the same length")
    G11 = float(aV @ aV)
    G12 = float(aV @ ah)
    G22 = float(ah @ ah)
    if not (np.isfinite(G11) and np.isfinite(G22) and np.isfinite(bV)) or np.isnan(bh):
        raise ValueError("constraint rows must be finite")
    reg = 0.0 if hard else 1.0 / w_clf
    g11 = G11 + reg
    flags = 0

    # (lamV, lamh, code) candidates; u and delta follow from the multipliers
    cands = [(0.0, 0.0, NONE)]
    if g11 > 0.0:
        cands.append((max(0.0, 2.0 * bV / g11), 0.0, CLF_ONLY))
    if G22 > 0.0:
        cands.append((0.0, max(0.0, -2.0 * bh / G22), CBF_ONLY))
    det = g11 * G22 - G12 * G12
    if det > 1e-12 * max(1.0, g11 * G22):
        lv = 2.0 * (G22 * bV - G12 * bh) / det
        lh = 2.0 * (G12 * bV - g11 * bh) / det
        if lv >= 0.0 and lh >= 0.0:
            cands.append((lv, lh, BOTH))
    else:
        flags |= FLAG_DEGENERATE

    best = None
    for lv, lh, code in cands:
        # CLF residual and CBF value via Gram entries (u never formed)
        delta = 0.0 if hard else lv / (2.0 * w_clf)
        clf = -0.5 * (lv * G11 - lh * G12) + bV
        cbf = -0.5 * (lv * G12 - lh * G22) + bh
        if cbf < -1e-10 * (1.0 + abs(bh)) or clf > delta + 1e-10 * (1.0 + abs(bV)):
            continue
        f = 0.25 * (lv * lv * G11 - 2.0 * lv * lh * G12 + lh * lh * G22)
        if not hard:
            f += w_clf * delta * delta
        if best is None or f < best[0]:
            best = (f, lv, lh, delta, code)

    if best is None:
        # CLF cannot be met: keep the barrier, drop the task
        flags |= FLAG_INFEASIBLE
        if G22 == 0.0:
            if bh < 0.0:
                raise InfeasibleCBFError("barrier violated with no control authority over it")
            best = (0.0, 0.0, 0.0, 0.0, NONE)
        else:
            lh = max(0.0, -2.0 * bh / G22)
            best = (0.0, 0.0, lh, 0.0, CBF_ONLY if lh > 0.0 else NONE)

    _, lv, lh, delta, code = best
    u = -0.5 * (lv * aV - lh * ah)
    return u, lv, lh, delta, code, flags
