# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Mirrors ``_kernels_py`` call for call."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, isfinite, isnan

from soft_cbf.errors import DegenerateTangentError, InfeasibleCBFError

cnp.import_array()

DEF TAYLOR_EPS = 1e-8
DEF SERIES_EPS = 1e-2
DEF TANGENT_EPS = 1e-9

NONE = 0
CLF_ONLY = 1
CBF_ONLY = 2
BOTH = 3
FLAG_DEGENERATE = 1
FLAG_INFEASIBLE = 2


cdef inline void skew(const double* v, double* S) noexcept nogil:
    S[0] = 0.0;   S[1] = -v[2]; S[2] = v[1]
    S[3] = v[2];  S[4] = 0.0;   S[5] = -v[0]
    S[6] = -v[1]; S[7] = v[0];  S[8] = 0.0


cdef inline void mm3(const double* A, const double* B, double* C) noexcept nogil:
    cdef int i, j
    for i in range(3):
        for j in range(3):
            C[3 * i + j] = A[3 * i] * B[j] + A[3 * i + 1] * B[3 + j] + A[3 * i + 2] * B[6 + j]


cdef inline void mv3(const double* A, const double* x, double* y) noexcept nogil:
    y[0] = A[0] * x[0] + A[1] * x[1] + A[2] * x[2]
    y[1] = A[3] * x[0] + A[4] * x[1] + A[5] * x[2]
    y[2] = A[6] * x[0] + A[7] * x[1] + A[8] * x[2]


cdef inline void exp_seg(const double* om, double* R, double* p) noexcept nogil:
    cdef double th = sqrt(om[0] * om[0] + om[1] * om[1] + om[2] * om[2])
    cdef double a, b, c, h, t2
    cdef double K[9]
    cdef double K2[9]
    cdef double V[9]
    cdef int i
    if th <= TAYLOR_EPS:
        t2 = th * th
        a = 1.0 - t2 / 6.0
        b = 0.5 - t2 / 24.0
        c = 1.0 / 6.0 - t2 / 120.0
    else:
        h = sin(0.5 * th) / th
        a = sin(th) / th
        b = 2.0 * h * h
        c = (th - sin(th)) / (th * th * th)
    skew(om, K)
    mm3(K, K, K2)
    for i in range(9):
        R[i] = a * K[i] + b * K2[i]
        V[i] = b * K[i] + c * K2[i]
    R[0] += 1.0; R[4] += 1.0; R[8] += 1.0
    V[0] += 1.0; V[4] += 1.0; V[8] += 1.0
    mv3(V, &om[3], p)


cdef inline void right_jac(const double* om, double* J, double* Q) noexcept nogil:
    cdef double th = sqrt(om[0] * om[0] + om[1] * om[1] + om[2] * om[2])
    cdef double B, C, D, E, st, ct, t2, t4
    cdef double P[9]
    cdef double Rh[9]
    cdef double P2[9]
    cdef double PR[9]
    cdef double RP[9]
    cdef double PRP[9]
    cdef double P2R[9]
    cdef double RP2[9]
    cdef double PRP2[9]
    cdef double P2RP[9]
    cdef int i
    t2 = th * th
    if th < SERIES_EPS:
        t4 = t2 * t2
        B = 0.5 - t2 / 24.0 + t4 / 720.0
        C = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0
        D = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0
        E = 1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0
    else:
        st = sin(th)
        ct = cos(th)
        B = (1.0 - ct) / t2
        C = (th - st) / (t2 * th)
        D = (t2 + 2.0 * ct - 2.0) / (2.0 * t2 * t2)
        E = (2.0 * th - 3.0 * st + th * ct) / (2.0 * t2 * t2 * th)
    skew(om, P)
    skew(&om[3], Rh)
    mm3(P, P, P2)
    mm3(P, Rh, PR)
    mm3(Rh, P, RP)
    mm3(PR, P, PRP)
    mm3(P2, Rh, P2R)
    mm3(RP, P, RP2)
    mm3(PRP, P, PRP2)
    mm3(P, PRP, P2RP)
    for i in range(9):
        J[i] = -B * P[i] + C * P2[i]
        Q[i] = (-0.5 * Rh[i] + C * (PR[i] + RP[i] - PRP[i])
                + D * (-P2R[i] - RP2[i] + 3.0 * PRP[i]) + E * (PRP2[i] + P2RP[i]))
    J[0] += 1.0; J[4] += 1.0; J[8] += 1.0


cdef inline int locate(const double* cum, int N, double s, double* local) noexcept nogil:
    cdef int k = 0
    cdef double tol = 1e-15 * cum[N - 1]
    while k < N - 1 and s - tol > cum[k]:
        k += 1
    if k == 0:
        local[0] = s
    else:
        local[0] = s - cum[k - 1]
    return k


cdef void prefix(const double[:, ::1] tw, const double[::1] L, const double[:, ::1] mount,
                 double* Rpre, double* ppre, double* cum) noexcept nogil:
    cdef int N = L.shape[0]
    cdef int k, i, j
    cdef double om[6]
    cdef double Rs[9]
    cdef double ps[3]
    cdef double tmp[3]
    for i in range(3):
        for j in range(3):
            Rpre[3 * i + j] = mount[i, j]
        ppre[i] = mount[i, 3]
    for k in range(N):
        cum[k] = L[k] if k == 0 else cum[k - 1] + L[k]
        for i in range(6):
            om[i] = tw[k, i] * L[k]
        exp_seg(om, Rs, ps)
        mv3(&Rpre[9 * k], ps, tmp)
        for i in range(3):
            ppre[3 * (k + 1) + i] = tmp[i] + ppre[3 * k + i]
        mm3(&Rpre[9 * k], Rs, &Rpre[9 * (k + 1)])


def chain_poses(twists, lengths, mount, s):
    cdef const double[:, ::1] tw = np.ascontiguousarray(twists, dtype=np.float64)
    cdef const double[::1] L = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef const double[:, ::1] M = np.ascontiguousarray(mount, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(np.atleast_1d(s), dtype=np.float64)
    cdef int N = L.shape[0]
    cdef int n = sv.shape[0]
    cdef double[::1] Rpre = np.empty(9 * (N + 1))
    cdef double[::1] ppre = np.empty(3 * (N + 1))
    cdef double[::1] cum = np.empty(N)
    R_out = np.empty((n, 3, 3))
    p_out = np.empty((n, 3))
    cdef double[:, :, ::1] Ro = R_out
    cdef double[:, ::1] po = p_out
    cdef int a, k, i, j
    cdef double loc
    cdef double om[6]
    cdef double Rl[9]
    cdef double pl[3]
    cdef double Rw[9]
    cdef double tmp[3]
    with nogil:
        prefix(tw, L, M, &Rpre[0], &ppre[0], &cum[0])
        for a in range(n):
            k = locate(&cum[0], N, sv[a], &loc)
            for i in range(6):
                om[i] = tw[k, i] * loc
            exp_seg(om, Rl, pl)
            mm3(&Rpre[9 * k], Rl, Rw)
            mv3(&Rpre[9 * k], pl, tmp)
            for i in range(3):
                po[a, i] = tmp[i] + ppre[3 * k + i]
                for j in range(3):
                    Ro[a, i, j] = Rw[3 * i + j]
    return R_out, p_out


def chain_positions(twists, lengths, mount, s):
    cdef const double[:, ::1] tw = np.ascontiguousarray(twists, dtype=np.float64)
    cdef const double[::1] L = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef const double[:, ::1] M = np.ascontiguousarray(mount, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(np.atleast_1d(s), dtype=np.float64)
    cdef int N = L.shape[0]
    cdef int n = sv.shape[0]
    cdef double[::1] Rpre = np.empty(9 * (N + 1))
    cdef double[::1] ppre = np.empty(3 * (N + 1))
    cdef double[::1] cum = np.empty(N)
    p_out = np.empty((n, 3))
    cdef double[:, ::1] po = p_out
    with nogil:
        prefix(tw, L, M, &Rpre[0], &ppre[0], &cum[0])
        _positions(tw, N, sv, &Rpre[0], &ppre[0], &cum[0], &po[0, 0])
    return p_out


cdef void _positions(const double[:, ::1] tw, int N, const double[::1] sv, double* Rpre,
                     double* ppre, double* cum, double* po) noexcept nogil:
    cdef int a, k, i
    cdef double loc
    cdef double om[6]
    cdef double Rl[9]
    cdef double pl[3]
    cdef double tmp[3]
    for a in range(sv.shape[0]):
        k = locate(cum, N, sv[a], &loc)
        for i in range(6):
            om[i] = tw[k, i] * loc
        exp_seg(om, Rl, pl)
        mv3(&Rpre[9 * k], pl, tmp)
        for i in range(3):
            po[3 * a + i] = tmp[i] + ppre[3 * k + i]


def min_pair_barrier(twists, lengths, mount, s, double radius, obs_centers, obs_radii,
                     double d_safe):
    cdef const double[:, ::1] tw = np.ascontiguousarray(twists, dtype=np.float64)
    cdef const double[::1] L = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef const double[:, ::1] M = np.ascontiguousarray(mount, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(np.atleast_1d(s), dtype=np.float64)
    cdef const double[:, ::1] oc = np.ascontiguousarray(obs_centers, dtype=np.float64)
    cdef const double[::1] orad = np.ascontiguousarray(obs_radii, dtype=np.float64)
    cdef int N = L.shape[0]
    cdef int n = sv.shape[0]
    cdef int no = oc.shape[0]
    cdef double[::1] Rpre = np.empty(9 * (N + 1))
    cdef double[::1] ppre = np.empty(3 * (N + 1))
    cdef double[::1] cum = np.empty(N)
    cdef double[::1] pos = np.empty(3 * n)
    cdef double best = 1e300
    cdef double dx, dy, dz, b
    cdef int a, j
    with nogil:
        prefix(tw, L, M, &Rpre[0], &ppre[0], &cum[0])
        _positions(tw, N, sv, &Rpre[0], &ppre[0], &cum[0], &pos[0])
        for a in range(n):
            for j in range(no):
                dx = pos[3 * a] - oc[j, 0]
                dy = pos[3 * a + 1] - oc[j, 1]
                dz = pos[3 * a + 2] - oc[j, 2]
                b = sqrt(dx * dx + dy * dy + dz * dz) - orad[j] - radius - d_safe
                if b < best:
                    best = b
    return best


def chain_jacobians(twists, lengths, mount, s):
    cdef const double[:, ::1] tw = np.ascontiguousarray(twists, dtype=np.float64)
    cdef const double[::1] L = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef const double[:, ::1] M = np.ascontiguousarray(mount, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(np.atleast_1d(s), dtype=np.float64)
    cdef int N = L.shape[0]
    cdef int n = sv.shape[0]
    cdef int nc = 6 * N
    cdef double[::1] Rpre = np.empty(9 * (N + 1))
    cdef double[::1] ppre = np.empty(3 * (N + 1))
    cdef double[::1] cum = np.empty(N)
    cdef double[::1] Gw = np.empty(9 * N)
    cdef double[::1] Gq = np.empty(9 * N)
    p_out = np.empty((n, 3))
    jac_out = np.zeros((n, 3, nc))
    cdef double[:, ::1] po = p_out
    cdef double[:, :, ::1] jo = jac_out
    cdef int a, k, kk, i, j
    cdef double loc
    cdef double om[6]
    cdef double Jm[9]
    cdef double Qm[9]
    cdef double Rl[9]
    cdef double pl[3]
    cdef double Rw[9]
    cdef double tmp[3]
    cdef double r[3]
    cdef double Sr[9]
    cdef double SG[9]
    cdef double A1[9]
    cdef double A2[9]
    with nogil:
        prefix(tw, L, M, &Rpre[0], &ppre[0], &cum[0])
        for k in range(N):
            for i in range(6):
                om[i] = tw[k, i] * L[k]
            right_jac(om, Jm, Qm)
            mm3(&Rpre[9 * (k + 1)], Jm, &Gw[9 * k])
            mm3(&Rpre[9 * (k + 1)], Qm, &Gq[9 * k])
            for i in range(9):
                Gw[9 * k + i] *= L[k]
                Gq[9 * k + i] *= L[k]
        for a in range(n):
            k = locate(&cum[0], N, sv[a], &loc)
            for i in range(6):
                om[i] = tw[k, i] * loc
            exp_seg(om, Rl, pl)
            mm3(&Rpre[9 * k], Rl, Rw)
            mv3(&Rpre[9 * k], pl, tmp)
            for i in range(3):
                po[a, i] = tmp[i] + ppre[3 * k + i]
            for kk in range(k):
                for i in range(3):
                    r[i] = po[a, i] - ppre[3 * (kk + 1) + i]
                skew(r, Sr)
                mm3(Sr, &Gw[9 * kk], SG)
                for i in range(3):
                    for j in range(3):
                        jo[a, i, 6 * kk + j] = Gq[9 * kk + 3 * i + j] - SG[3 * i + j]
                        jo[a, i, 6 * kk + 3 + j] = Gw[9 * kk + 3 * i + j]
            right_jac(om, Jm, Qm)
            mm3(Rw, Qm, A1)
            mm3(Rw, Jm, A2)
            for i in range(3):
                for j in range(3):
                    jo[a, i, 6 * k + j] = A1[3 * i + j] * loc
                    jo[a, i, 6 * k + 3 + j] = A2[3 * i + j] * loc
    return p_out, jac_out


def tendon_kinematics(twists, lengths, offsets, termination):
    cdef const double[:, ::1] tw = np.ascontiguousarray(twists, dtype=np.float64)
    cdef const double[::1] L = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef const double[:, ::1] d = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef const cnp.int64_t[::1] term = np.ascontiguousarray(termination, dtype=np.int64)
    cdef int m = d.shape[0]
    cdef int N = L.shape[0]
    ell_out = np.zeros(m)
    J_out = np.zeros((m, 6 * N))
    cdef double[::1] ell = ell_out
    cdef double[:, ::1] J = J_out
    cdef int jj, i, c
    cdef double x0, x1, x2, nrm, t0, t1, t2, th0, th1, th2, dot
    for jj in range(m):
        for i in range(term[jj] + 1):
            x0 = tw[i, 1] * d[jj, 2] - tw[i, 2] * d[jj, 1] + tw[i, 3]
            x1 = tw[i, 2] * d[jj, 0] - tw[i, 0] * d[jj, 2] + tw[i, 4]
            x2 = tw[i, 0] * d[jj, 1] - tw[i, 1] * d[jj, 0] + tw[i, 5]
            nrm = sqrt(x0 * x0 + x1 * x1 + x2 * x2)
            if nrm < TANGENT_EPS:
                raise DegenerateTangentError(
                    f"degenerate tendon tangent (tendon {jj}, segment {i})")
            t0 = x0 / nrm
            t1 = x1 / nrm
            t2 = x2 / nrm
            th0 = d[jj, 1] * t2 - d[jj, 2] * t1
            th1 = d[jj, 2] * t0 - d[jj, 0] * t2
            th2 = d[jj, 0] * t1 - d[jj, 1] * t0
            dot = (th0 * tw[i, 0] + th1 * tw[i, 1] + th2 * tw[i, 2]
                   + t0 * tw[i, 3] + t1 * tw[i, 4] + t2 * tw[i, 5])
            ell[jj] += dot * L[i]
            c = 6 * i
            J[jj, c] = th0 * L[i]
            J[jj, c + 1] = th1 * L[i]
            J[jj, c + 2] = th2 * L[i]
            J[jj, c + 3] = t0 * L[i]
            J[jj, c + 4] = t1 * L[i]
            J[jj, c + 5] = t2 * L[i]
    return ell_out, J_out


def closed_form(aV, bV, ah, bh, double w_clf, bint hard):
    cdef const double[::1] av = np.ascontiguousarray(aV, dtype=np.float64)
    cdef const double[::1] ahv = np.ascontiguousarray(ah, dtype=np.float64)
    cdef double bv = bV
    cdef double bhh = bh
    cdef int m = av.shape[0]
    cdef int i, c, code
    cdef double G11 = 0.0, G12 = 0.0, G22 = 0.0
    for i in range(m):
        G11 += av[i] * av[i]
        G12 += av[i] * ahv[i]
        G22 += ahv[i] * ahv[i]
    if not (isfinite(G11) and isfinite(G22) and isfinite(bv)) or isnan(bhh):
        raise ValueError("constraint rows must be finite")
    if av.shape[0] != ahv.shape[0]:
        raise ValueError("a_V and a_h must have the same length")
    cdef double reg = 0.0 if hard else 1.0 / w_clf
    cdef double g11 = G11 + reg
    cdef int flags = 0
    cdef double lvs[4]
    cdef double lhs[4]
    cdef int codes[4]
    cdef int nc = 0
    cdef double det, lv, lh, delta, clf, cbf, f, x
    lvs[0] = 0.0; lhs[0] = 0.0; codes[0] = NONE; nc = 1
    if g11 > 0.0:
        x = 2.0 * bv / g11
        lvs[nc] = x if x > 0.0 else 0.0
        lhs[nc] = 0.0
        codes[nc] = CLF_ONLY
        nc += 1
    if G22 > 0.0:
        x = -2.0 * bhh / G22
        lvs[nc] = 0.0
        lhs[nc] = x if x > 0.0 else 0.0
        codes[nc] = CBF_ONLY
        nc += 1
    det = g11 * G22 - G12 * G12
    if det > 1e-12 * (g11 * G22 if g11 * G22 > 1.0 else 1.0):
        lv = 2.0 * (G22 * bv - G12 * bhh) / det
        lh = 2.0 * (G12 * bv - g11 * bhh) / det
        if lv >= 0.0 and lh >= 0.0:
            lvs[nc] = lv
            lhs[nc] = lh
            codes[nc] = BOTH
            nc += 1
    else:
        flags |= FLAG_DEGENERATE

    cdef bint found = False
    cdef double best_f = 0.0, best_lv = 0.0, best_lh = 0.0, best_d = 0.0
    cdef int best_code = NONE
    for c in range(nc):
        lv = lvs[c]
        lh = lhs[c]
        delta = 0.0 if hard else lv / (2.0 * w_clf)
        clf = -0.5 * (lv * G11 - lh * G12) + bv
        cbf = -0.5 * (lv * G12 - lh * G22) + bhh
        if cbf < -1e-10 * (1.0 + abs(bhh)) or clf > delta + 1e-10 * (1.0 + abs(bv)):
            continue
        f = 0.25 * (lv * lv * G11 - 2.0 * lv * lh * G12 + lh * lh * G22)
        if not hard:
            f += w_clf * delta * delta
        if not found or f < best_f:
            found = True
            best_f = f
            best_lv = lv
            best_lh = lh
            best_d = delta
            best_code = codes[c]

    if not found:
        flags |= FLAG_INFEASIBLE
        best_lv = 0.0
        best_d = 0.0
        if G22 == 0.0:
            if bhh < 0.0:
                raise InfeasibleCBFError("barrier violated with no control authority over it")
            best_lh = 0.0
            best_code = NONE
        else:
            x = -2.0 * bhh / G22
            best_lh = x if x > 0.0 else 0.0
            best_code = CBF_ONLY if best_lh > 0.0 else NONE

    u_out = np.empty(m)
    cdef double[::1] u = u_out
    for i in range(m):
        u[i] = -0.5 * (best_lv * av[i] - best_lh * ahv[i])
    return u_out, best_lv, best_lh, best_d, best_code, flags
