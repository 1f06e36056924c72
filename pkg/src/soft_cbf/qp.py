"""Dense primal-dual interior-point QP solver (Mehrotra predictor-corrector).

Solves ``min 0.5 z'Hz + c'z  s.t.  A z <= b`` for small dense problems. It is
the numerical reference for the closed-form controller and doubles as the
QP-based comparison controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import ACTIVE_SET_NAMES, HARD, RELAXED, ControlSolution, _mode
from .safety import ConstraintRows

OPTIMAL = "optimal"
MAX_ITER = "max-iter"
INFEASIBLE = "infeasible"
FAILED = "failed"

STEP_FRACTION = 0.995
REG_RETRY = 1e-10
ACTIVE_TOL = 1e-6


@dataclass(frozen=True)
class DenseQP:
    H: np.ndarray
    c: np.ndarray
    A_ineq: np.ndarray
    b_ineq: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A = np.asarray(self.A_ineq, dtype=float).reshape(-1, n)
        b = np.asarray(self.b_ineq, dtype=float).reshape(-1)
        if H.shape != (n, n) or A.shape[0] != b.size:
            raise ValueError("inconsistent QP dimensions")
        if not np.allclose(H, H.T, atol=1e-12, rtol=0.0):
            raise ValueError("H must be symmetric")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_ineq", A)
        object.__setattr__(self, "b_ineq", b)

    @property
    def n(self) -> int:
        return self.c.size

    def objective(self, z) -> float:
        return float(0.5 * z @ self.H @ z + self.c @ z)


@dataclass(frozen=True)
class QPSolution:
    z_star: np.ndarray
    duals: np.ndarray
    iterations: int
    status: str
    primal_residual: float = math.nan
    gap: float = math.nan
    gap_history: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _newton(M, rhs, n):
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.solve(M + REG_RETRY * np.eye(n), rhs)


def _max_step(v, dv):
    neg = dv < 0.0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))


def solve_qp(problem: DenseQP, tol: float = 1e-13, max_iter: int = 50) -> QPSolution:
    H, c, A, b = problem.H, problem.c, problem.A_ineq, problem.b_ineq
    n, k = c.size, b.size
    z = np.zeros(n)
    if k == 0:
        try:
            z = _newton(H, -c, n)
        except np.linalg.LinAlgError:
            return QPSolution(z, np.zeros(0), 0, FAILED)
        return QPSolution(z, np.zeros(0), 0, OPTIMAL, 0.0, 0.0)

    # z = 0 with slacks shifted to strict positivity, unit duals
    s = np.maximum(b, 1.0)
    y = np.ones(k)
    scale_p = 1.0 + np.max(np.abs(b))
    history = []
    status = MAX_ITER
    it = 0
    for it in range(1, max_iter + 1):
        r_d = H @ z + c + A.T @ y
        r_p = A @ z + s - b
        mu = float(s @ y) / k
        res_p = float(np.max(np.abs(r_p)))
        history.append(mu + res_p + float(np.max(np.abs(r_d))))
        scale_d = 1.0 + max(np.max(np.abs(c)), np.max(np.abs(H @ z)), np.max(np.abs(A.T @ y)))
        if (
            np.max(np.abs(r_d)) <= tol * scale_d
            and res_p <= tol * scale_p
            and mu <= tol
        ):
            status = OPTIMAL
            it -= 1
            break
        # Farkas certificate: y >= 0 with A'y ~ 0 and b'y < 0
        ny = float(np.sum(y))
        if ny > 1e8:
            yh = y / ny
            if float(b @ yh) < -1e-8 and np.max(np.abs(A.T @ yh)) < 1e-6:
                status = INFEASIBLE
                break

        # symmetric augmented system [[H, A'], [A, -S/Y]] (better conditioned
        # than the reduced normal matrix once some slacks vanish)
        K = np.zeros((n + k, n + k))
        K[:n, :n] = H
        K[:n, n:] = A.T
        K[n:, :n] = A
        K[n:, n:] = -np.diag(s / y)
        try:
            # predictor
            r_c = s * y
            d = _newton(K, np.concatenate([-r_d, -r_p + r_c / y]), n + k)
            dz, dy = d[:n], d[n:]
            ds = (-r_c - s * dy) / y
            a_aff = min(_max_step(s, ds), _max_step(y, dy))
            mu_aff = float((s + a_aff * ds) @ (y + a_aff * dy)) / k
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            # corrector
            r_c = s * y + ds * dy - sigma * mu
            d = _newton(K, np.concatenate([-r_d, -r_p + r_c / y]), n + k)
        except np.linalg.LinAlgError:
            status = FAILED
            break
        dz, dy = d[:n], d[n:]
        ds = (-r_c - s * dy) / y
        alpha = min(1.0, STEP_FRACTION * min(_max_step(s, ds), _max_step(y, dy)))
        z = z + alpha * dz
        s = s + alpha * ds
        y = y + alpha * dy
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(y))):
            status = FAILED
            break

    return QPSolution(
        z, y, it, status,
        float(np.max(np.abs(np.maximum(A @ z - b, 0.0)))),
        float(s @ y) / k,
        history,
    )


def clf_cbf_problem(
    a_V, b_V: float, A_h, b_h, w_clf: float, hard: bool
) -> tuple[DenseQP, int]:
    """Encode one CLF row and any number of CBF rows.

    Returns the problem and the number of kept CBF rows. Rows with ``a_h = 0``
    and a non-negative (or infinite) right-hand side are vacuous and dropped.
    """
    a_V = np.asarray(a_V, dtype=float).reshape(-1)
    m = a_V.size
    A_h = np.asarray(A_h, dtype=float).reshape(-1, m)
    b_h = np.asarray(b_h, dtype=float).reshape(-1)
    keep = ~((np.all(A_h == 0.0, axis=1) & (b_h >= 0.0)) | np.isposinf(b_h))
    A_h, b_h = A_h[keep], b_h[keep]
    nh = b_h.size
    if hard:
        H = 2.0 * np.eye(m)
        A = np.vstack([a_V[None, :], -A_h])
        b = np.concatenate([[-b_V], b_h])
    else:
        H = np.diag(np.concatenate([np.full(m, 2.0), [2.0 * w_clf]]))
        A = np.zeros((2 + nh, m + 1))
        A[0, :m] = a_V
        A[0, m] = -1.0
        A[1 : 1 + nh, :m] = -A_h
        A[1 + nh, m] = -1.0
        b = np.concatenate([[-b_V], b_h, [0.0]])
    return DenseQP(H, np.zeros(H.shape[0]), A, b), nh


def _to_solution(sol: QPSolution, m: int, hard: bool, mode: str, nh: int) -> ControlSolution:
    u = sol.z_star[:m].copy()
    delta = 0.0 if hard else max(0.0, float(sol.z_star[m]))
    lam_V = float(sol.duals[0])
    lam_h = float(np.sum(sol.duals[1 : 1 + nh])) if nh else 0.0
    code = (lam_V > ACTIVE_TOL) + 2 * (lam_h > ACTIVE_TOL)
    return ControlSolution(
        u, lam_V, lam_h, delta, ACTIVE_SET_NAMES[code], mode,
        infeasible=not sol.optimal,
    )


def solve_clf_cbf_qp(
    rows: ConstraintRows,
    w_clf: float = 100.0,
    mode: str | None = None,
    tol: float = 1e-13,
    max_iter: int = 50,
    return_qp: bool = False,
):
    """Interior-point solution of the same program the closed form solves."""
    mode = _mode(w_clf, mode)
    hard = mode == HARD
    prob, nh = clf_cbf_problem(rows.a_V, rows.b_V, rows.a_h, [rows.b_h], w_clf, hard)
    sol = solve_qp(prob, tol, max_iter)
    out = _to_solution(sol, rows.m, hard, mode, nh)
    return (out, sol) if return_qp else out


def solve_multi_cbf_qp(
    a_V, b_V: float, A_h, b_h, w_clf: float = 100.0, mode: str | None = None,
    tol: float = 1e-13, max_iter: int = 50,
) -> tuple[ControlSolution, QPSolution]:
    """One CLF row and one CBF row per sphere-obstacle pair (no aggregation)."""
    mode = _mode(w_clf, mode)
    hard = mode == HARD
    prob, nh = clf_cbf_problem(a_V, b_V, A_h, b_h, w_clf, hard)
    sol = solve_qp(prob, tol, max_iter)
    return _to_solution(sol, np.asarray(a_V).size, hard, mode, nh), sol


__all__ = [
    "DenseQP", "QPSolution", "solve_qp", "solve_clf_cbf_qp", "solve_multi_cbf_qp",
    "clf_cbf_problem", "OPTIMAL", "MAX_ITER", "INFEASIBLE", "FAILED", "RELAXED", "HARD",
]
