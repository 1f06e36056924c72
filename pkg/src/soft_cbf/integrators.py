"""Fixed-step Tsitouras 5(4) Runge-Kutta step."""

from __future__ import annotations

import numpy as np

from .errors import IntegrationBlowupError

TSIT5_C = np.array([0.0, 0.161, 0.327, 0.9, 0.9800255409045097, 1.0, 1.0])

TSIT5_A = np.zeros((7, 7))
TSIT5_A[1, 0] = 0.161
TSIT5_A[2, :2] = [-0.008480655492356989, 0.335480655492357]
TSIT5_A[3, :3] = [2.897153057105493, -6.359448489975075, 4.3622954328695815]
TSIT5_A[4, :4] = [5.325864828439257, -11.748883564062828, 7.4955393428898365, -0.09249506636175525]
TSIT5_A[5, :5] = [
    5.86145544294642, -12.92096931784711, 8.159367898576159, -0.071584973281401, -0.028269050394068383,
]
# 5th-order weights; also the last row of A (first-same-as-last)
TSIT5_B = np.array([
    0.09646076681806523, 0.01, 0.4798896504144996, 1.379008574103742,
    -3.290069515436081, 2.324710524099774, 0.0,
])
TSIT5_A[6, :6] = TSIT5_B[:6]
# difference between the 5th- and 4th-order weights
TSIT5_BTILDE = np.array([
    0.001780011052226, 0.000816434459657, -0.007880878010262, 0.144711007173263,
    -0.582357165452555, 0.458082105929187, -1.0 / 66.0,
])


def integrate_step_tsit5(rhs, q, dt: float, k1=None, return_info: bool = False):
    """One fixed step of ``q' = rhs(q)``.

    ``k1`` may carry ``rhs(q)`` from the previous step's last stage when the
    right-hand side did not change in between. With ``return_info`` the
    result is ``(q_next, error_estimate, k7)`` where the error estimate is the
    max-norm of the embedded 5(4) difference.
    """
    q = np.asarray(q, dtype=float)
    K = np.empty((7, q.size))
    K[0] = rhs(q) if k1 is None else k1
    if not np.all(np.isfinite(K[0])):
        raise IntegrationBlowupError("non-finite stage 1", last_state=q)
    for i in range(1, 7):
        stage = q + dt * (TSIT5_A[i, :i] @ K[:i])
        K[i] = rhs(stage)
        if not np.all(np.isfinite(K[i])):
            raise IntegrationBlowupError(f"non-finite stage {i + 1}", last_state=q)
    # stage 7 is evaluated at q + dt * B @ K, i.e. the new state
    q_next = q + dt * (TSIT5_B @ K)
    if not return_info:
        return q_next
    err = float(np.max(np.abs(dt * (TSIT5_BTILDE @ K)))) if q.size else 0.0
    return q_next, err, K[6]
