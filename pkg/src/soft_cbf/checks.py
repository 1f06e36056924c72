"""Quick invariant suites behind ``soft-cbf validate``.

Each check returns a :class:`CheckResult`; they are reduced-size versions of
the property tests and are meant as a smoke test of an installed build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import available_backends
from .bench import active_from_multipliers, constraint_violation, random_rows
from .closed_loop import simulate
from .controller import solve_closed_form
from .integrators import integrate_step_tsit5
from .kinematics import RobotModel, embed, positional_jacobian, positions
from .qp import solve_clf_cbf_qp
from .safety import (
    Obstacle,
    SafetyConfig,
    clf_gradient,
    clf_value,
    lse_barrier,
    lse_barrier_gradient,
    pairwise_barriers,
)
from .sim import load_scenario, make_policy, scenario_monitor


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def random_state(model: RobotModel, rng: np.random.Generator, kappa: float = 10.0, strain: float = 0.1):
    """Curvatures ~ U(-kappa, kappa), linear strains ~ U(-strain, strain)."""
    scale = np.where(model.active_columns % 6 < 3, kappa, strain)
    return rng.uniform(-1.0, 1.0, model.n_q) * scale


def random_obstacles(rng: np.random.Generator, n: int, spread: float = 0.2):
    return tuple(
        Obstacle(rng.uniform(-spread, spread, 3) + [0, 0, 0.2], rng.uniform(0.005, 0.03)) for _ in range(n)
    )


def relative_error(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def central_difference(f, q, h: float = 1e-6) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    out = []
    for i in range(q.size):
        e = np.zeros_like(q)
        e[i] = h
        out.append((np.asarray(f(q + e)) - np.asarray(f(q - e))) / (2.0 * h))
    return np.stack(out, axis=-1)


def check_oracle_equivalence(n: int = 200, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    du = gap = viol = 0.0
    matches = 0
    for _ in range(n):
        r = random_rows(rng)
        c, o = solve_closed_form(r, math.inf), solve_clf_cbf_qp(r, math.inf)
        du = max(du, float(np.max(np.abs(c.u_star - o.u_star))))
        gap = max(gap, abs(c.objective(math.inf) - o.objective(math.inf)))
        viol = max(viol, constraint_violation(r, c.u_star))
        matches += active_from_multipliers(c.lambda_V, c.lambda_h) == active_from_multipliers(o.lambda_V, o.lambda_h)
    ok = du <= 1e-8 and gap <= 1e-10 and viol <= 1e-12 and matches == n
    return CheckResult("oracle equivalence", ok, f"max|du|={du:.2e} gap={gap:.2e} viol={viol:.2e} match={matches}/{n}")


def check_lse_sandwich(n: int = 200, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(n):
        b = rng.uniform(-0.1, 0.3, rng.integers(1, 200))
        for kappa in (10.0, 100.0, 1000.0):
            lse = lse_barrier(b, kappa)
            worst = max(worst, lse - b.min(), b.min() - math.log(b.size) / kappa - lse)
    return CheckResult("LSE sandwich", worst <= 1e-12, f"worst excess={worst:.2e}")


def check_gradients(n: int = 20, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    model = RobotModel.uniform()
    cfg = SafetyConfig()
    worst = 0.0
    for _ in range(n):
        q = random_state(model, rng)
        target = rng.uniform(-0.1, 0.1, 3) + [0, 0, 0.25]
        obs = random_obstacles(rng, 3)
        worst = max(
            worst,
            relative_error(clf_gradient(model, q, target), central_difference(lambda x: clf_value(model, x, target), q)),
            relative_error(
                lse_barrier_gradient(model, q, 40, obs, cfg),
                central_difference(lambda x: lse_barrier(pairwise_barriers(model, x, 40, obs), cfg.kappa_lse), q),
            ),
            relative_error(
                positional_jacobian(model, q, 0.2),
                central_difference(lambda x: positions(model, x, 0.2)[0], q),
            ),
        )
    return CheckResult("gradients vs finite differences", worst <= 1e-5, f"worst rel err={worst:.2e}")


def integrator_slope(dts=(0.2, 0.1, 0.05, 0.025), T: float = 10.0) -> float:
    """Global-error slope on the pendulum ``x'' = -sin x`` against a dt = 1e-3 reference."""
    def rhs(x):
        return np.array([x[1], -math.sin(x[0])])

    def run(dt):
        x = np.array([2.5, 0.0])
        for _ in range(int(round(T / dt))):
            x = integrate_step_tsit5(rhs, x, dt)
        return x

    ref = run(1e-3)
    errs = [float(np.max(np.abs(run(dt) - ref))) for dt in dts]
    return float(np.polyfit(np.log(dts), np.log(errs), 1)[0])


def check_integrator_order() -> CheckResult:
    s = integrator_slope()
    return CheckResult("Tsit5 order", 4.5 <= s <= 5.5, f"slope={s:.2f}")


def _as_tuple(x):
    return x if isinstance(x, tuple) else (x,)


def check_backends(seed: int = 0) -> CheckResult:
    backends = available_backends()
    if "cython" not in backends:
        return CheckResult("backend equivalence", True, "compiled backend not built; skipped")
    py, cy = backends["python"], backends["cython"]
    rng = np.random.default_rng(seed)
    model = RobotModel.uniform()
    worst = 0.0
    for _ in range(20):
        tw = embed(model, random_state(model, rng))
        s = rng.uniform(0.0, model.total_length, 7)
        args = (tw, model.segment_lengths, model.mount, s)
        for name in ("chain_positions", "chain_jacobians"):
            a, b = getattr(py, name)(*args), getattr(cy, name)(*args)
            for x, y in zip(_as_tuple(a), _as_tuple(b)):
                worst = max(worst, float(np.max(np.abs(np.asarray(x) - np.asarray(y)))))
        r = random_rows(rng)
        a = py.closed_form(r.a_V, r.b_V, r.a_h, r.b_h, 100.0, False)
        b = cy.closed_form(r.a_V, r.b_V, r.a_h, r.b_h, 100.0, False)
        worst = max(worst, float(np.max(np.abs(a[0] - b[0]))))
    return CheckResult("backend equivalence", worst <= 1e-12, f"max abs diff={worst:.2e}")


def check_determinism(steps: int = 10) -> CheckResult:
    sc = load_scenario("setpoint_three_obstacles")
    logs = [
        simulate(sc.robot, sc.layout, sc.initial_state(), sc.dt_s, steps, make_policy(sc), scenario_monitor(sc))
        for _ in range(2)
    ]
    same = all(a == b for a, b in zip(logs[0].rows(), logs[1].rows()))
    return CheckResult("determinism", same, f"{steps}-step run repeated")


ALL_CHECKS = (
    check_oracle_equivalence,
    check_lse_sandwich,
    check_gradients,
    check_integrator_order,
    check_backends,
    check_determinism,
)


def run_all() -> list[CheckResult]:
    return [c() for c in ALL_CHECKS]
