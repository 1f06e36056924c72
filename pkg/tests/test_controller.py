import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from soft_cbf.controller import (
    HARD,
    RELAXED,
    control_step,
    gram_entries,
    kkt_residuals,
    solve_closed_form,
)
from soft_cbf.qp import solve_clf_cbf_qp
from soft_cbf.safety import ConstraintRows, SafetyConfig, assemble_rows
from soft_cbf.sim import load_scenario

vec = arrays(np.float64, 6, elements=st.floats(-3, 3))
scalar = st.floats(-3, 3)


def rows_strategy():
    return st.builds(
        lambda aV, bV, ah, bh: ConstraintRows(aV, abs(bV), ah, bh), vec, scalar, vec, scalar
    )


def solvable(rows):
    # a violated barrier whose gradient has zero squared norm (exactly zero, or
    # subnormal so that ||a_h||^2 underflows) has no finite solution (raises)
    return not (rows.b_h < 0 and gram_entries(rows)[2] == 0.0)


def test_gram_entries(rng):
    r = ConstraintRows([1, 0, 0], 0, [0, 2, 0], 0)
    assert gram_entries(r) == (1.0, 0.0, 4.0)
    a = rng.normal(size=6)
    G11, G12, G22 = gram_entries(ConstraintRows(a, 0, a, 0))
    assert G12**2 == pytest.approx(G11 * G22)


def test_nothing_to_do():
    sol = solve_closed_form(ConstraintRows([0, 0], 0.4, [1, 0], 0.2), 100.0)
    assert np.array_equal(sol.u_star, [0, 0]) and sol.lambda_h == 0
    sol = solve_closed_form(ConstraintRows([0, 0], 0.0, [1, 0], 0.2), 100.0)
    assert sol.active_set == "none"


def test_clf_only_example():
    rows = ConstraintRows([1, 0], 0.5, [0, 1], 0.3)
    sol = solve_closed_form(rows, 100.0)
    assert sol.active_set == "clf-only" and sol.mode == RELAXED
    assert sol.lambda_V == pytest.approx(2 * 0.5 / 1.01, abs=1e-12)
    assert np.allclose(sol.u_star, [-0.5 / 1.01, 0], atol=1e-12)
    assert sol.delta_star == pytest.approx(0.5 / 1.01 / 100, abs=1e-12)
    assert float(rows.a_h @ sol.u_star) + rows.b_h == pytest.approx(0.3)


@pytest.mark.parametrize("w", [1.0, 100.0])
def test_cbf_forced_example(w):
    rows = ConstraintRows([1, 0], 0.0, [1, 0], -0.2)
    c = solve_closed_form(rows, w)
    o = solve_clf_cbf_qp(rows, w)
    assert np.allclose(c.u_star, o.u_star, atol=1e-9)
    assert c.u_star[0] == pytest.approx(0.2, abs=1e-12)
    # without the slack the two rows contradict each other
    assert solve_closed_form(rows, math.inf).infeasible


@given(rows_strategy(), st.sampled_from([1.0, 100.0, math.inf]))
def test_kkt_certificate(rows, w):
    assume(solvable(rows))
    sol = solve_closed_form(rows, w)
    if sol.infeasible:
        return
    res = kkt_residuals(rows, sol)
    scale = 1 + np.linalg.norm(rows.a_V) + np.linalg.norm(rows.a_h)
    assert res["stationarity"] <= 1e-10 * scale
    assert res["clf_violation"] <= 1e-12 * scale and res["cbf_violation"] <= 1e-12 * scale
    assert sol.lambda_V >= 0 and sol.lambda_h >= 0


@given(rows_strategy(), st.sampled_from([1.0, 100.0, math.inf]))
def test_matches_oracle(rows, w):
    assume(solvable(rows))
    c = solve_closed_form(rows, w)
    o = solve_clf_cbf_qp(rows, w)
    if c.infeasible:
        return
    gap = abs(c.objective(w) - o.objective(w))
    assert gap <= 1e-9 * (1 + c.objective(w))
    # strong convexity: |du|^2 <= objective gap, so on degenerate vertices the
    # interior-point iterate is only sqrt(tol)-accurate in u
    assert np.max(np.abs(c.u_star - o.u_star)) <= 1e-6


def test_oracle_agreement_on_random_instances(rng):
    for _ in range(200):
        r = ConstraintRows(rng.normal(size=6), abs(rng.normal()), rng.normal(size=6), rng.normal())
        c, o = solve_closed_form(r, math.inf), solve_clf_cbf_qp(r, math.inf)
        assert np.max(np.abs(c.u_star - o.u_star)) <= 1e-8
        assert c.active_set == o.active_set


def test_continuity_across_active_set_boundary(rng):
    aV, ah = rng.normal(size=6), rng.normal(size=6)
    path = np.linspace(-2.0, 2.0, 4001)
    us = np.array([solve_closed_form(ConstraintRows(aV, 0.5, ah, bh), 100.0).u_star for bh in path])
    sets = {solve_closed_form(ConstraintRows(aV, 0.5, ah, bh), 100.0).active_set for bh in path}
    assert len(sets) >= 2
    jumps = np.max(np.abs(np.diff(us, axis=0)), axis=1)
    assert jumps.max() <= 10 * (path[1] - path[0]) * (1 + np.linalg.norm(ah))


def test_hard_mode_conflict_prioritizes_cbf():
    a = np.array([1.0, 0.0])
    rows = ConstraintRows(a, 0.5, a, -0.2)  # u1 <= -0.5 and u1 >= 0.2
    hard = solve_closed_form(rows, math.inf)
    assert hard.mode == HARD and hard.infeasible
    assert float(a @ hard.u_star) - 0.2 >= -1e-12
    relaxed_c = solve_closed_form(rows, 100.0)
    relaxed_o = solve_clf_cbf_qp(rows, 100.0)
    assert np.allclose(relaxed_c.u_star, relaxed_o.u_star, atol=1e-9)


def test_non_finite_rows_rejected():
    with pytest.raises(ValueError):
        solve_closed_form(ConstraintRows([np.nan, 0], 0, [1, 0], 0))
    with pytest.raises(ValueError):
        solve_closed_form(ConstraintRows([1, 0], 0, [1, 0], 0), 1.0, mode="bogus")


def test_infinite_cbf_offset_means_clf_only():
    sol = solve_closed_form(ConstraintRows([1, 0], 0.5, [0, 0], math.inf), 100.0)
    assert sol.active_set == "clf-only"


def test_control_step_equilibrium_and_clip(model, layout):
    sc = load_scenario("circle_3rpm_inside")
    u = control_step(sc.robot, sc.layout, sc.initial_state(), sc.task.reference(0), sc.obstacles,
                     sc.safety, sc.n_res, sc.u_clip)
    assert np.max(np.abs(u)) <= 0.02 + 1e-15
    tip = np.array([0, 0, 0.3])
    u0 = control_step(model, layout, model.zero(), tip, (), SafetyConfig(), 40)
    assert np.allclose(u0, 0)


def test_far_target_pursuit(model, layout):
    cfg = SafetyConfig()
    target = [0.1, 0.1, 0.2]
    u, sol, ev = control_step(model, layout, model.zero(), target, (), cfg, 40, return_info=True)
    cos = -u @ ev.rows.a_V / (np.linalg.norm(u) * np.linalg.norm(ev.rows.a_V))
    assert cos == pytest.approx(1.0, abs=1e-12)
    assert sol.active_set == "clf-only"


def test_scene_rows_solve(model, layout):
    sc = load_scenario("setpoint_three_obstacles")
    rows = assemble_rows(model, layout, model.zero(), sc.task.target, sc.obstacles, sc.safety, 40)
    sol = solve_closed_form(rows, sc.safety.w_clf)
    assert float(rows.a_h @ sol.u_star) + rows.b_h >= -1e-12


def test_violated_barrier_without_authority_raises():
    from soft_cbf.errors import InfeasibleCBFError

    with pytest.raises(InfeasibleCBFError):
        solve_closed_form(ConstraintRows([1, 0], 0.1, [0, 0], -0.5), 100.0)
