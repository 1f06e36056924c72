import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from soft_cbf.closed_loop import Monitor, simulate, steps_for
from soft_cbf.sim import (
    CircleTask,
    SetpointTask,
    bundled_scenarios,
    circular_reference,
    load_scenario,
    make_policy,
    run_scenario,
    scenario_from_dict,
    scenario_to_dict,
    tracking_rmse,
)
from soft_cbf.trajlog import LOG_SCHEMA_VERSION, TrajectoryLog, log_columns, read_csv

GOLDEN = Path(__file__).parent / "golden" / "setpoint_three_obstacles_10_steps.csv"


def test_circular_reference():
    c = CircleTask([0, 0, 0.3], 0.06, 3.0)
    assert np.allclose(circular_reference(c, 0.0), [0.06, 0, 0.3])
    assert np.allclose(circular_reference(c, 20.0), circular_reference(c, 0.0), atol=1e-12)
    slow = CircleTask([0, 0, 0.3], 0.06, 1.5)
    assert np.allclose(circular_reference(slow, 5.0), circular_reference(c, 2.5), atol=1e-15)
    assert np.allclose(circular_reference(c, 5.0), [0, 0.06, 0.3], atol=1e-15)


def test_tracking_rmse():
    log = TrajectoryLog(["a"], 1)
    for t in np.linspace(0, 1, 11):
        log.append(t, [0.0], [t, 0, 0], [0.0], 0.0)
    assert tracking_rmse(log, lambda t: np.array([t, 0, 0])) == 0.0
    assert tracking_rmse(log, lambda t: np.array([t, 0.003, 0.004])) == pytest.approx(0.005)
    with pytest.raises(ValueError):
        tracking_rmse(TrajectoryLog(["a"], 1), lambda t: np.zeros(3))


def test_steps_for():
    assert steps_for(20.0, 1e-3) == 20000
    with pytest.raises(ValueError):
        steps_for(1.0, 0.0)


def test_zero_duration_gives_initial_record():
    log = run_scenario(load_scenario("setpoint_three_obstacles").replace(duration_s=0.0))
    assert len(log) == 1 and log.t == [0.0]
    assert np.array_equal(log.q[0], np.zeros(12))


def test_log_schema_golden(tmp_path):
    sc = load_scenario("setpoint_three_obstacles").replace(duration_s=0.01)
    log = run_scenario(sc)
    path = log.write_csv(tmp_path / "run.csv")
    header, data, active = read_csv(path)
    g_header, g_data, g_active = read_csv(GOLDEN)
    assert header == g_header == log_columns(sc.robot.q_labels(), 6)
    assert header[:2] == ["t", "kx1"] and header[-7:] == [
        "V", "b_lse", "b_min", "lambda_V", "lambda_h", "delta", "active_set"
    ]
    assert data.shape == g_data.shape == (11, len(header) - 1)
    assert active == g_active
    assert np.allclose(data, g_data, rtol=1e-9, atol=1e-13)
    assert LOG_SCHEMA_VERSION == 1


def test_determinism():
    sc = load_scenario("setpoint_three_obstacles").replace(duration_s=0.02)
    a, b = run_scenario(sc), run_scenario(sc)
    assert list(a.rows()) == list(b.rows())


def test_summary_contents():
    log = run_scenario(load_scenario("setpoint_three_obstacles").replace(duration_s=0.005))
    s = log.summary()
    assert s["schema_version"] == LOG_SCHEMA_VERSION and s["records"] == 6
    assert s["controller"] == "closed-form" and s["total_solve_seconds"] > 0


def test_yaml_round_trip():
    for name in bundled_scenarios():
        sc = load_scenario(name)
        d = scenario_to_dict(sc)
        again = scenario_from_dict(yaml.safe_load(yaml.safe_dump(d)))
        assert scenario_to_dict(again) == d


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    assert {"setpoint_three_obstacles", "setpoint_rrt_baseline", "circle_3rpm_inside",
            "circle_1p5rpm_outside", "free_setpoint", "blocked_target"} <= set(names)
    circle = load_scenario("circle_3rpm_inside")
    assert circle.safety.hard and circle.u_clip == 0.02 and circle.robot.n_q == 8
    assert isinstance(circle.task, CircleTask) and circle.duration_s == pytest.approx(20.0)


CIRCLES = ("circle_3rpm_inside", "circle_3rpm_outside", "circle_1p5rpm_inside", "circle_1p5rpm_outside")


@pytest.mark.parametrize("name", CIRCLES)
def test_circle_scenes_start_on_reference_and_certified(name):
    from soft_cbf.safety import clf_value, lse_barrier, pairwise_barriers

    sc = load_scenario(name)
    q0 = sc.initial_state()
    assert clf_value(sc.robot, q0, sc.task.reference(0.0)) < 1e-12
    b0 = pairwise_barriers(sc.robot, q0, sc.n_res, sc.obstacles)
    assert lse_barrier(b0, sc.safety.kappa_lse) >= 0


@pytest.mark.slow
def test_clipping_voids_the_barrier_guarantee():
    # first obstacle passage of the slow inside circle: the unclipped law keeps
    # b_lse >= 0, the element-wise clamp at 0.02 m/s does not
    sc = load_scenario("circle_1p5rpm_inside").replace(duration_s=12.0)
    free = run_scenario(sc.replace(u_clip=math.inf))
    assert np.nanmin(free.array("b_lse")) >= -1e-4
    assert np.nanmin(free.array("b_min")) >= -1e-4
    clipped = run_scenario(sc)
    assert np.max(np.abs(np.array(clipped.u))) <= 0.02
    assert np.nanmin(clipped.array("b_min")) < -1e-3


def test_unknown_controller():
    with pytest.raises(ValueError):
        load_scenario("free_setpoint").replace(controller="mpc")


def test_free_setpoint_clf_monotone():
    log = run_scenario(load_scenario("free_setpoint"))
    V = log.array("V")
    assert np.all(np.diff(V) <= 1e-9)
    assert V[-1] < 0.05 * V[0]


def test_clf_only_violates_barrier():
    from soft_cbf.safety import lse_barrier, pairwise_barriers

    sc = load_scenario("blocked_target")
    # the start lies inside the certified set, so the safety filter applies
    b0 = pairwise_barriers(sc.robot, sc.initial_state(), sc.n_res, sc.obstacles)
    assert lse_barrier(b0, sc.safety.kappa_lse) >= 0
    log = run_scenario(sc)
    assert np.nanmin(log.array("b_min")) < 0
    # the safety filter on the same scene keeps the barrier
    safe = run_scenario(sc.replace(controller="closed-form"))
    assert np.nanmin(safe.array("b_min")) >= -1e-4
    assert np.min(safe.array("b_lse")) >= -1e-4


def test_qp_controller_matches_closed_form_briefly():
    sc = load_scenario("setpoint_three_obstacles").replace(duration_s=0.01)
    a = run_scenario(sc)
    b = run_scenario(sc.replace(controller="qp"))
    assert np.allclose(np.array(a.u), np.array(b.u), atol=1e-8)


def test_qp_fallback_holds_still(monkeypatch):
    import soft_cbf.sim as sim
    from soft_cbf.qp import MAX_ITER, QPSolution

    real = sim.solve_clf_cbf_qp

    def failing(rows, w, return_qp=False):
        sol, qs = real(rows, w, return_qp=True)
        return sol, QPSolution(qs.z_star, qs.duals, 50, MAX_ITER)

    monkeypatch.setattr(sim, "solve_clf_cbf_qp", failing)
    sc = load_scenario("setpoint_three_obstacles").replace(duration_s=0.002, controller="qp")
    log = run_scenario(sc)
    assert all(a == f"fallback:{MAX_ITER}" for a in log.active_set)
    assert np.array_equal(np.array(log.u), np.zeros((3, 6)))


def test_partial_log_on_error():
    sc = load_scenario("free_setpoint")
    inner = make_policy(sc)

    def policy(t, q):
        if t > 0.0025:
            raise RuntimeError("boom")
        return inner(t, q)

    with pytest.raises(RuntimeError) as ei:
        simulate(sc.robot, sc.layout, sc.initial_state(), 1e-3, 10, policy, Monitor(sc.task.reference))
    assert len(ei.value.partial_log) == 3


def test_setpoint_task():
    assert np.array_equal(SetpointTask([1, 2, 3]).reference(5.0), [1, 2, 3])
