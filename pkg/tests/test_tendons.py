import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_state
from soft_cbf.errors import DegenerateTangentError
from soft_cbf.kinematics import NO_SHEAR_MASK, RobotModel
from soft_cbf.tendons import (
    TendonLayout,
    actuation_matrices,
    actuation_rhs,
    local_actuation_map,
    tendon_jacobian,
    tendon_lengths,
    tendon_tangent,
    truncated_pinv,
)

R = 0.025


def brute_lengths(model, layout, q, n=4000):
    """Arc length of each tendon path by dense polyline integration."""
    from soft_cbf.kinematics import embed
    from soft_cbf.se3 import exp_se3

    tw = embed(model, q)
    out = []
    for d, term in zip(layout.offsets(), layout.termination):
        total = 0.0
        for i in range(term + 1):
            Li = model.segment_lengths[i]
            pts = [exp_se3(tw[i], s).rotation @ d + exp_se3(tw[i], s).translation
                   for s in np.linspace(0, Li, n)]
            total += np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))
        out.append(total)
    return np.array(out)


def test_straight_tangent_is_axis():
    for d in ([0, R, 0], [0, 0, -R], [0.0, 0.01, 0.02]):
        assert np.allclose(tendon_tangent([0, 0, 0, 1, 0, 0], d), [1, 0, 0])


def test_bent_tangent_example():
    t = tendon_tangent([0, 0, 1, 1, 0, 0], [0, R, 0])
    assert np.allclose(t, [1, 0, 0])


@given(arrays(np.float64, 6, elements=st.floats(-10, 10)), st.floats(0, 2 * np.pi))
def test_tangent_unit_norm(xi, phi):
    xi = xi.copy()
    xi[3] += 1.0
    d = R * np.array([0, np.cos(phi), np.sin(phi)])
    x = np.cross(xi[:3], d) + xi[3:]
    if np.linalg.norm(x) < 1e-6:
        return
    assert abs(np.linalg.norm(tendon_tangent(xi, d)) - 1) < 1e-12


def test_degenerate_tangent_raises():
    with pytest.raises(DegenerateTangentError):
        tendon_tangent(np.zeros(6), [0, R, 0])


@pytest.mark.parametrize("phi", np.linspace(0, 2 * np.pi, 7))
def test_straight_actuation_map(phi):
    d = [0, R * np.cos(phi), R * np.sin(phi)]
    th = local_actuation_map([0, 0, 0, 1, 0, 0], d)
    assert np.allclose(th, [0, R * np.sin(phi), -R * np.cos(phi), 1, 0, 0], atol=1e-15)
    th_neg = local_actuation_map([0, 0, 0, 1, 0, 0], -np.asarray(d))
    assert np.allclose(th_neg[:3], -th[:3]) and np.allclose(th_neg[3:], th[3:])


def test_actuation_map_norm_bound(rng):
    for _ in range(100):
        xi = rng.normal(size=6)
        xi[3] += 1
        d = np.array([0, *rng.normal(size=2) * R])
        th = local_actuation_map(xi, d)
        assert th @ th <= d @ d + 1 + 1e-12


def test_symmetric_layout():
    lay = TendonLayout.symmetric()
    assert lay.count == 6
    assert np.array_equal(lay.termination, [0, 0, 0, 1, 1, 1])
    assert np.allclose(np.linalg.norm(lay.offsets(), axis=1), R)
    assert np.all(lay.offsets()[:, 0] == 0)


def test_straight_lengths(model, layout):
    assert np.allclose(tendon_lengths(model, layout, model.zero()), [0.15] * 3 + [0.3] * 3, atol=1e-15)


def test_bend_shortens_the_inner_tendon(local_model):
    # tendon at +y; bending about z with positive curvature turns toward +y
    lay = TendonLayout([0.0, np.pi], [0, 0])  # offsets (0, R, 0) and (0, -R, 0)
    q = local_model.zero()
    q[2] = 1.0
    ell = tendon_lengths(local_model, lay, q)
    assert ell[0] < 0.15 < ell[1]
    assert np.allclose(ell, 0.15 * (1 + np.array([-R, R])))


def test_lengths_match_dense_polyline(model, layout, rng):
    for _ in range(3):
        q = random_state(model, rng)
        assert np.allclose(tendon_lengths(model, layout, q), brute_lengths(model, layout, q), rtol=1e-6)


def test_straight_jacobian_rows(model, layout):
    J = tendon_jacobian(model, layout, model.zero())
    for j, (phi, term) in enumerate(zip(layout.angles, layout.termination)):
        row = 0.15 * np.array([0, R * np.sin(phi), -R * np.cos(phi), 1, 0, 0])
        for i in range(2):
            expect = row if i <= term else np.zeros(6)
            assert np.allclose(J[j, 6 * i: 6 * i + 6], expect, atol=1e-15)


def test_jacobian_matches_finite_differences(model, layout, rng):
    # Theta is the exact gradient of |kappa x d + sigma|, so the chain formula is exact
    worst = 0.0
    h = 1e-6
    for _ in range(100):
        q = random_state(model, rng)
        J = tendon_jacobian(model, layout, q)
        Jfd = np.column_stack([
            (tendon_lengths(model, layout, q + h * e) - tendon_lengths(model, layout, q - h * e)) / (2 * h)
            for e in np.eye(model.n_q)
        ])
        worst = max(worst, np.linalg.norm(J - Jfd) / np.linalg.norm(Jfd))
    assert worst < 1e-7


def test_masked_jacobian_selects_columns(layout, rng):
    full = RobotModel.uniform()
    ns = RobotModel.uniform(active_mask=NO_SHEAR_MASK)
    q = random_state(ns, rng)
    qf = np.zeros(12)
    qf[ns.active_columns] = q
    assert np.allclose(tendon_jacobian(ns, layout, q), tendon_jacobian(full, layout, qf)[:, ns.active_columns])


def test_moore_penrose_identities(model, layout, rng):
    for _ in range(100):
        act = actuation_matrices(model, layout, random_state(model, rng))
        J, P = act.jacobian, act.pseudoinverse
        assert np.allclose(J @ P @ J, J, atol=1e-8)
        assert np.allclose(P @ J @ P, P, atol=1e-8)
        assert np.array_equal(act.actuation_matrix, J.T)
        assert act.rank == 6


def test_actuation_rhs_minimum_norm(model, layout, rng):
    q = random_state(model, rng)
    assert np.array_equal(actuation_rhs(model, layout, q, np.zeros(6)), np.zeros(12))
    J = tendon_jacobian(model, layout, q)
    v = rng.normal(size=12)
    u = J @ v
    qd = actuation_rhs(model, layout, q, u)
    assert np.allclose(J @ qd, u, atol=1e-8)
    assert np.linalg.norm(qd) <= np.linalg.norm(v) + 1e-12


def test_truncated_pinv_rank_deficient_warns():
    J = np.array([[1.0, 0.0], [1.0, 1e-12]])
    with pytest.warns(RuntimeWarning):
        P, sv, rank = truncated_pinv(J)
    assert rank == 1
    assert np.all(np.isfinite(P))


def test_layout_validation(model):
    with pytest.raises(ValueError):
        TendonLayout([0.0, 1.0], [0])
    with pytest.raises(ValueError):
        tendon_lengths(model, TendonLayout([0.0], [2]), model.zero())
    with pytest.raises(ValueError):
        actuation_rhs(model, TendonLayout.symmetric(), model.zero(), [np.nan] * 6)
