import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm

from soft_cbf.se3 import (
    TAYLOR_EPS,
    Pose,
    exp_se3,
    hat6,
    log_se3,
    log_so3,
    right_jacobian,
    tilde3,
    twist,
    vee3,
)

vec3 = arrays(np.float64, 3, elements=st.floats(-5, 5))
vec6 = arrays(np.float64, 6, elements=st.floats(-5, 5))


def test_tilde3_examples():
    assert np.array_equal(tilde3([0, 0, 0]), np.zeros((3, 3)))
    assert np.array_equal(tilde3([1, 0, 0]), [[0, 0, 0], [0, 0, -1], [0, 1, 0]])


@given(vec3, vec3)
def test_tilde3_is_cross_product(a, b):
    assert np.allclose(tilde3(a) @ b, np.cross(a, b), atol=1e-12)
    assert np.allclose(tilde3(a) @ a, 0.0, atol=1e-12)
    assert np.array_equal(vee3(tilde3(a)), a)


def test_hat6_block_layout():
    assert np.array_equal(hat6(np.zeros(6)), np.zeros((4, 4)))
    H = hat6(twist([0, 0, 1], [1, 0, 0]))
    assert np.array_equal(H[:3, :3], tilde3([0, 0, 1]))
    assert np.array_equal(H[:3, 3], [1, 0, 0])
    assert np.array_equal(H[3], np.zeros(4))


@given(vec6, vec6, st.floats(-3, 3), st.floats(-3, 3))
def test_hat6_linear(x1, x2, a, b):
    assert np.allclose(hat6(a * x1 + b * x2), a * hat6(x1) + b * hat6(x2), atol=1e-12)


def test_pure_axial_translation():
    T = exp_se3([0, 0, 0, 1, 0, 0], 0.3)
    assert np.allclose(T.rotation, np.eye(3))
    assert np.allclose(T.translation, [0.3, 0, 0])


@pytest.mark.parametrize("kz,s", [(1.0, 0.3), (7.5, 0.15), (-12.0, 0.2)])
def test_constant_curvature_arc(kz, s):
    T = exp_se3([0, 0, kz, 1, 0, 0], s)
    arc = [np.sin(kz * s) / kz, (1 - np.cos(kz * s)) / kz, 0.0]
    assert np.allclose(T.translation, arc, atol=1e-14)
    assert np.allclose(T.matrix, expm(s * hat6([0, 0, kz, 1, 0, 0])), atol=1e-13)


def test_matches_dense_expm_on_random_twists(rng):
    worst = 0.0
    for _ in range(1000):
        xi = rng.normal(size=6) * [3, 3, 3, 1, 1, 1]
        s = rng.uniform(0, 1)
        ref = expm(s * hat6(xi))
        worst = max(worst, np.linalg.norm(exp_se3(xi, s).matrix - ref) / np.linalg.norm(ref))
    assert worst < 1e-10


@given(vec6, st.floats(0, 2), st.floats(0, 2))
def test_one_parameter_group(xi, s1, s2):
    lhs = (exp_se3(xi, s1) @ exp_se3(xi, s2)).matrix
    assert np.allclose(lhs, exp_se3(xi, s1 + s2).matrix, atol=1e-9)


@given(vec6, st.floats(0, 3))
def test_rotation_orthonormal(xi, s):
    assert exp_se3(xi, s).is_valid(1e-10)


def test_taylor_branch_agrees_with_rodrigues(rng):
    for theta in np.geomspace(TAYLOR_EPS / 2, 2 * TAYLOR_EPS, 25):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        xi = np.concatenate([theta * axis, rng.normal(size=3)])
        ref = expm(hat6(xi))
        assert np.allclose(exp_se3(xi).matrix, ref, atol=1e-9, rtol=0)


def test_log_identity():
    assert np.array_equal(log_se3(Pose.identity()), np.zeros(6))


def test_log_exp_round_trip(rng):
    worst = 0.0
    for _ in range(1000):
        w = rng.normal(size=3)
        w *= rng.uniform(0, np.pi * 0.999) / np.linalg.norm(w)
        xi = np.concatenate([w, rng.normal(size=3)])
        worst = max(worst, np.max(np.abs(log_se3(exp_se3(xi)) - xi)))
    assert worst < 1e-9


def test_exp_log_round_trip(rng):
    for _ in range(200):
        xi = rng.normal(size=6) * [2, 2, 2, 1, 1, 1]
        T = exp_se3(xi)
        assert np.allclose(exp_se3(log_se3(T)).matrix, T.matrix, atol=1e-9)


def test_log_near_pi_branch():
    R = exp_se3([np.pi - 1e-9, 0, 0, 0, 0, 0]).rotation
    w, branch = log_so3(R)
    assert branch == "pi"
    assert np.allclose(np.abs(w), [np.pi - 1e-9, 0, 0], atol=1e-6)


def test_right_jacobian_matches_finite_differences(rng):
    for _ in range(30):
        W = rng.normal(size=6) * [1.5, 1.5, 1.5, 0.5, 0.5, 0.5]
        T0 = exp_se3(W).matrix
        Tr = right_jacobian(W)
        h = 1e-6
        for k in range(6):
            e = np.zeros(6)
            e[k] = h
            dT = (exp_se3(W + e).matrix - exp_se3(W - e).matrix) / (2 * h)
            # T^-1 dT = hat(T(W) e_k)
            col = np.linalg.solve(T0, dT)
            assert np.allclose(col, hat6(Tr[:, k]), atol=1e-7)


def test_right_jacobian_series_branch_continuous(rng):
    W = rng.normal(size=6)
    W[:3] *= 1e-2 / np.linalg.norm(W[:3])
    a = right_jacobian(W * (1 - 1e-9))
    b = right_jacobian(W * (1 + 1e-9))
    assert np.allclose(a, b, atol=1e-12)


def test_twist_shape_validation():
    with pytest.raises(ValueError):
        hat6(np.zeros(5))
    with pytest.raises(ValueError):
        exp_se3(np.zeros(6), -1.0)
