import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_state
from soft_cbf._backend import BACKEND, available_backends
from soft_cbf.bench import random_rows
from soft_cbf.errors import DegenerateTangentError, InfeasibleCBFError
from soft_cbf.kinematics import RobotModel, embed
from soft_cbf.tendons import TendonLayout

backends = available_backends()
needs_cython = pytest.mark.skipif("cython" not in backends, reason="compiled backend not built")


def test_python_backend_always_available():
    assert "python" in backends
    assert BACKEND in backends


def test_env_var_forces_python():
    code = "from soft_cbf._backend import BACKEND; print(BACKEND)"
    env = dict(os.environ, SOFT_CBF_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def _close(a, b, tol):
    if isinstance(a, tuple):
        return all(_close(x, y, tol) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), atol=tol, rtol=0)


@needs_cython
def test_kinematic_kernels_agree(rng):
    py, cy = backends["python"], backends["cython"]
    for _ in range(50):
        m = RobotModel(rng.uniform(0.05, 0.2, rng.integers(1, 4)))
        tw = embed(m, random_state(m, rng, kappa=12))
        s = np.sort(rng.uniform(1e-4, m.total_length, 9))
        args = (tw, m.segment_lengths, m.mount, s)
        for name in ("chain_poses", "chain_positions", "chain_jacobians"):
            assert _close(getattr(py, name)(*args), getattr(cy, name)(*args), 1e-13), name
        centers = rng.uniform(-0.2, 0.3, (3, 3))
        radii = rng.uniform(0.01, 0.03, 3)
        a = py.min_pair_barrier(*args, 0.036, centers, radii, 0.01)
        b = cy.min_pair_barrier(*args, 0.036, centers, radii, 0.01)
        assert a == pytest.approx(b, abs=1e-14)


@needs_cython
def test_tendon_kernel_agrees(rng):
    py, cy = backends["python"], backends["cython"]
    m = RobotModel.uniform()
    lay = TendonLayout.symmetric(group_offset=np.pi / 3)
    for _ in range(50):
        tw = embed(m, random_state(m, rng))
        a = py.tendon_kinematics(tw, m.segment_lengths, lay.offsets(), lay.termination)
        b = cy.tendon_kinematics(tw, m.segment_lengths, lay.offsets(), lay.termination)
        assert _close(a, b, 1e-14)
    tw = np.zeros((2, 6))
    for k in (py, cy):
        with pytest.raises(DegenerateTangentError):
            k.tendon_kinematics(tw, m.segment_lengths, lay.offsets(), lay.termination)


@needs_cython
@pytest.mark.parametrize("w,hard", [(1.0, False), (100.0, False), (1.0, True)])
def test_closed_form_kernel_agrees(rng, w, hard):
    py, cy = backends["python"], backends["cython"]
    codes = set()
    for _ in range(500):
        r = random_rows(rng)
        a = py.closed_form(r.a_V, r.b_V, r.a_h, r.b_h, w, hard)
        b = cy.closed_form(r.a_V, r.b_V, r.a_h, r.b_h, w, hard)
        assert np.allclose(a[0], b[0], atol=1e-13)
        assert a[1:3] == pytest.approx(b[1:3], abs=1e-12) and a[4:] == b[4:]
        codes.add(a[4])
    assert len(codes) >= 3


@needs_cython
def test_closed_form_errors_agree():
    for k in (backends["python"], backends["cython"]):
        with pytest.raises(ValueError):
            k.closed_form(np.array([np.inf, 0.0]), 0.0, np.zeros(2), 0.0, 1.0, False)
        with pytest.raises(ValueError):
            k.closed_form(np.zeros(2), 0.0, np.zeros(3), 0.0, 1.0, False)
        with pytest.raises(InfeasibleCBFError):
            k.closed_form(np.ones(2), 0.1, np.zeros(2), -0.5, 1.0, False)
