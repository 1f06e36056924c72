import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from soft_cbf.kinematics import RobotModel
from soft_cbf.tendons import TendonLayout

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_state(model, rng, kappa=10.0, strain=0.1):
    """Curvatures ~ U(-kappa, kappa), linear strains ~ U(-strain, strain)."""
    scale = np.where(model.active_columns % 6 < 3, kappa, strain)
    return rng.uniform(-1.0, 1.0, model.n_q) * scale


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def model():
    return RobotModel.uniform()


@pytest.fixture
def local_model():
    return RobotModel.uniform(mount=np.eye(4))


@pytest.fixture
def layout():
    return TendonLayout.symmetric()


# -- acceptance report: one PASS/FAIL line per criterion ---------------------

_ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """``criterion(n, title, ok, detail)`` records the line, prints it, then asserts ``ok``."""

    def record(n, title, ok, detail):
        line = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
