import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from reflectlab.fermi import build_fermi_chart
from reflectlab.isometries import GeodesicSpec, initial_data
from reflectlab.metrics import make_manifold
from reflectlab.pipeline import default_normal

settings.register_profile(
    "reflectlab", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("reflectlab")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def vertical_fermi(name, eps, point=(0.0, 0.0, 0.0)):
    chart = make_manifold(name)
    p, T = initial_data(chart, GeodesicSpec("vertical", point))
    return build_fermi_chart(chart, p, default_normal(chart, p, T), eps, tangent=T)


@pytest.fixture(scope="session")
def fermi_nil3():
    return vertical_fermi("nil3", 0.3)


@pytest.fixture(scope="session")
def fermi_h2xr():
    return vertical_fermi("h2xr", 0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
