import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bpstereo.core import LightingConfig
from bpstereo.synth import SphereScene, render_sphere, tilted_lights

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def axis_lighting():
    return LightingConfig.from_directions(np.eye(3))


@pytest.fixture
def five_lights():
    return LightingConfig.from_directions(tilted_lights())


@pytest.fixture(scope="session")
def small_sphere():
    return render_sphere(SphereScene(image_size=48, seed=3))


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_log.LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
