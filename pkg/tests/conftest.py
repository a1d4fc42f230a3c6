import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bykov_atlas.model import REFERENCE_PARAMS, validate_params

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def fig():
    return REFERENCE_PARAMS


def make(alpha1=1.0, C1=1.0, alpha2=1.0, E2=1.0, a=2.0):
    return validate_params(alpha1, C1, 2 * C1, alpha2, E2, 2 * E2, a=a)


def random_valid_point(rng, params, y_lo=1e-8):
    """(x, y) in In(sigma1) whose image stays in Out(sigma2)."""
    from bykov_atlas.maps import WallPoint, shear_factor

    while True:
        x = rng.uniform(-math.pi, math.pi)
        y = math.exp(rng.uniform(math.log(y_lo), 0.0))
        phi = x - params.g1 * math.log(y)
        if y * shear_factor(phi, params.a) <= 1.0:
            return WallPoint(x, y)
