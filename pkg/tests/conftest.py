import numpy as np
import pytest

import acceptance_log
from covroc.io import StudyDataset
from covroc.simulation import generate_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def small_dataset(rng):
    n_f, n_g = 40, 50
    x_f = rng.uniform(0, 1, n_f)
    x_g = rng.uniform(0, 1, n_g)
    return StudyDataset.from_arrays(
        x_f, 1.0 + x_f + rng.normal(size=n_f), x_g, x_g + rng.normal(size=n_g)
    )


@pytest.fixture(scope="session")
def scenario_c_500():
    return generate_scenario("C", 500, 500, seed=7)


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
