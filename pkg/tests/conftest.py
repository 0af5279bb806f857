import pytest

from tvude import ModelSpec, TimeSeries, bundled_dataset

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def alcohol():
    return bundled_dataset("alcohol").series


@pytest.fixture(scope="session")
def covid():
    return bundled_dataset("covid").series


@pytest.fixture(scope="session")
def alcohol_model():
    return ModelSpec.scaled_affine(0.7, 0.2)


@pytest.fixture
def series():
    def make(t, x):
        return TimeSeries(t, x)

    return make


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
