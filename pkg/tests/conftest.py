import pytest

from analog_dqc.config import load_problem
from analog_dqc.pipeline import RunSettings, run_pipeline


@pytest.fixture(scope="session")
def benchmark_problem():
    return load_problem("benchmark")


@pytest.fixture(scope="session")
def exact_result(benchmark_problem):
    return run_pipeline(benchmark_problem, RunSettings())


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
