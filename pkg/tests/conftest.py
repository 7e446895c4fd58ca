import pytest

from popbandit import ModelConfig

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def two_arm_config():
    """Two arms, alpha = 1, mu = (0.5, 0.3), theta = (1, 1), T = 3e4."""
    return ModelConfig((0.5, 0.3), (1, 1), alpha=1.0, horizon=30_000)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
