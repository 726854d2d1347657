import pytest

from gradsing.params import new_ball_params, new_exterior_params


@pytest.fixture(scope="session")
def ball():
    return new_ball_params(3, "7/4")


@pytest.fixture(scope="session")
def ext():
    return new_exterior_params(3, "7/4", 0.1)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
