import pytest

from chemotaxis_lab.params import Params

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def base_params() -> Params:
    return Params(
        d1=1, d2=1, d3=1, chi1=0.5, chi2=0.5,
        a0=1, a1=1, a2=0.5, a3=0, a4=0,
        b0=1, b1=0.5, b2=1, b3=0, b4=0,
        lam=1, k=1, l=1,
    )


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
