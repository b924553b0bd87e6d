import pytest

from semibvm.dgp import TruthConfig, build_truth

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def smooth_truth():
    return build_truth(TruthConfig(alpha=1.0, beta=1.0, seed_a=7, seed_b=7, seed_f=7))


@pytest.fixture(scope="session")
def default_truth():
    return build_truth(TruthConfig())


@pytest.fixture
def record_criterion():
    """Record one acceptance line; all lines are printed in the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE.append((number, title, passed, detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
