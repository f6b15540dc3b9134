import pytest


_ACCEPTANCE = []


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    return request.param


@pytest.fixture
def acceptance_log():
    def log(criterion, passed, detail):
        _ACCEPTANCE.append((criterion, passed, detail))

    return log


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        flag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{flag}] {criterion}: {detail}")
