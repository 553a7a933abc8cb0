import pytest

from aosync.model import ModelParams

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def small():
    return ModelParams(p=0.5, b=2, d_max=5, alpha=0.9)


@pytest.fixture
def medium():
    return ModelParams(p=0.3, b=4, d_max=20, alpha=0.99)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
