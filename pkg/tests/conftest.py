import numpy as np
import pytest

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL/SKIP line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, status, detail):
        line = f"criterion {str(number):>3}: {status:<4} {detail}"
        print(line)
        lines.append((number, line))

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: (int(str(t[0]).rstrip("ab")), str(t[0]))):
            terminalreporter.write_line(line)
