import numpy as np
import pytest

# Acceptance criteria report one PASS/FAIL line each at the end of the run,
# independent of pytest's own summary.
_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    def record(name, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        _ACCEPTANCE_LINES.append(f"ACCEPTANCE {name}: {status}{suffix}")
        assert passed, f"{name}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
