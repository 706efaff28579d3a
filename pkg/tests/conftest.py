import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hieropinion.scenarios import reference_config  # noqa: E402

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def ref_stubborn():
    return lambda p: reference_config(p, stubborn=True)


@pytest.fixture
def ref_plain():
    return lambda p: reference_config(p, stubborn=False)


@pytest.fixture
def report(request):
    """Record one pass/fail line for an acceptance criterion.

    A criterion whose test errors out before reporting is recorded as failed.
    """
    number = request.node.get_closest_marker("criterion").args[0]

    def _report(ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    yield _report
    if number not in ACCEPTANCE_LINES:
        ACCEPTANCE_LINES[number] = f"criterion {number:>2}: FAIL  (test raised before reporting)"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
