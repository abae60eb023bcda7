import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def typical():
    from transmon_harper.circuit import RawCircuitParams

    return RawCircuitParams.typical()


# acceptance reporting: tests record (criterion, ok, detail); one line per
# criterion is printed at the end of the session
_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    def record(n, ok, detail=""):
        prev_ok, prev = _ACCEPTANCE.get(n, (True, []))
        _ACCEPTANCE[n] = (prev_ok and bool(ok), prev + ([detail] if detail else []))
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, details = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  " + "; ".join(details))
