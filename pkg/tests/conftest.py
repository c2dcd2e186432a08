from __future__ import annotations

from collections import OrderedDict
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# criterion number -> list of (check name, passed, detail)
_ACCEPTANCE: "OrderedDict[int, list[tuple[str, bool, str]]]" = OrderedDict()


@pytest.fixture
def record():
    """Record one acceptance check; the summary prints one line per criterion."""

    def _record(criterion: int, name: str, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE.setdefault(criterion, []).append((name, bool(ok), detail))
        return ok

    return _record


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        checks = _ACCEPTANCE[k]
        ok = all(c[1] for c in checks)
        failed = [c for c in checks if not c[1]]
        detail = "; ".join(f"{n}: {d}" for n, _, d in (failed or checks) if d)
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
