from __future__ import annotations

import pytest

_VERDICTS: list[tuple[int, str, bool, str]] = []


class Verdicts:
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(self, number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'} {name}: {detail}"
        print(line)
        _VERDICTS.append((number, name, ok, detail))
        return ok


@pytest.fixture(scope="session")
def verdicts() -> Verdicts:
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_VERDICTS):
        terminalreporter.write_line(f"{number:2d} {'PASS' if ok else 'FAIL'} {name}: {detail}")
