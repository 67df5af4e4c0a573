"""Shared test plumbing: the acceptance-criteria summary block.

Tests in test_acceptance.py record one line per criterion; the lines are
echoed after the normal pytest summary so a full run always ends with an
explicit pass/fail verdict for every criterion, visible without -s.
"""

ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((name, bool(ok), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {name}: {detail}")
