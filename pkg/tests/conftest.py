"""Collects one verdict line per acceptance criterion and prints them at the end."""

ACCEPTANCE_LINES: dict[int, str] = {}


def report(criterion: int, passed: bool, detail: str, verdict: str | None = None) -> None:
    """Record the verdict line of one criterion (printed in the terminal summary)."""
    verdict = verdict or ("PASS" if passed else "FAIL")
    line = f"criterion {criterion:2d}: {verdict:4s}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
