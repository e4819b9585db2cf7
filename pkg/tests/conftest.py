import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import helpers  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not helpers.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name in helpers.CRITERIA.items():
        checks = helpers.ACCEPTANCE.get(number)
        if not checks:
            terminalreporter.write_line(f"criterion {number} ({name}): NOT RUN")
            continue
        failed = [label for label, ok, _ in checks if not ok]
        status = "PASS" if not failed else "FAIL (" + ", ".join(failed) + ")"
        terminalreporter.write_line(f"criterion {number} ({name}): {status}")
        for label, ok, detail in checks:
            terminalreporter.write_line(f"    {'pass' if ok else 'FAIL'}  {label}  {detail}".rstrip())
