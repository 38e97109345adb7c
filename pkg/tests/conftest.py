from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# Address table used by every Zeek fixture.
ADDRESS_MAP = {"10.0.0.1": "consumer", "10.0.0.2": "provider-a"}


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


# Acceptance criteria outcomes, filled in by test_acceptance and echoed at the end of the run.
ACCEPTANCE: dict[int, tuple[str, bool]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
