import pytest

from support import AUDIT


@pytest.fixture(autouse=True)
def no_new_violations():
    before = len(AUDIT.violations)
    yield
    assert AUDIT.violations[before:] == []


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(module.RESULTS):
            terminalreporter.write_line(line)
    terminalreporter.write_line(
        f"audit: {AUDIT.fixpoints} fixpoints checked, {len(AUDIT.violations)} violations, "
        f"{AUDIT.invariant_checks} invariant scans"
    )
