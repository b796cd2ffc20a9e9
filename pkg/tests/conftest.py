import pytest

from crmot import species_by_name


@pytest.fixture(scope="session")
def cr52():
    return species_by_name("52Cr")


@pytest.fixture(scope="session")
def cr53():
    return species_by_name("53Cr")


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
