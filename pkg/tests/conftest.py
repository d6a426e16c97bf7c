import pytest

from tests.helpers import RIGID_BODY_1, spec


@pytest.fixture
def rigid_body():
    return spec(RIGID_BODY_1)


def pytest_terminal_summary(terminalreporter):
    from tests.helpers import ACCEPTANCE_LINES

    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number}: {verdict}  {detail}")
