import pytest


class AcceptanceLog:
    def __init__(self):
        self.entries = {}

    def start(self, number, description):
        self.entries[number] = [description, "FAIL"]

    def ok(self, number):
        self.entries[number][1] = "PASS"


_LOG = AcceptanceLog()


@pytest.fixture(scope="session")
def acceptance():
    return _LOG


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _LOG.entries:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LOG.entries):
        desc, status = _LOG.entries[n]
        terminalreporter.write_line(f"criterion {n}: {status} - {desc}")
