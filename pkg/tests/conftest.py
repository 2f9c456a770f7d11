from pathlib import Path

import pytest

from cpa.synth import load_fixture

FIXTURES = Path(__file__).parent / "fixtures"

_ACCEPTANCE = []


def fixture_path(name):
    return FIXTURES / name


@pytest.fixture
def load():
    return lambda name: load_fixture(FIXTURES / name)


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion; printed at the end of the run."""
    def record(tag, ok, detail=""):
        line = f"{tag}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
