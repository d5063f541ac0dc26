import json
from pathlib import Path

import pytest

from tropslag.tropical import load_curve

FIXTURES = Path(__file__).parent / "fixtures" / "curves"
MANIFEST = json.loads((FIXTURES / "manifest.json").read_text())


def fixture_curve(name):
    return load_curve(FIXTURES / f"{name}.json")


def valid_fixture_names():
    return sorted(
        n for n, m in MANIFEST.items()
        if all(m["balanced"].values()) and all(m["locally_planar"].values())
    )


@pytest.fixture
def pants():
    return fixture_curve("pants")


@pytest.fixture
def two_vertex():
    return fixture_curve("two_vertex")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
