import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from distrelax import fixture_path, load_feeder, load_profiles, profiles_path  # noqa: E402

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def profiles():
    return load_profiles(profiles_path())


@pytest.fixture(scope="session")
def feeders():
    return {name: load_feeder(fixture_path(name)) for name in ("two_bus", "four_bus", "fifteen_bus")}
