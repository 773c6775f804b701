"""Packaged test feeders and the synthetic yearly profile set."""

from __future__ import annotations

from pathlib import Path

DATA_DIR = Path(__file__).parent / "data"
FIXTURES = ("two_bus", "four_bus", "fifteen_bus")
# one summer day of the packaged profiles, used by the regression sweeps
FIXTURE_DAY = 172
FIXTURE_HOURS = range(FIXTURE_DAY * 24, FIXTURE_DAY * 24 + 24)


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    return DATA_DIR / f"{name}.feeder"


def profiles_path() -> Path:
    return DATA_DIR / "profiles.csv"


def resolve_feeder(name_or_path) -> Path:
    """A feeder file path, or the name of a packaged fixture."""
    p = Path(name_or_path)
    if p.exists() or str(name_or_path) not in FIXTURES:
        return p
    return fixture_path(str(name_or_path))
