from __future__ import annotations

from pathlib import Path

import pytest

from maltriage.encoding import HashingEncoder
from maltriage.knowledge import build_index, ingest_snapshot

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance_outcomes: dict[str, str] = {}


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def kb_docs():
    return ingest_snapshot(FIXTURES / "kb" / "attack_snapshot.jsonl")


@pytest.fixture(scope="session")
def kb_index(kb_docs):
    return build_index(kb_docs, HashingEncoder())


def pytest_runtest_makereport(item, call):
    # Collect acceptance-marked test outcomes for the summary banner.
    if call.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.kwargs.get("name", item.name)
    _acceptance_outcomes[name] = "FAIL" if call.excinfo else "PASS"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance_outcomes.items():
        terminalreporter.write_line(f"[{outcome}] {name}")


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): marks a test as an acceptance criterion")
