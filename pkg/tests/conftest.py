from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

# criterion number -> (title, [outcomes]); notes are free-form info lines
_CRITERIA: dict[int, tuple[str, list[str]]] = {}
_NOTES: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by this test")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m:
            number, title = m.args
            _CRITERIA.setdefault(number, (title, []))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _CRITERIA[m.args[0]][1].append(rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        tr.write_line(f"criterion {number:2d}: {status:7s} {title} ({len(outcomes)} checks)")
    for note in _NOTES:
        tr.write_line(f"note: {note}")


@pytest.fixture
def acceptance_note():
    """Append an informational line to the acceptance summary."""
    return _NOTES.append


@pytest.fixture(scope="session")
def fixture_pdb_text() -> str:
    return (DATA / "gyvlgs_12chain.pdb").read_text()


@pytest.fixture(scope="session")
def schema():
    def load(name):
        return json.loads(resources.files("stericzip").joinpath(f"schemas/{name}.json").read_text())

    return load
