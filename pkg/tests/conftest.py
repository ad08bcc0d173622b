import random

import pytest

from camosat.netlist import load_fixture, parse_netlist

INVERTER = "input a\noutput y\ngate g0 tt:10 a\nconnect y g0\n"


@pytest.fixture(scope="session")
def c17():
    return load_fixture("c17")


@pytest.fixture(scope="session")
def sbox():
    return load_fixture("present_sbox")


@pytest.fixture(scope="session")
def table1():
    return load_fixture("table1")


@pytest.fixture
def inverter():
    return parse_netlist(INVERTER)


@pytest.fixture
def rng():
    return random.Random(1234)


# -- acceptance reporting: one pass/fail line per criterion -------------------

_criteria: list[tuple[str, str, str]] = []
_notes: dict[str, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion checked by this test")


@pytest.fixture
def note(request):
    """Attach a reported (not asserted) figure to the current criterion line."""
    marker = request.node.get_closest_marker("criterion")
    key = marker.args[0] if marker else request.node.nodeid

    def add(text):
        _notes.setdefault(key, []).append(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _criteria.append((status, marker.args[0], item.nodeid))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    verdicts: dict[str, list[str]] = {}
    for status, name, _ in _criteria:
        verdicts.setdefault(name, []).append(status)
    terminalreporter.section("acceptance criteria")
    for name, statuses in verdicts.items():
        status = "FAIL" if "FAIL" in statuses else ("PASS" if "PASS" in statuses else "SKIP")
        line = f"{status}  {name} ({statuses.count('PASS')}/{len(statuses)} checks)"
        if _notes.get(name):
            line += "  [" + "; ".join(_notes[name]) + "]"
        terminalreporter.write_line(line)
