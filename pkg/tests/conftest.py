from __future__ import annotations

import numpy as np
import pytest

from crashmine.deck import Element, Node, parse_deck
from crashmine.disassemble import PartMesh, disassemble
from crashmine.deck import Material

UNIT_SQUARE_DECK = """\
$ unit square
NODE 1 0 0 0
NODE 2 1 0 0
NODE 3 1 1 0
NODE 4 0 1 0
SHELL 1 11 1 2 3 4
MATER 11 2.0 7.8e-9
"""


def nodes_of(*coords, first=1):
    return {i: Node(i, *map(float, c)) for i, c in enumerate(coords, start=first)}


def quad(eid, ids, part=1, kind="shell4"):
    return Element(eid, kind, part, tuple(ids))


def make_part(coords, elements, thickness=1.0, density=1.0, part_id=1, source="t"):
    nodes = nodes_of(*coords)
    els = {}
    for eid, ids in enumerate(elements, start=1):
        kind = "shell3" if len(ids) == 3 else "shell4"
        els[eid] = Element(eid, kind, part_id, tuple(ids))
    return PartMesh(part_id, source, nodes, els, Material(part_id, thickness, density))


@pytest.fixture
def unit_square_part():
    return disassemble(parse_deck(UNIT_SQUARE_DECK, "unit"))[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ---------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.outcome == "passed" else "FAIL"
        _ACCEPTANCE[n] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        status, title = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")
