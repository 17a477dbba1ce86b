import pytest

from fashion_noc.topo import build_mesh, effective_graph, load_scenario

WALKTHROUGH = """\
mesh 3 4
names A B C D E F G H I J K L
linkfault J K
linkfault K G
linkfault G F
linkfault G C
linkfault G H
linkfault H L
"""


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: exit-criteria runs (slow)")


@pytest.fixture
def walkthrough_topo():
    return load_scenario(WALKTHROUGH)


@pytest.fixture
def walkthrough(walkthrough_topo):
    return effective_graph(walkthrough_topo)


@pytest.fixture
def mesh8():
    return build_mesh(8, 8)


def ids(graph, letters):
    return {graph.names.index(c) for c in letters}


# criterion number -> (passed, detail); filled by the acceptance module
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
