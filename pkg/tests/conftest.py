import numpy as np
import pytest

from povm_forge.catalog import SUPPORTED_COPIES, catalog_get


@pytest.fixture(params=SUPPORTED_COPIES, ids=lambda n: f"N{n}")
def entry(request):
    return catalog_get(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tetrahedron():
    return catalog_get(2).povm


@pytest.fixture
def octahedron():
    return catalog_get(3).povm


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report_line(request):
    """Record one PASS/FAIL line per acceptance criterion for the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(criterion: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        lines.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
