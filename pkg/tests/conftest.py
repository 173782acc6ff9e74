import json
from pathlib import Path

import pytest

from cpcodec.entropy_tables import build_tables
from cpcodec.sigma_grid import SigmaGrid

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def oracle():
    """Frozen arbitrary-precision reference values (see oracles/make_oracles.py)."""
    return json.loads((GOLDEN / "oracles.json").read_text())


@pytest.fixture(scope="session")
def grid():
    return SigmaGrid()


@pytest.fixture(scope="session")
def tables(grid):
    return build_tables(grid)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
