from __future__ import annotations

import pytest

from mxiso.graph_core import COLLECTIVE, PAIRWISE
from mxiso.multiplex_enum import enumerate_catalog


@pytest.fixture(scope="session")
def catalog_pc():
    """n=5, (pairwise, collective)."""
    return enumerate_catalog(5, (PAIRWISE, COLLECTIVE))


@pytest.fixture(scope="session")
def catalog_pcp():
    """n=5, (pairwise, collective, pairwise); takes several seconds."""
    return enumerate_catalog(5, (PAIRWISE, COLLECTIVE, PAIRWISE))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
