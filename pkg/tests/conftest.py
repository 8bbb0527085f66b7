from __future__ import annotations

import pytest
from helpers import run_example

from nrctrace.fixtures import rs_store


@pytest.fixture
def sigma():
    return rs_store()


@pytest.fixture(scope="session")
def join_run():
    return run_example("join")


@pytest.fixture(scope="session")
def agg_run():
    return run_example("agg")


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
