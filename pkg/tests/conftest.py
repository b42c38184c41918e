import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("dev", max_examples=10, deadline=None)
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def pytest_collection_modifyitems(config, items):
    if os.environ.get("CATQUDIT_EXTENDED") == "1":
        return
    skip = pytest.mark.skip(reason="extended run; set CATQUDIT_EXTENDED=1")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def table1_params():
    from catqudit.model import table1
    return table1()


@pytest.fixture(scope="session")
def acceptance(request):
    """Collects one (criterion, passed, detail) line per acceptance check."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(name, passed, detail):
        lines.append((name, bool(passed), detail))
        return passed

    return record


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(lines):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
