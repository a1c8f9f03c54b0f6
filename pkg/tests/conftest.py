import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting: one PASS/FAIL line per criterion after the run

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call") or (rep.when == "setup" and rep.passed):
        return
    ok, notes = item.config.stash[_CRITERIA].setdefault(mark.args[0], [True, []])
    item.config.stash[_CRITERIA][mark.args[0]][0] = ok and rep.passed
    notes.extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter, config):
    res = config.stash[_CRITERIA]
    if not res:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(res):
        ok, notes = res[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {'; '.join(notes)}")
