import numpy as np
import pytest

from dprtfl.model import ParamVector

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit is not None:
        _ACCEPTANCE[crit] = (report.outcome, report.nodeid)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE, key=lambda c: int(c.split()[0].lstrip("AC"))):
        outcome, nodeid = _ACCEPTANCE[crit]
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {crit}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_params(rng, dim):
    return ParamVector(rng.normal(size=dim), float(rng.normal()))
