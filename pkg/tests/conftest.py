import re

import numpy as np
import pytest

from oligofrag.experiments import build_economy
from oligofrag.params import ParamSet

_CRITERIA = {}
_PAT = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def eta1_params(**kw):
    base = dict(beta=0.99, psi=1.0, nu=0.4, alpha=1.0 / 3.0, delta=0.025, rho=0.75, eta=1.0,
                I=1, M=3, f=1.0, lam=0.0, c=0.0, phi_A=0.0, sigma_eps=0.0)
    base.update(kw)
    return ParamSet(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def smoke_2007():
    return build_economy("y2007", "smoke")


@pytest.fixture(scope="session")
def smoke_1975():
    return build_economy("y1975", "smoke")


def pytest_runtest_logreport(report):
    m = _PAT.search(report.nodeid)
    if not m:
        return
    k = int(m.group(1))
    if report.when == "call" or report.outcome != "passed":
        prev = _CRITERIA.get(k, "PASS")
        ok = report.outcome == "passed"
        _CRITERIA[k] = "PASS" if (ok and prev == "PASS") else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {k:2d}: {_CRITERIA[k]}")
