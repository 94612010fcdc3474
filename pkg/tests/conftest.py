import sys

import numpy as np
import pytest

from kkt_hpinn.projection import ConstraintSpec


def make_spec(rng, m, n_inputs, n_outputs):
    return ConstraintSpec(A=rng.normal(size=(m, n_inputs)), B=rng.normal(size=(m, n_outputs)),
                          b=rng.normal(size=m))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def cstr_spec():
    return ConstraintSpec(A=[[0, 1, -1], [0, 1, 0]], B=[[0, -1, 1], [-1, -1, 0]], b=[0, 0])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in mod.TITLES.items():
        if n in mod.RESULTS:
            ok, detail = mod.RESULTS[n]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{n}] {title}: {detail}")
        else:
            terminalreporter.write_line(f"---- [{n}] {title}: not run or errored")
