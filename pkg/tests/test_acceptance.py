"""The eleven acceptance criteria at their stated tolerances.

Each test prints one pass/fail line; the lines are collected again in the
terminal summary.  Criteria that cannot be met fail here on purpose.
"""
import pytest

import conftest
from acceptance_runs import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    r = CRITERIA[n]()
    line = r.line()
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert r.passed, line
