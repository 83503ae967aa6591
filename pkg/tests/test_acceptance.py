"""Acceptance criteria 1–11 at full size, one test per criterion.

Each test records a one-line PASS/FAIL summary that is printed at the end
of the pytest run.  Criterion 8 fails with the normalization used here;
see the README for the measured gap.
"""
import pytest

from spherical_ldp.verify import run_criterion


@pytest.mark.parametrize("number", range(1, 12))
def test_criterion(number, acceptance_log):
    res = run_criterion(number, suite="full", seed=0, threads=1)
    acceptance_log.append((number, res.line()))
    print(res.line())
    assert res.passed, res.detail
