"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines and every measured value.
"""
import pytest

from qtomo.validate import CRITERIA, run_criterion


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    result = run_criterion(number)
    print()
    print(result.report())
    assert result.passed, result.report()
