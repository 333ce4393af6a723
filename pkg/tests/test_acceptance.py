"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test prints a single ``[PASS]``/``[FAIL]`` line; the lines are repeated
in the terminal summary.
"""

import json

import pytest

from besovlift.acceptance import CRITERIA, DEFAULT_SEED


@pytest.mark.acceptance
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, acceptance_log):
    result = CRITERIA[number](seed=DEFAULT_SEED)
    acceptance_log[number] = result.line()
    print(result.line())
    assert result.passed, result.line() + "\n" + json.dumps(result.to_json()["measured"], indent=1, default=str)
