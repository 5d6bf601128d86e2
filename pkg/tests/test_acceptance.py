"""The ten acceptance criteria, run once per session with seed 0.

Each test prints one ``[PASS]``/``[FAIL]`` line; the lines are repeated in
the terminal summary so the whole table is visible at the end of the run.
"""

import pytest

from conftest import ACCEPTANCE_LINES
from mpa import acceptance

SEED = 0


@pytest.fixture(scope="module")
def results():
    return {r.number: r for r in acceptance.run_all(seed=SEED)}


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(results, number):
    r = results[number]
    line = r.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert r.passed, line
