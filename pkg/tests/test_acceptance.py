"""One test per acceptance criterion; each prints its PASS/FAIL line.

Run with -s (or look at captured output on failure) to see the timing lines.
The seed is fixed so the randomized criteria are reproducible.
"""

import pytest

from cfiforge.suite import CRITERIA, run_criterion

SEED = 2024


@pytest.mark.parametrize(
    "number,name",
    [(num, name) for num, name, _, _ in CRITERIA],
    ids=[f"{num:02d}-{name}" for num, name, _, _ in CRITERIA],
)
def test_criterion(number, name):
    outcome = run_criterion(number, seed=SEED)
    print(outcome.line())
    assert outcome.passed, f"criterion {number} ({name}) failed: {outcome.details}"
    assert outcome.seconds < outcome.bound, (
        f"criterion {number} ({name}) took {outcome.seconds:.2f}s, "
        f"bound {outcome.bound:.0f}s"
    )
