"""Acceptance suite: criteria 1-9 at their stated budgets and tolerances.

Run under pytest, or directly with `python tests/test_acceptance.py` for the table alone."""
import sys

import pytest

from srblab.acceptance import FULL, NAMES, run_all

RESULTS = {}


@pytest.fixture(scope="module")
def results():
    if not RESULTS:
        for r in run_all("neutral_cat", FULL, seed=0, echo=lambda s: print(s, flush=True)):
            RESULTS[r.number] = r
    return RESULTS


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(NAMES), ids=[f"criterion_{i}" for i in sorted(NAMES)])
def test_criterion(results, number):
    r = results[number]
    print(r.line())
    assert r.status == "PASS", r.line()


def test_linear_control_skips_neutral_criteria():
    res = run_all("linear_cat", FULL, seed=0, only={1, 2, 3})
    assert [r.status for r in res] == ["PASS", "PASS", "SKIP"]


if __name__ == "__main__":
    rs = run_all("neutral_cat", FULL, seed=0, echo=print)
    sys.exit(0 if all(r.status == "PASS" for r in rs) else 1)
