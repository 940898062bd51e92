"""Acceptance gate: one test per end-to-end check, one line per result.

Run with ``pytest tests/test_acceptance.py -v`` (or ``blockteach eval`` for
the same checks outside pytest).  Every check carries its own oracle and
time budget inside :mod:`blockteach.acceptance`.
"""

import pytest

from blockteach.acceptance import CHECKS, run_check


@pytest.mark.parametrize("name", [name for name, _fn, _budget in CHECKS])
def test_acceptance(name, capsys):
    try:
        detail, elapsed = run_check(name)
    except AssertionError as exc:
        with capsys.disabled():
            print(f"FAIL {name}: {exc}")
        raise
    with capsys.disabled():
        print(f"PASS {name} ({elapsed:.2f}s): {detail}")
