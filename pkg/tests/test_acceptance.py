"""One test per acceptance criterion; each prints a single PASS/FAIL line."""

import pytest

from qdmft.acceptance import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion_{n:02d}")
def test_criterion(number, capsys):
    result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
