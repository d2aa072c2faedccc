import numpy as np
import pytest

from samplereuse import Ball, build_chain

# acceptance criteria append (number, passed, detail) here
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ball_chain(radii, dim, norm=2):
    return build_chain([Ball(r, dim=dim, norm=norm) for r in radii], labels=list(radii))


def volume_chain(volumes):
    """1-D balls (intervals) with the given lengths."""
    return ball_chain([v / 2 for v in volumes], dim=1)
