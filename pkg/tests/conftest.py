import numpy as np
import pytest

from rssaoa.channel import ChannelParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params():
    return ChannelParams()


@pytest.fixture
def noiseless():
    return ChannelParams().with_sigma(0.0)


# criterion number -> list of (ok, detail); filled by the acceptance suite
ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Log one check of an acceptance criterion and echo it immediately."""
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {crit:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
