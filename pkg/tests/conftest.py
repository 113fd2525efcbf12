import numpy as np
import pytest

from accpulse.synth import (ARRHYTHMIC_COUPLED, ASY, ORG_COUPLED, ORG_DECOUPLED, VF,
                            synth_snippet)

REGIME_CYCLE = (ORG_COUPLED, ORG_DECOUPLED, VF, ASY, ARRHYTHMIC_COUPLED)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def snippet_bank():
    """100 synthetic (acc, ecg, r_times, regime) tuples cycling through regimes."""
    out = []
    for k in range(100):
        regime = REGIME_CYCLE[k % len(REGIME_CYCLE)]
        a, e, r = synth_snippet(regime, seed=1000 + k)
        out.append((a, e, r, regime))
    return out


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request, capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def report(criterion: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}"
        request.config.stash.setdefault(_VERDICTS, []).append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
