from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mptrack.pipeline import CueSequence, extract_cues, simulate
from mptrack.simulator import SceneConfig

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def short_scene():
    """Two-second walking talker, 50 frames, used by several module tests."""
    return simulate(SceneConfig(duration=2.0, seed=5))


@pytest.fixture(scope="session")
def short_sequence(short_scene):
    return CueSequence(extract_cues(short_scene), cache_size=64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def criterion_report():
    """``report(n, ok, detail)`` records and prints one pass/fail line per acceptance criterion."""

    def report(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[n] = line
        print("\n" + line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
