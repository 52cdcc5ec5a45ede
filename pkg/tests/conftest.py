import time

import pytest

from gfmsat.harness.config import load_preset
from gfmsat.harness.run import run_scenario

ACCEPTANCE_LINES: list[str] = []


class PresetRuns:
    """Lazily simulated preset runs, shared across the session."""

    def __init__(self):
        self._cache = {}
        self.wall_time = {}

    def get(self, preset: str, strategy: str):
        key = (preset, strategy)
        if key not in self._cache:
            t0 = time.perf_counter()
            self._cache[key] = run_scenario(load_preset(preset).with_strategy(strategy))
            self.wall_time[key] = time.perf_counter() - t0
        return self._cache[key]


@pytest.fixture(scope="session")
def preset_runs():
    return PresetRuns()


@pytest.fixture
def gate():
    """Record one pass/fail line for an acceptance criterion."""

    def report(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
