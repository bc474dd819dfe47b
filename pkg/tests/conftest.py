from __future__ import annotations

import pytest

from brflow.seeds import load_seeds

# filled by test_acceptance; echoed in the terminal summary so the gate is
# visible even when pytest captures stdout
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_lines():
    return ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def seeds():
    return load_seeds()


@pytest.fixture(scope="session")
def seed_runs(seeds):
    """``seed id -> (seed, trajectory, report)`` for every shipped seed."""
    out = {}
    for s in seeds:
        traj, rep = s.analyze()
        out[s.id] = (s, traj, rep)
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
