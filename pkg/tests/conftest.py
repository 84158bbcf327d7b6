import sys
from pathlib import Path

import numpy as np
import pytest

from evrestore.dataset import SceneSpec, generate_scene
from evrestore.events import EventStream
from evrestore.simulator import SimulatorConfig

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable


def random_stream(rng, width=16, height=16, max_events=50,
                  t_start=0, t_end=None):
    """Random valid event stream for property tests."""
    if t_end is None:
        t_end = int(rng.integers(1, 200_000))
    n = int(rng.integers(0, max_events + 1))
    t = np.sort(rng.integers(t_start, t_end + 1, n)).astype(np.int64)
    x = rng.integers(0, width, n).astype(np.int32)
    y = rng.integers(0, height, n).astype(np.int32)
    p = rng.choice([-1, 1], n).astype(np.int8)
    return EventStream(width, height, t_start, t_end, t, x, y, p)


@pytest.fixture(scope="session")
def small_sample():
    """One deterministic 32x32 rho=4 sample shared across read-only tests."""
    return generate_scene(SceneSpec(height=32, width=32),
                          SimulatorConfig(seed=7))


_CRITERION_RESULTS = {}


def pytest_runtest_makereport(item, call):
    """Record the outcome of each acceptance-criterion test."""
    if call.when != "call":
        return
    label = getattr(item.function, "_criterion", None)
    if label:
        _CRITERION_RESULTS[label] = call.excinfo is None


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Emit one PASS/FAIL line per acceptance criterion."""
    if not _CRITERION_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    def order(label):
        head = label.split()[0]
        return (int(head[1:]) if head[1:].isdigit() else 0, label)

    for label in sorted(_CRITERION_RESULTS, key=order):
        status = "PASS" if _CRITERION_RESULTS[label] else "FAIL"
        terminalreporter.write_line(f"  {label}: {status}")
