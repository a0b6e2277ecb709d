import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from blinkcomm import EyeState, Frame, StateEvent, StreamConfig, generate_synthetic
from blinkcomm.core import FRAME_PIXELS

FIXTURES = Path(__file__).parent / "fixtures"


def uniform_frame(value: int, index: int = 0, timestamp_ms: int = 0) -> Frame:
    return Frame(pixels=bytes([value]) * FRAME_PIXELS,
                 timestamp_ms=timestamp_ms, index=index)


def random_frame(rng: np.random.Generator, index: int = 0) -> Frame:
    pixels = rng.integers(0, 256, FRAME_PIXELS, dtype=np.uint8).tobytes()
    return Frame(pixels=pixels, timestamp_ms=index * 100, index=index)


def states_to_events(states, fps: int = 10, start_index: int = 0) -> list[StateEvent]:
    """Build a clean StateEvent stream from EyeStates or '0'/'1' characters."""
    events = []
    for i, st in enumerate(states):
        if isinstance(st, str):
            st = EyeState.CLOSED if st == "1" else EyeState.OPEN
        idx = start_index + i
        events.append(StateEvent(
            frame_index=idx, timestamp_ms=idx * 1000 // fps, state=st,
            confidence=1.0 if st is EyeState.CLOSED else 0.0,
            classify_latency_ms=0.0))
    return events


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Render the release-gate verdict lines collected by test_acceptance."""
    lines = getattr(config, "_gate_lines", [])
    if lines:
        terminalreporter.section("release gates")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(50, seed=42)


@pytest.fixture
def config10():
    return StreamConfig(fps=10)


class PerfectStub:
    """Reads the label straight from the dataset; accuracy 1 by construction."""

    def __init__(self, dataset):
        self._labels = dataset.labels

    def classify(self, frame: Frame) -> float:
        return 1.0 if self._labels[frame.index] else 0.0

    def name(self) -> str:
        return "perfect-stub"


class ConstantStub:
    def __init__(self, confidence: float, name: str = "constant-stub"):
        self._confidence = confidence
        self._name = name

    def classify(self, frame: Frame) -> float:
        return self._confidence

    def name(self) -> str:
        return self._name
