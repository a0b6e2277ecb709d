"""Shared domain types: frames, eye states, state events, stream configuration.

Everything here is an immutable value type, safe to share between pipeline
stages. Timing thresholds are stored in milliseconds and converted to frame
counts per stream, so changing the frame rate never silently changes
semantics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

FRAME_WIDTH = 80
FRAME_HEIGHT = 70
FRAME_PIXELS = FRAME_WIDTH * FRAME_HEIGHT  # 5600


class EyeState(Enum):
    """Eye state verdict. Serializes as '0' (Open) / '1' (Closed) in patterns."""

    OPEN = "open"
    CLOSED = "closed"

    @property
    def char(self) -> str:
        return "1" if self is EyeState.CLOSED else "0"

    @classmethod
    def from_wire(cls, name: str) -> "EyeState":
        if name == "open":
            return cls.OPEN
        if name == "closed":
            return cls.CLOSED
        raise ValueError(f"unknown eye state {name!r}")


@dataclass(frozen=True)
class Frame:
    """One 80x70 grayscale eye image, the pipeline's unit of work.

    pixels is a row-major bytes object of exactly 5600 8-bit intensities.
    """

    pixels: bytes
    timestamp_ms: int
    index: int
    width: int = FRAME_WIDTH
    height: int = FRAME_HEIGHT

    def __post_init__(self) -> None:
        if self.width != FRAME_WIDTH or self.height != FRAME_HEIGHT:
            raise ValueError(
                f"frame must be {FRAME_WIDTH}x{FRAME_HEIGHT}, "
                f"got {self.width}x{self.height}"
            )
        if len(self.pixels) != self.width * self.height:
            raise ValueError(
                f"expected {self.width * self.height} pixels, got {len(self.pixels)}"
            )
        if self.timestamp_ms < 0:
            raise ValueError("timestamp_ms must be non-negative")
        if self.index < 0:
            raise ValueError("frame index must be non-negative")


@dataclass(frozen=True)
class StateEvent:
    """Classifier verdict for one frame, with measured classify latency."""

    frame_index: int
    timestamp_ms: int
    state: EyeState
    confidence: float  # probability of Closed
    classify_latency_ms: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.classify_latency_ms < 0:
            raise ValueError("classify_latency_ms must be non-negative")


@dataclass(frozen=True)
class StreamConfig:
    """Per-stream timing parameters.

    Durations are wall-clock milliseconds; frame-count equivalents are
    derived through frames_for_duration for the stream's fps.
    """

    fps: int = 10
    latency_budget_ms: int = 100
    min_closed_ms: int = 200
    word_gap_ms: int = 1000
    session_toggle_ms: int = 4000

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        for name in ("latency_budget_ms", "min_closed_ms", "word_gap_ms",
                     "session_toggle_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.session_toggle_ms > self.word_gap_ms > self.min_closed_ms:
            raise ValueError(
                "need session_toggle_ms > word_gap_ms > min_closed_ms, got "
                f"{self.session_toggle_ms} / {self.word_gap_ms} / {self.min_closed_ms}"
            )
        if self.frame_period_ms > self.latency_budget_ms:
            raise ValueError(
                f"frame period {self.frame_period_ms:.1f}ms exceeds the "
                f"{self.latency_budget_ms}ms prediction budget; the stream cannot keep up"
            )

    @property
    def frame_period_ms(self) -> float:
        return 1000.0 / self.fps

    @property
    def min_closed_frames(self) -> int:
        return frames_for_duration(self.min_closed_ms, self.fps)

    @property
    def word_gap_frames(self) -> int:
        return frames_for_duration(self.word_gap_ms, self.fps)

    @property
    def session_toggle_frames(self) -> int:
        return frames_for_duration(self.session_toggle_ms, self.fps)

    def to_dict(self) -> dict:
        return {
            "fps": self.fps,
            "latency_budget_ms": self.latency_budget_ms,
            "min_closed_ms": self.min_closed_ms,
            "word_gap_ms": self.word_gap_ms,
            "session_toggle_ms": self.session_toggle_ms,
        }


def frames_for_duration(duration_ms: float, fps: float) -> int:
    """Smallest frame count spanning at least duration_ms at the given fps.

    Ceiling conversion: a closure must cover the full stated duration, so a
    partial trailing frame period still requires one more frame.
    """
    if duration_ms <= 0:
        raise ValueError(f"duration_ms must be positive, got {duration_ms}")
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    if isinstance(duration_ms, int) and isinstance(fps, int):
        return -(-duration_ms * fps // 1000)
    return math.ceil(duration_ms * fps / 1000.0)


def timestamp_for_index(index: int, fps: int) -> int:
    """Synthetic replay timestamp for a frame ordinal: index * 1000 / fps."""
    return index * 1000 // fps
