"""Synthetic eye-frame generation and the labeled dataset container.

Closed frames are a near-uniform dark lid: a per-frame base intensity drawn
uniformly from [20, 60] plus Gaussian pixel noise (sigma 5). Open frames add
a bright sclera ellipse (intensity 180-230, covering 20-35% of the image,
fully inside the borders) with a dark pupil disk (intensity 0-20) at its
center. The intensity split makes open frames high-variance and closed
frames low-variance by construction, so a variance cutoff separates the
classes perfectly; this is the property the heuristic classifier and the
trainable net are validated against.

All randomness flows through one seeded generator in a fixed draw order, so
equal seeds give bitwise-identical datasets.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import pgm
from .core import (
    FRAME_HEIGHT,
    FRAME_PIXELS,
    FRAME_WIDTH,
    EyeState,
    Frame,
    frames_for_duration,
    timestamp_for_index,
)


@dataclass(frozen=True)
class GeneratorParams:
    """Intensity and geometry ranges for the synthetic frames."""

    base_low: float = 20.0
    base_high: float = 60.0
    noise_sigma: float = 5.0
    sclera_low: float = 180.0
    sclera_high: float = 230.0
    sclera_area_low: float = 0.20   # fraction of the frame
    sclera_area_high: float = 0.35
    sclera_aspect_low: float = 1.6  # width/height of the ellipse
    sclera_aspect_high: float = 2.2
    pupil_low: float = 0.0
    pupil_high: float = 20.0
    pupil_radius_low: float = 0.25  # fraction of the ellipse's short semi-axis
    pupil_radius_high: float = 0.45
    center_jitter: float = 4.0      # max offset of the eye center, pixels

    def __post_init__(self) -> None:
        if not 0 < self.sclera_area_low <= self.sclera_area_high < 1:
            raise ValueError("sclera area fractions must satisfy 0 < low <= high < 1")
        if self.sclera_aspect_low < 1 or self.sclera_aspect_high < self.sclera_aspect_low:
            raise ValueError("sclera aspect range must be >= 1 and ordered")


# Pixel-center coordinate grids, shared by every open frame.
_YY, _XX = np.mgrid[0:FRAME_HEIGHT, 0:FRAME_WIDTH]


def _finish(img: np.ndarray) -> bytes:
    return np.clip(np.rint(img), 0, 255).astype(np.uint8).tobytes()


def _render_closed(rng: np.random.Generator, p: GeneratorParams) -> bytes:
    base = rng.uniform(p.base_low, p.base_high)
    img = base + rng.normal(0.0, p.noise_sigma, (FRAME_HEIGHT, FRAME_WIDTH))
    return _finish(img)


def _render_open(rng: np.random.Generator, p: GeneratorParams) -> bytes:
    base = rng.uniform(p.base_low, p.base_high)
    img = np.full((FRAME_HEIGHT, FRAME_WIDTH), base)

    # Ellipse semi-axes from target area and aspect ratio: area = pi*a*b.
    frac = rng.uniform(p.sclera_area_low, p.sclera_area_high)
    aspect = rng.uniform(p.sclera_aspect_low, p.sclera_aspect_high)
    b = math.sqrt(frac * FRAME_PIXELS / (math.pi * aspect))
    a = aspect * b

    # Jitter only within the slack left by the axes, so the ellipse always
    # stays clear of the borders (area and aspect take priority).
    jx = min(p.center_jitter, FRAME_WIDTH / 2 - a - 1.0)
    jy = min(p.center_jitter, FRAME_HEIGHT / 2 - b - 1.0)
    if jx < 0 or jy < 0:
        raise ValueError(
            f"sclera with area fraction {frac:.2f} and aspect {aspect:.2f} "
            f"does not fit an {FRAME_WIDTH}x{FRAME_HEIGHT} frame"
        )
    cx = FRAME_WIDTH / 2 + rng.uniform(-jx, jx)
    cy = FRAME_HEIGHT / 2 + rng.uniform(-jy, jy)

    sclera = rng.uniform(p.sclera_low, p.sclera_high)
    inside = ((_XX - cx) / a) ** 2 + ((_YY - cy) / b) ** 2 <= 1.0
    img[inside] = sclera

    pupil_r = rng.uniform(p.pupil_radius_low, p.pupil_radius_high) * b
    pupil = rng.uniform(p.pupil_low, p.pupil_high)
    in_pupil = (_XX - cx) ** 2 + (_YY - cy) ** 2 <= pupil_r ** 2
    img[in_pupil] = pupil

    img += rng.normal(0.0, p.noise_sigma, (FRAME_HEIGHT, FRAME_WIDTH))
    return _finish(img)


def render_frame(state: EyeState, rng: np.random.Generator,
                 params: GeneratorParams | None = None) -> bytes:
    """One frame's raw pixels for the given eye state."""
    p = params or GeneratorParams()
    if state is EyeState.CLOSED:
        return _render_closed(rng, p)
    return _render_open(rng, p)


class LabeledDataset:
    """Frames plus Open/Closed labels, held as arrays for training.

    pixels: uint8 array of shape (n, 5600); labels: uint8 array of shape
    (n,) with 1 = Closed, 0 = Open.
    """

    def __init__(self, pixels: np.ndarray, labels: np.ndarray):
        pixels = np.asarray(pixels, dtype=np.uint8)
        labels = np.asarray(labels, dtype=np.uint8)
        if pixels.ndim != 2 or pixels.shape[1] != FRAME_PIXELS:
            raise ValueError(f"pixels must be (n, {FRAME_PIXELS}), got {pixels.shape}")
        if labels.shape != (pixels.shape[0],):
            raise ValueError("labels length must match pixel rows")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 (Open) or 1 (Closed)")
        self.pixels = pixels
        self.labels = labels

    def __len__(self) -> int:
        return self.pixels.shape[0]

    def state_of(self, i: int) -> EyeState:
        return EyeState.CLOSED if self.labels[i] else EyeState.OPEN

    def frame(self, i: int, fps: int = 10) -> Frame:
        return Frame(pixels=self.pixels[i].tobytes(),
                     timestamp_ms=timestamp_for_index(i, fps), index=i)

    def frames(self, fps: int = 10) -> Iterator[Frame]:
        for i in range(len(self)):
            yield self.frame(i, fps)

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(self.pixels[idx], self.labels[idx])

    def split(self, n_first: int) -> tuple["LabeledDataset", "LabeledDataset"]:
        if not 0 < n_first < len(self):
            raise ValueError(f"split point {n_first} outside (0, {len(self)})")
        return (LabeledDataset(self.pixels[:n_first], self.labels[:n_first]),
                LabeledDataset(self.pixels[n_first:], self.labels[n_first:]))

    def shuffled(self, seed: int) -> "LabeledDataset":
        order = np.random.default_rng(seed).permutation(len(self))
        return self.subset(order)

    def save(self, directory: str | os.PathLike) -> None:
        """Write as open/ and closed/ subdirectories of PGM frames."""
        directory = Path(directory)
        pgm.write_frames(directory / "open",
                         (self.pixels[i].tobytes() for i in range(len(self))
                          if self.labels[i] == 0))
        pgm.write_frames(directory / "closed",
                         (self.pixels[i].tobytes() for i in range(len(self))
                          if self.labels[i] == 1))

    @classmethod
    def load(cls, directory: str | os.PathLike) -> "LabeledDataset":
        directory = Path(directory)
        rows, labels = [], []
        for sub, label in (("open", 0), ("closed", 1)):
            subdir = directory / sub
            if not subdir.is_dir():
                raise FileNotFoundError(f"missing dataset subdirectory {subdir}")
            for path in pgm.list_frame_files(subdir):
                pixels, w, h = pgm.read_pgm(path)
                if (w, h) != (FRAME_WIDTH, FRAME_HEIGHT):
                    raise ValueError(f"{path}: expected {FRAME_WIDTH}x{FRAME_HEIGHT}")
                rows.append(np.frombuffer(pixels, dtype=np.uint8))
                labels.append(label)
        if not rows:
            raise ValueError(f"no frames found under {directory}")
        return cls(np.stack(rows), np.array(labels, dtype=np.uint8))


def generate_synthetic(count_per_class: int, seed: int,
                       params: GeneratorParams | None = None) -> LabeledDataset:
    """Deterministic labeled set with count_per_class frames of each state.

    Frames alternate Open/Closed so any prefix stays roughly balanced.
    """
    if count_per_class < 1:
        raise ValueError(f"count_per_class must be >= 1, got {count_per_class}")
    p = params or GeneratorParams()
    rng = np.random.default_rng(seed)
    pixels = np.empty((2 * count_per_class, FRAME_PIXELS), dtype=np.uint8)
    labels = np.empty(2 * count_per_class, dtype=np.uint8)
    for i in range(2 * count_per_class):
        closed = i % 2 == 1
        raw = _render_closed(rng, p) if closed else _render_open(rng, p)
        pixels[i] = np.frombuffer(raw, dtype=np.uint8)
        labels[i] = 1 if closed else 0
    return LabeledDataset(pixels, labels)


# --- Declarative state scripts -------------------------------------------

@dataclass(frozen=True)
class ScriptSegment:
    state: EyeState
    duration_ms: int

    def __post_init__(self) -> None:
        if self.duration_ms <= 0:
            raise ValueError("segment duration_ms must be positive")


def load_script(path: str | os.PathLike) -> list[ScriptSegment]:
    """Read a JSON state script: {"segments": [{"state", "duration_ms"}, ...]}.

    A bare top-level list of segments is accepted too.
    """
    doc = json.loads(Path(path).read_text())
    segments = doc["segments"] if isinstance(doc, dict) else doc
    if not isinstance(segments, list) or not segments:
        raise ValueError(f"{path}: script must contain a non-empty segment list")
    out = []
    for i, seg in enumerate(segments):
        try:
            out.append(ScriptSegment(EyeState.from_wire(seg["state"]),
                                     int(seg["duration_ms"])))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}: bad segment #{i}: {exc}") from exc
    return out


def script_states(segments: Sequence[ScriptSegment], fps: int) -> list[EyeState]:
    """Expand segments to one EyeState per frame at the given rate."""
    states: list[EyeState] = []
    for seg in segments:
        states.extend([seg.state] * frames_for_duration(seg.duration_ms, fps))
    return states


def render_script(segments: Sequence[ScriptSegment], fps: int, seed: int,
                  params: GeneratorParams | None = None) -> Iterator[tuple[Frame, EyeState]]:
    """Yield (frame, ground-truth state) pairs for a script, replay-timed."""
    p = params or GeneratorParams()
    rng = np.random.default_rng(seed)
    for i, state in enumerate(script_states(segments, fps)):
        frame = Frame(pixels=render_frame(state, rng, p),
                      timestamp_ms=timestamp_for_index(i, fps), index=i)
        yield frame, state
