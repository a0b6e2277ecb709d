"""Frame acquisition and the capture -> classify -> decode pipeline.

Two execution modes share one code path for the per-frame work:

* replay: single-threaded, pull-based, with timestamps derived from frame
  ordinals (index * 1000/fps). Deterministic, used for tests and offline
  decoding of recorded streams.

* live: three stages on separate threads, connected by bounded queues.
  Capture is paced to the frame period. The capture-to-classify queue holds
  at most one second of frames (depth = fps) and drops the oldest frame on
  overflow, counting what it dropped; for a communication aid, stale frames
  are worth less than fresh ones, and latency must stay bounded.

Classify wall time is measured around every classify call with a monotonic
clock, and frames above the configured budget are counted, not dropped:
one slow frame should degrade metrics, not kill the stream.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Protocol, Sequence

import numpy as np

from . import pgm
from .classifier import Classifier, decide
from .core import FRAME_PIXELS, EyeState, Frame, StateEvent, StreamConfig, timestamp_for_index
from .errors import NumericError, StreamError
from .patterns import Decoder, DecodeEvent, Dictionary, StateEcho
from .synthetic import GeneratorParams, ScriptSegment, load_script, render_script


class FrameSource(Protocol):
    """next() returns the next Frame, or None at end of stream."""

    def next(self) -> Frame | None: ...


class DirectorySource:
    """Replay of a directory of PGM frames in filename order."""

    def __init__(self, path, fps: int = 10):
        self._files = pgm.list_frame_files(path)
        self._fps = fps
        self._i = 0

    def __len__(self) -> int:
        return len(self._files)

    def next(self) -> Frame | None:
        if self._i >= len(self._files):
            return None
        i = self._i
        self._i += 1
        try:
            return pgm.read_frame(self._files[i], index=i,
                                  timestamp_ms=timestamp_for_index(i, self._fps))
        except (OSError, ValueError) as exc:
            raise StreamError(f"frame {i}: {exc}") from exc


class ScriptSource:
    """Frames rendered on the fly from a declarative state script.

    Keeps the ground-truth state per emitted frame so tests can compare the
    classifier's output against what was rendered.
    """

    def __init__(self, segments: Sequence[ScriptSegment], fps: int = 10,
                 seed: int = 0, params: GeneratorParams | None = None):
        self._gen = render_script(segments, fps, seed, params)
        self.ground_truth: list[EyeState] = []

    @classmethod
    def from_file(cls, path, fps: int = 10, seed: int = 0,
                  params: GeneratorParams | None = None) -> "ScriptSource":
        return cls(load_script(path), fps=fps, seed=seed, params=params)

    def next(self) -> Frame | None:
        try:
            frame, state = next(self._gen)
        except StopIteration:
            return None
        self.ground_truth.append(state)
        return frame


class ByteStreamSource:
    """Live feed: raw 5600-byte frames read back-to-back from a binary stream.

    Timestamps come from a monotonic clock, zeroed at the first frame.
    """

    def __init__(self, stream, clock: Callable[[], float] = time.monotonic):
        self._stream = stream
        self._clock = clock
        self._i = 0
        self._t0: float | None = None

    def next(self) -> Frame | None:
        chunks = []
        need = FRAME_PIXELS
        while need:
            try:
                chunk = self._stream.read(need)
            except OSError as exc:
                raise StreamError(f"frame {self._i}: {exc}") from exc
            if not chunk:
                if chunks:
                    raise StreamError(
                        f"frame {self._i}: stream ended mid-frame "
                        f"({FRAME_PIXELS - need + len(chunk)} of {FRAME_PIXELS} bytes)"
                    )
                return None
            chunks.append(chunk)
            need -= len(chunk)
        now = self._clock()
        if self._t0 is None:
            self._t0 = now
        frame = Frame(pixels=b"".join(chunks),
                      timestamp_ms=int((now - self._t0) * 1000), index=self._i)
        self._i += 1
        return frame


class IterSource:
    """Adapts any frame iterable to the source interface."""

    def __init__(self, frames: Iterable[Frame]):
        self._it: Iterator[Frame] = iter(frames)

    def next(self) -> Frame | None:
        return next(self._it, None)


# --- Latency accounting -----------------------------------------------------

@dataclass(frozen=True)
class LatencyStats:
    """Classify wall times (ms) and their aggregates for one run."""

    latencies_ms: tuple[float, ...]
    mean_ms: float
    p50_ms: float
    p95_ms: float
    p99_ms: float
    max_ms: float
    budget_violations: int
    frames_total: int

    @classmethod
    def from_latencies(cls, latencies_ms: Sequence[float],
                       budget_ms: float) -> "LatencyStats":
        lats = tuple(float(x) for x in latencies_ms)
        if not lats:
            return cls((), 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0)
        arr = np.array(lats)
        return cls(
            latencies_ms=lats,
            mean_ms=float(arr.mean()),
            p50_ms=float(np.percentile(arr, 50)),
            p95_ms=float(np.percentile(arr, 95)),
            p99_ms=float(np.percentile(arr, 99)),
            max_ms=float(arr.max()),
            budget_violations=int(np.sum(arr > budget_ms)),
            frames_total=len(lats),
        )

    def to_dict(self, include_latencies: bool = True) -> dict:
        doc = {
            "mean_ms": self.mean_ms, "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms, "p99_ms": self.p99_ms,
            "max_ms": self.max_ms, "budget_violations": self.budget_violations,
            "frames_total": self.frames_total,
        }
        if include_latencies:
            doc["latencies_ms"] = list(self.latencies_ms)
        return doc


def measure_latency(classifier: Classifier, frames: Sequence[Frame],
                    repetitions: int = 1, budget_ms: float = 100.0,
                    discard_warmup: bool = False) -> LatencyStats:
    """Classify every frame `repetitions` times, timing each call.

    With discard_warmup, the first repetition runs but is excluded from the
    stats (cache and allocator warm-up).
    """
    if not frames:
        raise ValueError("frames must be non-empty")
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    if discard_warmup and repetitions < 2:
        raise ValueError("discard_warmup needs at least 2 repetitions")
    latencies: list[float] = []
    for rep in range(repetitions):
        for frame in frames:
            t0 = time.perf_counter()
            classifier.classify(frame)
            elapsed_ms = (time.perf_counter() - t0) * 1000.0
            if not (discard_warmup and rep == 0):
                latencies.append(elapsed_ms)
    return LatencyStats.from_latencies(latencies, budget_ms)


# --- Pipeline ----------------------------------------------------------------

@dataclass
class PipelineReport:
    stats: LatencyStats
    events: list[DecodeEvent]           # decode events, echoes excluded
    state_events: list[StateEvent]      # per-frame verdicts, frame order
    queue_high_water: dict[str, int]
    dropped_frames: int

    def to_dict(self) -> dict:
        return {
            "stats": self.stats.to_dict(),
            "events": [e.to_payload() for e in self.events],
            "queue_high_water": dict(self.queue_high_water),
            "dropped_frames": self.dropped_frames,
        }


class _ClosedQueue(Exception):
    pass


class BoundedQueue:
    """Thread-safe FIFO with a hard capacity.

    drop_oldest=True makes put never block: on overflow the oldest item is
    discarded and counted. Otherwise put blocks until space frees up.
    close() wakes all waiters; get() returns None once closed and drained.
    """

    def __init__(self, capacity: int, drop_oldest: bool):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.drop_oldest = drop_oldest
        self.dropped = 0
        self.high_water = 0
        self._items: list = []
        self._closed = False
        self._cond = threading.Condition()

    def put(self, item) -> None:
        with self._cond:
            if self._closed:
                raise _ClosedQueue()
            if len(self._items) >= self.capacity:
                if self.drop_oldest:
                    self._items.pop(0)
                    self.dropped += 1
                else:
                    while len(self._items) >= self.capacity and not self._closed:
                        self._cond.wait()
                    if self._closed:
                        raise _ClosedQueue()
            self._items.append(item)
            self.high_water = max(self.high_water, len(self._items))
            self._cond.notify_all()

    def get(self):
        with self._cond:
            while not self._items and not self._closed:
                self._cond.wait()
            if self._items:
                item = self._items.pop(0)
                self._cond.notify_all()
                return item
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()


def _classify_frame(classifier: Classifier, frame: Frame,
                    threshold: float = 0.5) -> StateEvent:
    t0 = time.perf_counter()
    try:
        confidence = classifier.classify(frame)
    except NumericError as exc:
        raise NumericError(f"frame {frame.index}: {exc}") from exc
    latency_ms = (time.perf_counter() - t0) * 1000.0
    return StateEvent(frame_index=frame.index, timestamp_ms=frame.timestamp_ms,
                      state=decide(confidence, threshold),
                      confidence=confidence, classify_latency_ms=latency_ms)


def run_pipeline(source: FrameSource, classifier: Classifier,
                 config: StreamConfig, dictionary: Dictionary | None = None,
                 sink: Optional[Callable[[DecodeEvent], None]] = None,
                 mode: str = "replay", emit_echoes: bool = False) -> PipelineReport:
    """Drive frames from the source through classification and decoding.

    Every DecodeEvent goes to the sink as it is produced (state echoes only
    when emit_echoes is set); the returned report carries the full run.
    """
    if mode not in ("replay", "live"):
        raise ValueError(f"mode must be 'replay' or 'live', got {mode!r}")
    dictionary = dictionary or Dictionary.default()
    decoder = Decoder(config, dictionary, emit_echoes=emit_echoes)
    latencies: list[float] = []
    events: list[DecodeEvent] = []
    state_events: list[StateEvent] = []

    def handle_decoded(emitted: list[DecodeEvent]) -> None:
        for ev in emitted:
            if not isinstance(ev, StateEcho):
                events.append(ev)
            if sink is not None:
                sink(ev)

    if mode == "replay":
        while True:
            frame = source.next()
            if frame is None:
                break
            sev = _classify_frame(classifier, frame)
            latencies.append(sev.classify_latency_ms)
            state_events.append(sev)
            handle_decoded(decoder.feed(sev))
        stats = LatencyStats.from_latencies(latencies, config.latency_budget_ms)
        return PipelineReport(stats=stats, events=events, state_events=state_events,
                              queue_high_water={}, dropped_frames=0)

    # Live mode: capture -> q1 (drop-oldest) -> classify -> q2 -> decode.
    q1 = BoundedQueue(capacity=config.fps, drop_oldest=True)
    q2 = BoundedQueue(capacity=max(2, config.fps), drop_oldest=False)
    errors: list[BaseException] = []
    period_s = config.frame_period_ms / 1000.0

    def capture() -> None:
        try:
            next_tick = time.monotonic()
            while True:
                frame = source.next()
                if frame is None:
                    break
                q1.put(frame)
                next_tick += period_s
                delay = next_tick - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
        except _ClosedQueue:
            pass
        except BaseException as exc:
            errors.append(exc)
        finally:
            q1.close()

    def classify() -> None:
        try:
            while True:
                frame = q1.get()
                if frame is None:
                    break
                sev = _classify_frame(classifier, frame)
                latencies.append(sev.classify_latency_ms)
                q2.put(sev)
        except _ClosedQueue:
            pass
        except BaseException as exc:
            errors.append(exc)
            q1.close()
        finally:
            q2.close()

    def decode() -> None:
        try:
            while True:
                sev = q2.get()
                if sev is None:
                    break
                state_events.append(sev)
                handle_decoded(decoder.feed(sev))
        except BaseException as exc:
            errors.append(exc)
            q1.close()
            q2.close()

    threads = [threading.Thread(target=fn, name=fn.__name__, daemon=True)
               for fn in (capture, classify, decode)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]

    stats = LatencyStats.from_latencies(latencies, config.latency_budget_ms)
    return PipelineReport(
        stats=stats, events=events, state_events=state_events,
        queue_high_water={"capture_to_classify": q1.high_water,
                          "classify_to_decode": q2.high_water},
        dropped_frames=q1.dropped,
    )
