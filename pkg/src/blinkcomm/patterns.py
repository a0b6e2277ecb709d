"""Blink pattern decoding: normalization, dictionaries, and the session
state machine.

The decoder consumes a timed stream of Open/Closed verdicts and produces
communication events under four timing rules (thresholds converted from
milliseconds to frame counts per stream):

* a closure at least session_toggle long toggles the session on/off and is
  never a blink;
* inside a session, a closure at least min_closed long (but shorter than
  the toggle) counts one blink when it ends;
* a closure shorter than min_closed is noise and reads as Open;
* an Open stretch reaching word_gap ends the word: the pending blink count
  is looked up in the dictionary and emitted.

Out of a session only the toggle rule applies. Ending a session mid-word
discards the pending blinks but reports how many were dropped.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from itertools import groupby
from pathlib import Path
from typing import Iterable, Mapping, Union

from .core import EyeState, StateEvent, StreamConfig
from .errors import SequencingError

_ALPHABET = frozenset("01")

DEFAULT_DICTIONARIES: dict[str, dict[int, str]] = {
    "words": {
        1: "Yes", 2: "No", 3: "Hi", 4: "I am",
        5: "Good", 6: "Thanks", 7: "How are you?",
    },
    "mouse": {
        1: "Right", 2: "Left", 3: "Click R.", 4: "Click L.",
        5: "Up", 6: "Down", 7: "Hold click",
    },
    "keyboard": {
        1: "Tab", 2: "Enter", 3: "Back", 4: "Esc",
        5: "Scroll up", 6: "Scroll down", 7: "Space",
    },
}


def normalize(raw: str) -> str:
    """Collapse every maximal run of equal characters to one character.

    "00000110000" becomes "010".
    """
    bad = set(raw) - _ALPHABET
    if bad:
        raise ValueError(f"pattern may contain only '0'/'1', found {sorted(bad)}")
    return "".join(ch for ch, _ in groupby(raw))


def is_normalized(pattern: str) -> bool:
    return all(a != b for a, b in zip(pattern, pattern[1:]))


def blink_count(pattern: str) -> int:
    """Number of closures in a normalized pattern (its '1' characters)."""
    bad = set(pattern) - _ALPHABET
    if bad:
        raise ValueError(f"pattern may contain only '0'/'1', found {sorted(bad)}")
    if not is_normalized(pattern):
        raise ValueError(f"pattern {pattern!r} is not normalized")
    return pattern.count("1")


def pattern_for_count(count: int) -> str:
    """Canonical normalized pattern for a blink count: 1, 101, 10101, ..."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return "1" + "01" * (count - 1)


@dataclass(frozen=True)
class Dictionary:
    """Blink-count to token mapping for one mode (words/mouse/keyboard)."""

    mode: str
    entries: Mapping[int, str]

    def __post_init__(self) -> None:
        for count in self.entries:
            if not isinstance(count, int) or count < 1:
                raise ValueError(f"dictionary keys must be positive ints, got {count!r}")

    @classmethod
    def default(cls, mode: str = "words") -> "Dictionary":
        if mode not in DEFAULT_DICTIONARIES:
            raise ValueError(f"unknown mode {mode!r}; "
                             f"expected one of {sorted(DEFAULT_DICTIONARIES)}")
        return cls(mode=mode, entries=dict(DEFAULT_DICTIONARIES[mode]))

    @classmethod
    def from_file(cls, path: str | os.PathLike, mode: str = "words") -> "Dictionary":
        """Load {mode: {count: token}} from a JSON document."""
        doc = json.loads(Path(path).read_text())
        if not isinstance(doc, dict) or mode not in doc:
            raise ValueError(f"{path}: no entry for mode {mode!r}")
        entries = {int(k): str(v) for k, v in doc[mode].items()}
        return cls(mode=mode, entries=entries)

    def lookup(self, count: int) -> str | None:
        """Token for a blink count; None marks an unknown count."""
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        return self.entries.get(count)


# --- Decode events ----------------------------------------------------------

@dataclass(frozen=True)
class SessionStarted:
    timestamp_ms: int

    def to_payload(self) -> dict:
        return {"kind": "session_started", "t_ms": self.timestamp_ms}


@dataclass(frozen=True)
class SessionEnded:
    timestamp_ms: int
    discarded_blinks: int

    def to_payload(self) -> dict:
        return {"kind": "session_ended", "t_ms": self.timestamp_ms,
                "discarded_blinks": self.discarded_blinks}


@dataclass(frozen=True)
class WordEmitted:
    timestamp_ms: int
    blink_count: int
    pattern: str
    token: str

    def to_payload(self) -> dict:
        return {"kind": "word", "t_ms": self.timestamp_ms,
                "blink_count": self.blink_count, "pattern": self.pattern,
                "token": self.token}


@dataclass(frozen=True)
class UnknownPattern:
    timestamp_ms: int
    blink_count: int

    def to_payload(self) -> dict:
        return {"kind": "unknown_pattern", "t_ms": self.timestamp_ms,
                "blink_count": self.blink_count}


@dataclass(frozen=True)
class StateEcho:
    """Pass-through copy of an input StateEvent, for observers."""

    event: StateEvent


DecodeEvent = Union[SessionStarted, SessionEnded, WordEmitted, UnknownPattern, StateEcho]

_PAYLOAD_KINDS = {
    "session_started": SessionStarted,
    "session_ended": SessionEnded,
    "word": WordEmitted,
    "unknown_pattern": UnknownPattern,
}


def event_from_payload(payload: Mapping) -> DecodeEvent:
    """Parse a wire payload back into its decode event (inverse of to_payload)."""
    kind = payload.get("kind")
    if kind not in _PAYLOAD_KINDS:
        raise ValueError(f"unknown decode event kind {kind!r}")
    t_ms = payload["t_ms"]
    if kind == "session_started":
        return SessionStarted(t_ms)
    if kind == "session_ended":
        return SessionEnded(t_ms, payload["discarded_blinks"])
    if kind == "word":
        return WordEmitted(t_ms, payload["blink_count"], payload["pattern"],
                           payload["token"])
    return UnknownPattern(t_ms, payload["blink_count"])


# --- Decoder state machine --------------------------------------------------

@dataclass(frozen=True)
class DecoderState:
    """Value-type decoder state; step returns an updated copy.

    open_equivalent counts the effective Open stretch for the word-gap rule:
    it grows through genuine Open frames and through noise closures (which
    read as Open), freezes while a closure is pending, and resets when a
    closure proves genuine.
    """

    min_closed_frames: int
    word_gap_frames: int
    session_toggle_frames: int
    session_active: bool = False
    run_state: EyeState | None = None
    run_length: int = 0
    run_toggled: bool = False
    pending_blinks: int = 0
    open_equivalent: int = 0
    last_frame_index: int = -1

    @classmethod
    def initial(cls, config: StreamConfig) -> "DecoderState":
        return cls(min_closed_frames=config.min_closed_frames,
                   word_gap_frames=config.word_gap_frames,
                   session_toggle_frames=config.session_toggle_frames)


def step(state: DecoderState, event: StateEvent, dictionary: Dictionary,
         emit_echoes: bool = False) -> tuple[DecoderState, list[DecodeEvent]]:
    """Advance the decoder by one StateEvent.

    Returns the new state and the decode events triggered by this frame, in
    emission order (echo first when enabled).
    """
    if event.frame_index <= state.last_frame_index:
        raise SequencingError(
            f"frame {event.frame_index} arrived after frame {state.last_frame_index}"
        )
    out: list[DecodeEvent] = [StateEcho(event)] if emit_echoes else []

    session_active = state.session_active
    run_state = state.run_state
    run_length = state.run_length
    run_toggled = state.run_toggled
    pending = state.pending_blinks
    open_equiv = state.open_equivalent

    if run_state is None or event.state is run_state:
        run_state = event.state
        run_length += 1
        if event.state is EyeState.OPEN:
            open_equiv += 1
    else:
        if run_state is EyeState.CLOSED:
            # A closure just ended (this frame is Open).
            if run_length < state.min_closed_frames:
                open_equiv += run_length + 1  # noise reads as Open
            else:
                if session_active and not run_toggled:
                    pending += 1
                open_equiv = 1
        run_state = event.state
        run_length = 1
        run_toggled = False

    if event.state is EyeState.CLOSED:
        if run_length == state.min_closed_frames:
            # The closure is now known genuine: the Open stretch has ended.
            open_equiv = 0
        if run_length == state.session_toggle_frames and not run_toggled:
            run_toggled = True
            if session_active:
                out.append(SessionEnded(event.timestamp_ms, discarded_blinks=pending))
                pending = 0
                session_active = False
            else:
                out.append(SessionStarted(event.timestamp_ms))
                session_active = True
    else:
        if session_active and pending >= 1 and open_equiv >= state.word_gap_frames:
            token = dictionary.lookup(pending)
            if token is None:
                out.append(UnknownPattern(event.timestamp_ms, blink_count=pending))
            else:
                out.append(WordEmitted(event.timestamp_ms, blink_count=pending,
                                       pattern=pattern_for_count(pending),
                                       token=token))
            pending = 0

    new_state = replace(
        state,
        session_active=session_active,
        run_state=run_state,
        run_length=run_length,
        run_toggled=run_toggled,
        pending_blinks=pending,
        open_equivalent=open_equiv,
        last_frame_index=event.frame_index,
    )
    return new_state, out


def decode_stream(events: Iterable[StateEvent], config: StreamConfig,
                  dictionary: Dictionary | None = None,
                  state: DecoderState | None = None,
                  emit_echoes: bool = False) -> list[DecodeEvent]:
    """Left fold of step over an event stream from the given (or initial) state.

    Output equals the concatenation of per-event step outputs, so feeding a
    stream in pieces with carried state gives identical results.
    """
    d = dictionary or Dictionary.default()
    s = state if state is not None else DecoderState.initial(config)
    out: list[DecodeEvent] = []
    for event in events:
        s, emitted = step(s, event, d, emit_echoes=emit_echoes)
        out.extend(emitted)
    return out


class Decoder:
    """Stateful convenience wrapper around step for incremental feeding."""

    def __init__(self, config: StreamConfig, dictionary: Dictionary | None = None,
                 emit_echoes: bool = False):
        self.dictionary = dictionary or Dictionary.default()
        self.emit_echoes = emit_echoes
        self.state = DecoderState.initial(config)

    def feed(self, event: StateEvent) -> list[DecodeEvent]:
        self.state, out = step(self.state, event, self.dictionary,
                               emit_echoes=self.emit_echoes)
        return out
