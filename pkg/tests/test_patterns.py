import json
import random

import pytest

from blinkcomm import (DEFAULT_DICTIONARIES, Decoder, DecoderState, Dictionary,
                       EyeState, SequencingError, SessionEnded, SessionStarted,
                       StateEcho, StreamConfig, UnknownPattern, WordEmitted,
                       blink_count, decode_stream, event_from_payload,
                       is_normalized, normalize, pattern_for_count, step)

from conftest import FIXTURES, states_to_events
from oracles import collapse_runs_bruteforce, decode_segments


class TestNormalize:
    @pytest.mark.parametrize("raw,expected", [
        ("00000110000", "010"),
        ("", ""),
        ("111000111", "101"),
        ("0", "0"),
        ("1", "1"),
        ("0011", "01"),
        ("10101", "10101"),
        ("11111", "1"),
    ])
    def test_examples(self, raw, expected):
        assert normalize(raw) == expected

    def test_matches_bruteforce_on_random_strings(self):
        rnd = random.Random(42)
        for _ in range(2000):
            raw = "".join(rnd.choice("01") for _ in range(rnd.randrange(0, 30)))
            assert normalize(raw) == collapse_runs_bruteforce(raw)

    def test_idempotent(self):
        rnd = random.Random(7)
        for _ in range(200):
            raw = "".join(rnd.choice("01") for _ in range(rnd.randrange(0, 20)))
            once = normalize(raw)
            assert normalize(once) == once
            assert is_normalized(once)

    @pytest.mark.parametrize("bad", ["012", "ab", "1 0", "10\n"])
    def test_foreign_characters_rejected(self, bad):
        with pytest.raises(ValueError):
            normalize(bad)

    def test_is_normalized(self):
        assert is_normalized("10101")
        assert is_normalized("")
        assert not is_normalized("110")
        assert not is_normalized("00")


class TestBlinkCount:
    @pytest.mark.parametrize("pattern,count", [
        ("10101", 3), ("1", 1), ("0", 0), ("", 0), ("01", 1), ("010", 1),
    ])
    def test_examples(self, pattern, count):
        assert blink_count(pattern) == count

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            blink_count("110")

    @pytest.mark.parametrize("count", range(1, 20))
    def test_pattern_for_count_round_trip(self, count):
        pattern = pattern_for_count(count)
        assert pattern == "1" + "01" * (count - 1)
        assert is_normalized(pattern)
        assert blink_count(pattern) == count

    def test_pattern_for_count_rejects_zero(self):
        with pytest.raises(ValueError):
            pattern_for_count(0)


class TestDictionary:
    def test_default_tables_exact(self):
        assert DEFAULT_DICTIONARIES == {
            "words": {1: "Yes", 2: "No", 3: "Hi", 4: "I am",
                      5: "Good", 6: "Thanks", 7: "How are you?"},
            "mouse": {1: "Right", 2: "Left", 3: "Click R.", 4: "Click L.",
                      5: "Up", 6: "Down", 7: "Hold click"},
            "keyboard": {1: "Tab", 2: "Enter", 3: "Back", 4: "Esc",
                         5: "Scroll up", 6: "Scroll down", 7: "Space"},
        }
        for entries in DEFAULT_DICTIONARIES.values():
            assert sorted(entries) == list(range(1, 8))

    @pytest.mark.parametrize("mode,count,token", [
        ("words", 3, "Hi"),
        ("words", 1, "Yes"),
        ("keyboard", 7, "Space"),
        ("mouse", 2, "Left"),
    ])
    def test_lookup(self, mode, count, token):
        assert Dictionary.default(mode).lookup(count) == token

    def test_lookup_unknown_count_is_none(self):
        assert Dictionary.default("words").lookup(9) is None

    def test_lookup_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            Dictionary.default("words").lookup(0)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            Dictionary.default("morse")

    def test_from_file(self, tmp_path):
        doc = {"words": {"1": "ja", "2": "nein"}}
        path = tmp_path / "dict.json"
        path.write_text(json.dumps(doc))
        d = Dictionary.from_file(path, "words")
        assert d.lookup(1) == "ja"
        assert d.lookup(2) == "nein"
        assert d.lookup(3) is None
        with pytest.raises(ValueError):
            Dictionary.from_file(path, "mouse")


class TestEventPayloads:
    @pytest.mark.parametrize("event", [
        SessionStarted(3900),
        SessionEnded(12300, 2),
        WordEmitted(6600, 3, "10101", "Hi"),
        UnknownPattern(5000, 9),
    ])
    def test_round_trip(self, event):
        assert event_from_payload(event.to_payload()) == event

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            event_from_payload({"kind": "nonsense", "t_ms": 0})


def run(states, config, dictionary=None):
    return decode_stream(states_to_events(states, fps=config.fps), config,
                         dictionary=dictionary)


class TestDecoderTraces:
    def test_toggle_on_at_fortieth_closed_frame(self, config10):
        events = run("1" * 40, config10)
        assert events == [SessionStarted(3900)]

    def test_long_closure_toggles_once(self, config10):
        events = run("1" * 80, config10)
        assert events == [SessionStarted(3900)]

    def test_no_events_before_toggle(self, config10):
        assert run("1" * 39, config10) == []
        assert run("0" * 50, config10) == []
        # Blinks outside a session are ignored entirely.
        assert run("0110" * 10, config10) == []

    def test_two_blinks_make_a_word(self, config10):
        states = "1" * 40 + "0" * 5 + "11" + "000" + "11" + "0" * 10
        events = run(states, config10)
        assert events == [
            SessionStarted(3900),
            WordEmitted(6100, 2, "101", "No"),
        ]

    def test_single_frame_closure_is_noise(self, config10):
        states = "1" * 40 + "0" * 5 + "1" + "0" * 10
        events = run(states, config10)
        assert events == [SessionStarted(3900)]

    def test_word_fires_exactly_at_gap(self, config10):
        prefix = "1" * 40 + "0" * 5 + "11"
        assert len(run(prefix + "0" * 9, config10)) == 1   # gap not yet reached
        events = run(prefix + "0" * 10, config10)
        assert len(events) == 2
        word = events[1]
        # 47 frames precede the gap; the word lands on the tenth Open frame.
        assert word == WordEmitted(5600, 1, "1", "Yes")

    def test_noise_closure_extends_the_gap_count(self, config10):
        # After 9 Open frames a 1-frame noise closure overshoots the gap:
        # the word fires on the next Open frame.
        prefix = "1" * 40 + "0" * 5 + "11"
        states = prefix + "0" * 9 + "1" + "0"
        events = run(states, config10)
        assert len(events) == 2
        assert isinstance(events[1], WordEmitted)
        assert events[1].blink_count == 1
        assert events[1].timestamp_ms == 5700

    def test_unknown_count_reported(self, config10):
        blinks = ("11" + "000") * 9
        states = "1" * 40 + "0" * 5 + blinks[:-3] + "0" * 10
        events = run(states, config10)
        assert events[-1] == UnknownPattern(
            events[-1].timestamp_ms, 9)

    def test_toggle_off_discards_pending(self, config10):
        states = "1" * 40 + "0" * 5 + "11" + "000" + "11" + "000" + "1" * 40
        events = run(states, config10)
        assert events == [
            SessionStarted(3900),
            SessionEnded(events[1].timestamp_ms, 2),
        ]
        assert events[1].timestamp_ms == (40 + 5 + 2 + 3 + 2 + 3 + 40 - 1) * 100

    def test_mode_changes_token_only(self, config10):
        states = "1" * 40 + "0" * 5 + "11" + "000" + "11" + "0" * 10
        words = run(states, config10, Dictionary.default("words"))
        keys = run(states, config10, Dictionary.default("keyboard"))
        assert words[1].token == "No"
        assert keys[1].token == "Enter"
        assert words[1].timestamp_ms == keys[1].timestamp_ms
        assert words[1].pattern == keys[1].pattern

    def test_hello_fixture(self, config10):
        doc = json.loads((FIXTURES / "hello_script.json").read_text())
        states = []
        for seg in doc["segments"]:
            frames = -(-seg["duration_ms"] * 10 // 1000)
            states.extend(("1" if seg["state"] == "closed" else "0") * frames)
        events = run("".join(states), config10)
        expected = [event_from_payload(json.loads(line))
                    for line in (FIXTURES / "hello_events.jsonl").read_text().splitlines()]
        assert events == expected

    def test_minute_fixture(self, config10):
        doc = json.loads((FIXTURES / "minute_script.json").read_text())
        states = []
        for seg in doc["segments"]:
            frames = -(-seg["duration_ms"] * 10 // 1000)
            states.extend(("1" if seg["state"] == "closed" else "0") * frames)
        assert len(states) == 600
        events = run("".join(states), config10)
        expected = [event_from_payload(json.loads(line))
                    for line in (FIXTURES / "minute_events.jsonl").read_text().splitlines()]
        assert events == expected


class TestDecoderProperties:
    def _random_states(self, rnd, n_runs):
        out = []
        for _ in range(n_runs):
            state = rnd.choice("01")
            out.append(state * rnd.randrange(1, 50))
        return "".join(out)

    def test_matches_segment_oracle_on_random_runs(self, config10):
        # The oracle reasons about whole segments, so runs must alternate.
        rnd = random.Random(123)
        for _ in range(50):
            segments = []
            state = rnd.choice(["open", "closed"])
            for _ in range(rnd.randrange(1, 25)):
                segments.append((state, rnd.randrange(1, 50) * 100))
                state = "open" if state == "closed" else "closed"
            states = "".join(
                ("1" if s == "closed" else "0") * (d // 100) for s, d in segments)
            got = run(states, config10)
            want = decode_segments(segments, fps=10)
            assert len(got) == len(want)
            for g, w in zip(got, want):
                payload = g.to_payload()
                assert payload["t_ms"] == w.t_ms
                assert payload["kind"] == w.kind
                if w.kind == "word":
                    assert payload["blink_count"] == w.blink_count
                if w.kind == "session_ended":
                    assert payload["discarded_blinks"] == w.discarded

    def test_session_parity(self, config10):
        rnd = random.Random(5)
        for _ in range(30):
            states = self._random_states(rnd, 40)
            events = run(states, config10)
            starts = sum(isinstance(e, SessionStarted) for e in events)
            ends = sum(isinstance(e, SessionEnded) for e in events)
            assert 0 <= starts - ends <= 1
            kinds = [type(e) for e in events
                     if isinstance(e, (SessionStarted, SessionEnded))]
            assert kinds == [SessionStarted, SessionEnded] * (len(kinds) // 2) \
                + ([SessionStarted] if len(kinds) % 2 else [])

    def test_split_anywhere_equals_one_shot(self, config10):
        states = "1" * 40 + "0" * 5 + "11" + "000" + "11" + "0" * 10 + "1" * 40
        events = states_to_events(states, fps=10)
        whole = decode_stream(events, config10)
        for cut in range(len(events) + 1):
            state = DecoderState.initial(config10)
            head = decode_stream(events[:cut], config10, state=state)
            # decode_stream mutates nothing: recover the carry state via step.
            carry = DecoderState.initial(config10)
            out = []
            dictionary = Dictionary.default()
            for ev in events[:cut]:
                carry, emitted = step(carry, ev, dictionary)
                out.extend(emitted)
            assert out == head
            tail = decode_stream(events[cut:], config10, state=carry)
            assert out + tail == whole

    def test_rate_invariance(self):
        doc = json.loads((FIXTURES / "hello_script.json").read_text())
        tokens = {}
        for fps in (10, 20, 50):
            config = StreamConfig(fps=fps)
            states = []
            for seg in doc["segments"]:
                frames = -(-seg["duration_ms"] * fps // 1000)
                states.extend(("1" if seg["state"] == "closed" else "0") * frames)
            events = run("".join(states), config)
            tokens[fps] = [(type(e).__name__, getattr(e, "token", None))
                           for e in events]
        assert tokens[10] == tokens[20] == tokens[50]

    def test_decoder_wrapper_matches_decode_stream(self, config10):
        states = "1" * 40 + "0" * 5 + "11" + "000" + "11" + "0" * 10
        events = states_to_events(states, fps=10)
        decoder = Decoder(config10)
        fed = []
        for ev in events:
            fed.extend(decoder.feed(ev))
        assert fed == decode_stream(events, config10)

    def test_echoes_wrap_every_frame(self, config10):
        states = "1" * 40 + "0" * 5
        events = states_to_events(states, fps=10)
        out = decode_stream(events, config10, emit_echoes=True)
        echoes = [e for e in out if isinstance(e, StateEcho)]
        assert len(echoes) == len(events)
        assert [e.event for e in echoes] == events
        rest = [e for e in out if not isinstance(e, StateEcho)]
        assert rest == decode_stream(events, config10)

    def test_empty_stream(self, config10):
        assert decode_stream([], config10) == []


class TestSequencing:
    def test_repeated_index_rejected(self, config10):
        events = states_to_events("00", fps=10)
        decoder = Decoder(config10)
        decoder.feed(events[0])
        with pytest.raises(SequencingError):
            decoder.feed(events[0])

    def test_backwards_index_rejected(self, config10):
        events = states_to_events("000", fps=10)
        decoder = Decoder(config10)
        decoder.feed(events[2])
        with pytest.raises(SequencingError):
            decoder.feed(events[0])

    def test_gaps_allowed(self, config10):
        # Dropped frames skip indices; the decoder only demands forward motion.
        events = states_to_events("0000", fps=10)
        decoder = Decoder(config10)
        decoder.feed(events[0])
        assert decoder.feed(events[3]) == []
