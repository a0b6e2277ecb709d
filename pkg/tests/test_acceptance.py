"""Release-gate checks for the whole package.

Each test covers one gate and records a single PASS or FAIL line, shown in
the "release gates" section at the end of the pytest run. Expected values
come from the independent oracles in oracles.py or are frozen literals;
bounds are pinned in-line. A failing gate here means the package must not
ship.
"""

from __future__ import annotations

import filecmp
import random
import time

import numpy as np
import pytest

from blinkcomm import (
    DEFAULT_DICTIONARIES,
    Decoder,
    Dictionary,
    HeuristicClassifier,
    InfeasibleError,
    ModelCandidate,
    NetClassifier,
    ScriptSource,
    SessionEnded,
    SessionStarted,
    StreamConfig,
    TinyNet,
    TrainConfig,
    WordEmitted,
    decode_stream,
    evaluate,
    generate_synthetic,
    gradient_check,
    measure_latency,
    normalize,
    pattern_for_count,
    run_pipeline,
    select_model,
    train,
)
from blinkcomm.bench import load_candidates
from blinkcomm.cli import main as cli_main

from conftest import FIXTURES, states_to_events
from oracles import collapse_runs_bruteforce, select_bruteforce


@pytest.fixture
def verdict(request):
    """Record the gate's one-line result for the end-of-run section."""

    def record(name: str, ok: bool, detail: str) -> None:
        status = "PASS" if ok else "FAIL"
        line = f"[gate] {name}: {status} ({detail})"
        if not hasattr(request.config, "_gate_lines"):
            request.config._gate_lines = []
        request.config._gate_lines.append(line)
        print(line)
        assert ok, f"{name}: {detail}"

    return record


@pytest.fixture(scope="module")
def trained():
    """Train once on the canonical 4,000/1,000 split; shared by two gates."""
    dataset = generate_synthetic(2500, seed=42)
    train_set, val_set = dataset.split(4000)
    config = TrainConfig(epochs=100, batch_size=16, learning_rate=0.01,
                         seed=42, early_stop_patience=5)
    start = time.perf_counter()
    model, report = train(train_set, config, validation=val_set)
    seconds = time.perf_counter() - start
    return {"classifier": NetClassifier(model), "report": report,
            "seconds": seconds, "val_set": val_set}


def test_normalization_matches_bruteforce_oracle(verdict):
    start = time.perf_counter()
    rnd = random.Random(42)
    mismatches = 0
    checked = 0
    for _ in range(10_000):
        raw = "".join(rnd.choices("01", k=rnd.randrange(0, 1001)))
        checked += 1
        if normalize(raw) != collapse_runs_bruteforce(raw):
            mismatches += 1
    spot = normalize("00000110000")
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and spot == "010" and elapsed < 5.0
    verdict("normalization equals brute-force run collapse", ok,
            f"{checked} random strings, {mismatches} mismatches, "
            f"'00000110000' -> {spot!r}, {elapsed:.2f}s (bound 5s)")


def test_dictionary_tables_and_pattern_formula(verdict):
    expected = {
        "words": {1: "Yes", 2: "No", 3: "Hi", 4: "I am",
                  5: "Good", 6: "Thanks", 7: "How are you?"},
        "mouse": {1: "Right", 2: "Left", 3: "Click R.", 4: "Click L.",
                  5: "Up", 6: "Down", 7: "Hold click"},
        "keyboard": {1: "Tab", 2: "Enter", 3: "Back", 4: "Esc",
                     5: "Scroll up", 6: "Scroll down", 7: "Space"},
    }
    pair_hits = sum(
        1
        for mode, table in expected.items()
        for count, token in table.items()
        if DEFAULT_DICTIONARIES.get(mode, {}).get(count) == token
    )
    tables_exact = DEFAULT_DICTIONARIES == expected
    formula_exact = all(
        pattern_for_count(n) == "1" + "01" * (n - 1) for n in range(1, 8)
    )
    lookups_exact = all(
        Dictionary.default(mode).lookup(count) == token
        for mode, table in expected.items()
        for count, token in table.items()
    )
    ok = pair_hits == 21 and tables_exact and formula_exact and lookups_exact
    verdict("dictionary fidelity", ok,
            f"{pair_hits}/21 (count, token) pairs exact, "
            f"patterns n=1..7 match '1'+'01'*(n-1): {formula_exact}")


def test_timing_semantics_at_10fps(verdict):
    config = StreamConfig(fps=10)

    def run(states: str):
        return decode_stream(states_to_events(states), config)

    # (a) 200 ms debounce: a 2-frame closure is a blink, 1 frame is noise.
    two = run("1" * 40 + "0" * 5 + "11" + "0" * 10)
    one = run("1" * 40 + "0" * 5 + "1" + "0" * 10)
    blink_ok = (
        [e for e in two if isinstance(e, WordEmitted)]
        == [WordEmitted(timestamp_ms=5600, blink_count=1,
                        pattern="1", token="Yes")]
        and not any(isinstance(e, WordEmitted) for e in one)
    )

    # (b) the word fires on the 10th open frame, never the 9th.
    nine = run("1" * 40 + "0" * 5 + "11" + "0" * 9)
    ten = run("1" * 40 + "0" * 5 + "11" + "0" * 10)
    gap_ok = (not any(isinstance(e, WordEmitted) for e in nine)
              and any(isinstance(e, WordEmitted) for e in ten))

    # (c) 40 closed frames toggle the session and never count as a blink.
    toggled = run("1" * 40)
    round_trip = run("1" * 40 + "0" * 5 + "1" * 40)
    toggle_ok = (
        toggled == [SessionStarted(timestamp_ms=3900)]
        and round_trip == [SessionStarted(timestamp_ms=3900),
                           SessionEnded(timestamp_ms=8400,
                                        discarded_blinks=0)]
    )

    # (d) feeding any prefix/suffix split must equal the one-shot decode.
    states = ("1" * 40 + "0" * 5 + "11" + "000" + "11" + "0" * 10
              + "1" + "000" + "11" + "0" * 10 + "1" * 40 + "000")
    events = states_to_events(states)
    whole = decode_stream(events, config)
    bad_cuts = 0
    for cut in range(len(events) + 1):
        decoder = Decoder(config)
        out = []
        for event in events[:cut]:
            out.extend(decoder.feed(event))
        for event in events[cut:]:
            out.extend(decoder.feed(event))
        if out != whole:
            bad_cuts += 1
    split_ok = bad_cuts == 0 and len(whole) > 0

    ok = blink_ok and gap_ok and toggle_ok and split_ok
    verdict("timing semantics at 10 fps", ok,
            f"debounce {blink_ok}, word gap {gap_ok}, toggle {toggle_ok}, "
            f"{len(events) + 1} stream splits with {bad_cuts} mismatches")


def test_latency_constrained_selection(verdict):
    rows = load_candidates(FIXTURES / "candidates.json")

    at_100 = select_model(rows, budget_ms=100.0).name
    unbounded = select_model(rows, budget_ms=None).name
    with pytest.raises(InfeasibleError) as err:
        select_model(rows, budget_ms=13.0)
    fixture_ok = (at_100 == "InceptionV3" and unbounded == "ResNet"
                  and err.value.min_latency_ms == 13.64)

    rnd = random.Random(7)
    mismatches = 0
    for _ in range(1_000):
        cands = [
            ModelCandidate(name=f"m{j}", accuracy=round(rnd.random(), 4),
                           avg_latency_ms=round(rnd.uniform(1.0, 300.0), 2))
            for j in range(rnd.randrange(1, 9))
        ]
        budget = rnd.choice(
            [None, round(rnd.uniform(1.0, 300.0), 2), cands[0].avg_latency_ms]
        )
        want = select_bruteforce(
            [(c.name, c.accuracy, c.avg_latency_ms) for c in cands], budget
        )
        try:
            got = select_model(cands, budget_ms=budget).name
        except InfeasibleError:
            got = None
        if got != (want[0] if want is not None else None):
            mismatches += 1

    ok = fixture_ok and mismatches == 0
    verdict("latency-constrained model selection", ok,
            f"budget 100 -> {at_100}, unbounded -> {unbounded}, "
            f"budget 13 infeasible: {fixture_ok}, "
            f"1000 random lists, {mismatches} brute-force mismatches")


def test_gradients_match_finite_differences(verdict):
    start = time.perf_counter()
    rng_seed = random.Random(42)
    worst = 0.0
    for _ in range(20):
        model_rng = np.random.default_rng(rng_seed.randrange(1 << 31))
        model = TinyNet.init_random(rng_seed.randrange(4, 24), model_rng)
        batch = generate_synthetic(rng_seed.randrange(2, 6),
                                   seed=rng_seed.randrange(1 << 16))
        worst = max(worst, gradient_check(model, batch))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 30.0
    verdict("analytic gradients vs finite differences", ok,
            f"20 model/batch pairs, max relative error {worst:.2e} "
            f"(bound 1e-4), {elapsed:.1f}s (bound 30s)")


def test_synthetic_training_reaches_target(trained, verdict):
    val_set = trained["val_set"]
    epochs_run = len(trained["report"].train_loss)

    net_acc, _ = evaluate(trained["classifier"], val_set)

    start = time.perf_counter()
    heuristic_acc, _ = evaluate(HeuristicClassifier(), val_set)
    heuristic_seconds = time.perf_counter() - start

    ok = (net_acc >= 0.99 and heuristic_acc >= 0.99
          and epochs_run <= 100
          and trained["seconds"] < 120.0 and heuristic_seconds < 120.0)
    verdict("synthetic training accuracy", ok,
            f"net {net_acc:.4f} and heuristic {heuristic_acc:.4f} on 1000 "
            f"held-out frames (floor 0.99), {epochs_run} epochs, "
            f"train {trained['seconds']:.1f}s / eval {heuristic_seconds:.1f}s "
            f"(bound 120s each)")


def test_latency_within_budget(trained, verdict):
    frames = list(trained["val_set"].frames())
    assert len(frames) == 1000

    heuristic_stats = measure_latency(HeuristicClassifier(), frames,
                                      budget_ms=100.0)
    net_stats = measure_latency(trained["classifier"], frames,
                                budget_ms=100.0)

    source = ScriptSource.from_file(FIXTURES / "minute_script.json",
                                    fps=10, seed=42)
    report = run_pipeline(source, HeuristicClassifier(), StreamConfig(fps=10))
    replay_frames = len(report.state_events)

    ok = (heuristic_stats.p99_ms < 100.0 and net_stats.p99_ms < 100.0
          and replay_frames == 600 and report.stats.budget_violations == 0)
    verdict("classification latency budget", ok,
            f"p99 heuristic {heuristic_stats.p99_ms:.3f}ms / net "
            f"{net_stats.p99_ms:.3f}ms over 1000 frames (bound 100ms), "
            f"60s replay: {replay_frames} frames, "
            f"{report.stats.budget_violations} budget violations")


def test_replay_determinism(tmp_path, verdict):
    identical = []
    events_seen = 0
    for script in ("hello_script.json", "minute_script.json"):
        logs = []
        for run in (1, 2):
            out = tmp_path / f"{script}.{run}.jsonl"
            rc = cli_main(["decode", "--source",
                           f"script:{FIXTURES / script}",
                           "--events-out", str(out)])
            assert rc == 0
            logs.append(out)
        events_seen += len(logs[0].read_text().splitlines())
        identical.append(filecmp.cmp(logs[0], logs[1], shallow=False))

    ok = all(identical) and events_seen > 0
    verdict("replay determinism", ok,
            f"2 scripts decoded twice each, byte-identical logs: "
            f"{identical}, {events_seen} events logged")
