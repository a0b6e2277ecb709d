"""Command-line entry point.

Commands: gen-data, train, grad-check, eval, sweep, select, decode, run,
serve. Exit codes: 0 success, 1 usage error, 2 runtime error. Machine
outputs go to files named by flags; summaries go to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, gateway
from .classifier import (TinyNet, TrainConfig, gradient_check, load_model,
                         make_classifier, save_model, train)
from .core import StreamConfig
from .errors import InfeasibleError
from .patterns import Dictionary, SessionEnded, SessionStarted, UnknownPattern, WordEmitted
from .pipeline import DirectorySource, ByteStreamSource, ScriptSource, run_pipeline
from .synthetic import LabeledDataset, generate_synthetic

DEFAULT_SEED = 42


def _add_stream_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fps", type=int, default=10)
    p.add_argument("--budget-ms", type=int, default=100)
    p.add_argument("--min-closed-ms", type=int, default=200)
    p.add_argument("--word-gap-ms", type=int, default=1000)
    p.add_argument("--session-toggle-ms", type=int, default=4000)


def _stream_config(args) -> StreamConfig:
    return StreamConfig(fps=args.fps, latency_budget_ms=args.budget_ms,
                        min_closed_ms=args.min_closed_ms,
                        word_gap_ms=args.word_gap_ms,
                        session_toggle_ms=args.session_toggle_ms)


def _add_dict_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dict", dest="dict_file", default=None,
                   help="dictionary JSON file (default: built-in)")
    p.add_argument("--mode", choices=("words", "mouse", "keyboard"),
                   default="words")


def _dictionary(args) -> Dictionary:
    if args.dict_file:
        return Dictionary.from_file(args.dict_file, mode=args.mode)
    return Dictionary.default(args.mode)


def _make_source(spec: str, fps: int, seed: int):
    if spec.startswith("dir:"):
        return DirectorySource(spec[4:], fps=fps)
    if spec.startswith("script:"):
        return ScriptSource.from_file(spec[7:], fps=fps, seed=seed)
    if spec == "live":
        return ByteStreamSource(sys.stdin.buffer)
    raise ValueError(f"unknown source spec {spec!r}; "
                     "use dir:<path>, script:<path>, or live")


def _split_dataset(data_dir: str, val_fraction: float, seed: int):
    dataset = LabeledDataset.load(data_dir).shuffled(seed)
    n_val = int(len(dataset) * val_fraction)
    if n_val == 0 or n_val == len(dataset):
        return dataset, None
    train_set, val_set = dataset.split(len(dataset) - n_val)
    return train_set, val_set


def _write_json(path: str | None, doc: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _event_line(event) -> str:
    if isinstance(event, SessionStarted):
        return f"[{event.timestamp_ms:>7}ms] session started"
    if isinstance(event, SessionEnded):
        return (f"[{event.timestamp_ms:>7}ms] session ended "
                f"(discarded blinks: {event.discarded_blinks})")
    if isinstance(event, WordEmitted):
        return (f"[{event.timestamp_ms:>7}ms] {event.token}  "
                f"({event.blink_count} blinks, pattern {event.pattern})")
    if isinstance(event, UnknownPattern):
        return f"[{event.timestamp_ms:>7}ms] unknown pattern ({event.blink_count} blinks)"
    return str(event)


# --- commands ----------------------------------------------------------------

def cmd_gen_data(args) -> int:
    dataset = generate_synthetic(args.count, seed=args.seed)
    dataset.save(args.out)
    print(f"wrote {len(dataset)} frames ({args.count} per class) to {args.out}")
    return 0


def cmd_train(args) -> int:
    train_set, val_set = _split_dataset(args.data, args.val_fraction, args.seed)
    config = TrainConfig(batch_size=args.batch_size, epochs=args.epochs,
                         learning_rate=args.lr, seed=args.seed,
                         hidden_dim=args.hidden,
                         early_stop_patience=args.patience)
    init = None
    if args.init:
        init = load_model(args.init)
        if not isinstance(init, TinyNet):
            print(f"error: --init {args.init} is not a network model",
                  file=sys.stderr)
            return 2
    model, report = train(train_set, config, init=init, validation=val_set)
    save_model(model, args.out)
    _write_json(args.report, report.to_dict())
    print(f"trained {config.epochs} epochs on {len(train_set)} frames; "
          f"validation accuracy {report.final_val_accuracy:.4f} "
          f"(best at epoch {report.epoch_of_best}); model -> {args.out}")
    return 0


def cmd_grad_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    model = TinyNet.init_random(args.hidden, rng)
    batch = generate_synthetic(max(1, args.batch_size // 2), seed=args.seed)
    error = gradient_check(model, batch, epsilon=args.epsilon)
    print(f"max relative gradient error: {error:.3e} (tolerance {args.tol:.0e})")
    return 0 if error < args.tol else 2


def cmd_eval(args) -> int:
    test_set = LabeledDataset.load(args.data)
    classifier = make_classifier(args.classifier)
    accuracy, stats = bench.evaluate(classifier, test_set,
                                     repetitions=args.repetitions,
                                     budget_ms=args.budget_ms)
    print(f"{classifier.name()}: accuracy {accuracy:.4f} on {len(test_set)} frames; "
          f"latency mean {stats.mean_ms:.2f}ms p99 {stats.p99_ms:.2f}ms "
          f"({stats.budget_violations} over budget)")
    _write_json(args.report, {"classifier": classifier.name(),
                              "accuracy": accuracy, "stats": stats.to_dict()})
    return 0


def cmd_sweep(args) -> int:
    train_set, val_set = _split_dataset(args.data, args.val_fraction, args.seed)
    batch_sizes = [int(b) for b in args.batch_sizes.split(",")]
    config = TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                         seed=args.seed, hidden_dim=args.hidden)
    rows = bench.sweep(train_set, config, batch_sizes, validation=val_set)
    print(f"{'batch_size':>10}{'accuracy':>10}{'best_epoch':>12}")
    for row in rows:
        print(f"{row.batch_size:>10}{row.accuracy:>9.2%}{row.epoch_of_best:>12}")
    _write_json(args.report, {"rows": [r.to_dict() for r in rows]})
    return 0


def cmd_select(args) -> int:
    candidates = bench.load_candidates(args.candidates)
    budget = args.budget_ms
    try:
        selected = bench.select_model(candidates, budget_ms=budget)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(selected.name)
    _write_json(args.report,
                bench.BenchReport(tuple(candidates), selected, budget).to_dict())
    if args.table:
        print(bench.render_table(candidates, selected))
    return 0


def _run_or_decode(args, mode: str) -> int:
    config = _stream_config(args)
    dictionary = _dictionary(args)
    source = _make_source(args.source, fps=args.fps, seed=args.seed)
    classifier = make_classifier(args.classifier)
    events_file = open(args.events_out, "w") if args.events_out else None
    try:
        def sink(event) -> None:
            if events_file is not None:
                events_file.write(json.dumps(event.to_payload(),
                                             separators=(",", ":")) + "\n")
        report = run_pipeline(source, classifier, config, dictionary=dictionary,
                              sink=sink, mode=mode)
    finally:
        if events_file is not None:
            events_file.close()
    for event in report.events:
        print(_event_line(event))
    stats = report.stats
    print(f"{stats.frames_total} frames; latency mean {stats.mean_ms:.2f}ms "
          f"p99 {stats.p99_ms:.2f}ms; {stats.budget_violations} over budget; "
          f"{report.dropped_frames} dropped")
    _write_json(args.report, report.to_dict())
    return 0


def cmd_decode(args) -> int:
    if args.source == "live":
        print("error: decode replays recorded sources; use `run` for live",
              file=sys.stderr)
        return 2
    return _run_or_decode(args, "replay")


def cmd_run(args) -> int:
    return _run_or_decode(args, "live")


def cmd_serve(args) -> int:
    host, _, port = args.bind.rpartition(":")
    config = _stream_config(args)
    dictionary = _dictionary(args)
    source = classifier = None
    if not args.simulated:
        if not args.source or not args.classifier:
            print("error: serve needs --simulated or --source and --classifier",
                  file=sys.stderr)
            return 1
        source = _make_source(args.source, fps=args.fps, seed=args.seed)
        classifier = make_classifier(args.classifier)
    print(f"serving on {host or '127.0.0.1'}:{port} "
          f"({'simulated input' if args.simulated else args.source})")
    gateway.serve(config, dictionary, host=host or "127.0.0.1", port=int(port),
                  simulated=args.simulated, source=source, classifier=classifier,
                  ready=lambda p: print(f"listening on port {p}", flush=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blinkcomm",
        description="Eye-blink communication: synthesize data, train and "
                    "evaluate eye-state classifiers, decode blink patterns "
                    "into words, and serve live events.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic labeled dataset")
    p.add_argument("--count", type=int, default=100, help="frames per class")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train the small network classifier")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--patience", type=int, default=0,
                   help="early-stop patience in epochs (0 = off)")
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--init", default=None, help="warm-start from a model file")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--report", default=None, help="training report JSON")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("grad-check",
                       help="verify the backward pass against finite differences")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(fn=cmd_grad_check)

    p = sub.add_parser("eval", help="accuracy and latency on a labeled dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--classifier", default="heuristic",
                   help="heuristic | tinynet:<model-file>")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--budget-ms", type=float, default=100.0)
    p.add_argument("--report", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="train across batch sizes, report a grid")
    p.add_argument("--data", required=True)
    p.add_argument("--batch-sizes", default="8,16,32")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--report", default=None)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("select",
                       help="pick the best candidate within a latency budget")
    p.add_argument("--candidates", required=True, help="candidate rows JSON")
    p.add_argument("--budget-ms", type=float, default=None)
    p.add_argument("--table", action="store_true", help="print the full table")
    p.add_argument("--report", default=None)
    p.set_defaults(fn=cmd_select)

    for name, help_text in (("decode", "replay a recorded source and decode it"),
                            ("run", "run the live paced pipeline")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--source", required=True,
                       help="dir:<path> | script:<path> | live")
        p.add_argument("--classifier", default="heuristic",
                       help="heuristic | tinynet:<model-file>")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help="seed for script rendering")
        _add_stream_flags(p)
        _add_dict_flags(p)
        p.add_argument("--events-out", default=None, help="decode event JSONL log")
        p.add_argument("--report", default=None, help="pipeline report JSON")
        p.set_defaults(fn=cmd_decode if name == "decode" else cmd_run)

    p = sub.add_parser("serve", help="stream events to socket clients")
    p.add_argument("--bind", default="127.0.0.1:42700")
    p.add_argument("--simulated", action="store_true",
                   help="accept sim_state input instead of running a pipeline")
    p.add_argument("--source", default=None)
    p.add_argument("--classifier", default="heuristic")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_stream_flags(p)
    _add_dict_flags(p)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems and 0 for --help.
        return 0 if exc.code == 0 else 1
    try:
        return args.fn(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
