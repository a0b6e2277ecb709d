"""Classifier evaluation and latency-constrained model selection.

select_model picks the candidate with the best accuracy among those whose
average latency fits the budget; accuracy ties go to the lower latency,
then to the lexicographically smaller name, so selection is a total order
and therefore deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .classifier import Classifier, TinyNet, TrainConfig, decide, train
from .errors import InfeasibleError
from .pipeline import LatencyStats, measure_latency
from .synthetic import LabeledDataset


@dataclass(frozen=True)
class ModelCandidate:
    name: str
    accuracy: float                     # fraction in [0, 1]
    avg_latency_ms: float
    total_params: int = 0
    model_size_bytes: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if self.avg_latency_ms <= 0:
            raise ValueError("avg_latency_ms must be positive")
        if self.total_params < 0:
            raise ValueError("total_params must be non-negative")


def load_candidates(path) -> list[ModelCandidate]:
    """Read a JSON list of candidate rows."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, list) or not doc:
        raise ValueError(f"{path}: expected a non-empty list of candidates")
    out = []
    for i, row in enumerate(doc):
        try:
            out.append(ModelCandidate(
                name=str(row["name"]),
                accuracy=float(row["accuracy"]),
                avg_latency_ms=float(row["avg_latency_ms"]),
                total_params=int(row.get("total_params", 0)),
                model_size_bytes=row.get("model_size_bytes"),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: bad candidate row #{i}: {exc}") from exc
    return out


def select_model(candidates: Sequence[ModelCandidate],
                 budget_ms: float | None = None) -> ModelCandidate:
    """Best-accuracy candidate with avg_latency_ms within the budget.

    budget_ms None means unconstrained. If nothing fits, raises
    InfeasibleError carrying the smallest latency on offer.
    """
    if not candidates:
        raise ValueError("candidates must be non-empty")
    if budget_ms is not None and budget_ms <= 0:
        raise ValueError(f"budget_ms must be positive, got {budget_ms}")
    feasible = [c for c in candidates
                if budget_ms is None or c.avg_latency_ms <= budget_ms]
    if not feasible:
        fastest = min(c.avg_latency_ms for c in candidates)
        raise InfeasibleError(
            f"no candidate meets the {budget_ms}ms budget; "
            f"minimum available latency is {fastest}ms",
            min_latency_ms=fastest,
        )
    return min(feasible, key=lambda c: (-c.accuracy, c.avg_latency_ms, c.name))


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[ModelCandidate, ...]
    selected: ModelCandidate
    budget_ms: float | None

    def to_dict(self) -> dict:
        def row(c: ModelCandidate) -> dict:
            return {
                "name": c.name, "accuracy": c.accuracy,
                "avg_latency_ms": c.avg_latency_ms,
                "total_params": c.total_params,
                "model_size_bytes": c.model_size_bytes,
            }
        return {"rows": [row(c) for c in self.rows], "selected": row(self.selected),
                "budget_ms": self.budget_ms}


def render_table(rows: Sequence[ModelCandidate],
                 selected: ModelCandidate | None = None) -> str:
    """Fixed-width text table of candidate rows; '*' marks the selection."""
    header = f"{'':2}{'name':<14}{'accuracy':>10}{'latency_ms':>12}{'params':>12}"
    lines = [header, "-" * len(header)]
    for c in rows:
        mark = "* " if selected is not None and c.name == selected.name else "  "
        lines.append(f"{mark}{c.name:<14}{c.accuracy:>9.2%}{c.avg_latency_ms:>12.2f}"
                     f"{c.total_params:>12,}")
    return "\n".join(lines)


def evaluate(classifier: Classifier, test_set: LabeledDataset,
             repetitions: int = 1, budget_ms: float = 100.0,
             threshold: float = 0.5) -> tuple[float, LatencyStats]:
    """Overall accuracy (correct decisions / total) plus latency stats."""
    if len(test_set) == 0:
        raise ValueError("test set must be non-empty")
    frames = list(test_set.frames())
    correct = 0
    for i, frame in enumerate(frames):
        state = decide(classifier.classify(frame), threshold)
        if state is test_set.state_of(i):
            correct += 1
    stats = measure_latency(classifier, frames, repetitions=repetitions,
                            budget_ms=budget_ms)
    return correct / len(frames), stats


@dataclass(frozen=True)
class SweepRow:
    batch_size: int
    accuracy: float       # best validation accuracy observed during the run
    epoch_of_best: int

    def to_dict(self) -> dict:
        return {"batch_size": self.batch_size, "accuracy": self.accuracy,
                "epoch_of_best": self.epoch_of_best}


def sweep(dataset: LabeledDataset, config: TrainConfig, batch_sizes: Sequence[int],
          validation: LabeledDataset | None = None,
          init: TinyNet | None = None) -> list[SweepRow]:
    """Train one model per batch size with a shared seed and config.

    Rows report the best validation accuracy and the epoch that reached it.
    """
    if not batch_sizes:
        raise ValueError("batch_sizes must be non-empty")
    rows = []
    for bs in batch_sizes:
        _, report = train(dataset, replace(config, batch_size=bs),
                          init=init, validation=validation)
        best_acc = report.val_accuracy[report.epoch_of_best - 1]
        rows.append(SweepRow(batch_size=bs, accuracy=best_acc,
                             epoch_of_best=report.epoch_of_best))
    return rows
