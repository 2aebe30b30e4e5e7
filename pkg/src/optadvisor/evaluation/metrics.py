from __future__ import annotations

import csv
import io
import json
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from ..errors import AdvisorError
from .experiments import EvalOutcome

RATIO_COLUMNS = ("experiment", "learner", "optimization", "program", "input_id", "run_id", "ratio")


@dataclass(frozen=True)
class SignAccuracy:
    correct: int
    total: int

    @property
    def percent(self) -> float:
        return 100.0 * self.correct / self.total


def sign_agrees(actual: float, expected: float) -> bool:
    """Both above 1.0 (a gain) or both at/below 1.0 (no gain)."""
    return (expected > 1.0) == (actual > 1.0)


def sign_accuracy(outcomes: Iterable[EvalOutcome]) -> SignAccuracy:
    outcomes = list(outcomes)
    if not outcomes:
        raise AdvisorError("sign accuracy of zero outcomes is undefined")
    correct = sum(sign_agrees(o.actual, o.expected) for o in outcomes)
    return SignAccuracy(correct, len(outcomes))


def accuracy_summary(outcomes: Sequence[EvalOutcome], experiment: int, learner: str) -> dict:
    per_opt = {}
    for opt in sorted({o.optimization for o in outcomes}):
        acc = sign_accuracy(o for o in outcomes if o.optimization == opt)
        per_opt[opt] = {"percent": acc.percent, "correct": acc.correct, "total": acc.total}
    overall = sign_accuracy(outcomes)
    return {
        "experiment": experiment,
        "learner": learner,
        "per_optimization": per_opt,
        "overall_percent": overall.percent,
        "correct": overall.correct,
        "total": overall.total,
    }


def ratios_csv_text(outcomes: Iterable[EvalOutcome]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RATIO_COLUMNS)
    for o in sorted(outcomes, key=EvalOutcome.sort_key):
        w.writerow([o.experiment, o.learner, o.optimization, o.program, o.input_id, o.run_id,
                    format(o.ratio, ".17g")])
    return buf.getvalue()


def export_ratios_csv(outcomes: Iterable[EvalOutcome], path: str | os.PathLike) -> Path:
    path = Path(path)
    path.write_text(ratios_csv_text(outcomes), encoding="utf-8")
    return path


def read_ratios_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["experiment"] = int(r["experiment"])
        r["run_id"] = int(r["run_id"])
        r["ratio"] = float(r["ratio"])
    return rows


def write_summary_json(summary: dict, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
