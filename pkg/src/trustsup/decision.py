"""Trust flag, ensemble vote selection, and the trusted metric suite.

A prediction is *trusted* when the regressed correct-member count clears the
threshold (strictly; sitting on the threshold is untrusted). Votes can be
chosen two ways: the plurality class of the member argmaxes, or the class
whose vote count lies closest to the regressed count. Trusted metrics treat
the flag as a correctness detector: TP = correct and trusted, TN = wrong and
untrusted, FP = wrong and trusted, FN = correct and untrusted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError

__all__ = [
    "EvalRecord", "TrustedMetrics", "trust_flag", "vote_counts",
    "maximal_vote", "predicted_vote", "trusted_metrics",
    "METRIC_ROWS", "write_metrics_csv", "metrics_rows",
]

METRIC_ROWS = [
    "Untrusted accuracy",
    "Trusted accuracy",
    "Trusted precision",
    "Trusted recall",
    "Trusted F1 score",
    "Trusted specificity",
]


@dataclass(frozen=True)
class EvalRecord:
    """Per-sample evaluation outcome."""

    sample_id: str
    true_class: int
    voted_class: int
    y: float
    b: int
    oracle_used: bool = False


@dataclass
class TrustedMetrics:
    untrusted_accuracy: float
    trusted_accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float
    tp: int
    tn: int
    fp: int
    fn: int
    degenerate: tuple[str, ...] = field(default_factory=tuple)

    def row_values(self) -> list[float]:
        return [self.untrusted_accuracy, self.trusted_accuracy, self.precision,
                self.recall, self.f1, self.specificity]


def trust_flag(y: float, tt: float) -> int:
    """1 iff the prediction strictly clears the threshold; y == TT is untrusted."""
    return 1 if y > tt else 0


def vote_counts(activations: np.ndarray) -> np.ndarray:
    """Per-class argmax counts of an (M, C) softmax matrix (ties -> lowest class)."""
    acts = np.asarray(activations, dtype=float)
    return np.bincount(np.argmax(acts, axis=1), minlength=acts.shape[1])


def maximal_vote(counts) -> int:
    """Plurality class; ties resolve to the lowest class index."""
    counts = np.asarray(counts)
    if counts.sum() < 1:
        raise DataFormatError("vote counts are all zero")
    return int(np.argmax(counts))


def predicted_vote(counts, y: float) -> int:
    """Among classes with at least one vote, the class whose count is closest
    to the regressed count; ties prefer the larger count, then the lower
    class index."""
    counts = np.asarray(counts)
    nz = np.flatnonzero(counts)
    if nz.size == 0:
        raise DataFormatError("vote counts are all zero")
    dist = np.abs(counts[nz] - float(y))
    order = np.lexsort((nz, -counts[nz], dist))
    return int(nz[order[0]])


def trusted_metrics(records: list[EvalRecord]) -> TrustedMetrics:
    """Aggregate a record list into the trusted metric suite.

    Undefined 0/0 rates are reported as 1.0 and named in ``degenerate``.
    """
    if not records:
        raise DataFormatError("trusted metrics need at least one record")
    n = len(records)
    tp = tn = fp = fn = 0
    correct_total = 0
    for r in records:
        correct = r.voted_class == r.true_class
        trusted = r.b == 1
        correct_total += correct
        if correct and trusted:
            tp += 1
        elif not correct and not trusted:
            tn += 1
        elif not correct and trusted:
            fp += 1
        else:
            fn += 1
    flags: list[str] = []

    def rate(num: int, den: int, name: str) -> float:
        if den == 0:
            flags.append(name)
            return 1.0
        return num / den

    precision = rate(tp, tp + fp, "precision")
    recall = rate(tp, tp + fn, "recall")
    specificity = rate(tn, tn + fp, "specificity")
    f1 = rate(2 * tp, 2 * tp + fp + fn, "f1")
    return TrustedMetrics(
        untrusted_accuracy=correct_total / n,
        trusted_accuracy=(tp + tn) / n,
        precision=precision,
        recall=recall,
        specificity=specificity,
        f1=f1,
        tp=tp, tn=tn, fp=fp, fn=fn,
        degenerate=tuple(flags),
    )


def metrics_rows(columns: dict[str, TrustedMetrics]) -> list[list]:
    """Table rows (label + one value per mode column) mirroring the report layout."""
    table = [[label] for label in METRIC_ROWS]
    for metrics in columns.values():
        for row, value in zip(table, metrics.row_values()):
            row.append(value)
    return table


def write_metrics_csv(path, columns: dict[str, TrustedMetrics]) -> None:
    """Six-row metrics table, one column per evaluation mode."""
    with open(Path(path), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["Metric"] + list(columns.keys()))
        for row in metrics_rows(columns):
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
