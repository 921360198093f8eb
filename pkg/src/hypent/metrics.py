"""Classification metrics, confusion matrices, and norm histograms."""

import json
from dataclasses import dataclass

import numpy as np

ENTAILMENT = 0  # class index scored by precision/recall/F1 in binary mode


@dataclass
class MetricsReport:
    """Evaluation summary; F1 fields are None for the 3-way task.

    ``zero_division`` flags metrics whose denominator was empty and were
    therefore reported as 0.
    """

    accuracy: float
    confusion: np.ndarray  # rows = observed, columns = predicted
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    zero_division: tuple = ()

    @property
    def total(self):
        return int(self.confusion.sum())

    def to_dict(self):
        out = {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "total": self.total,
        }
        if self.precision is not None:
            out["precision"] = self.precision
            out["recall"] = self.recall
            out["f1"] = self.f1
        if self.zero_division:
            out["zero_division"] = list(self.zero_division)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def evaluate(predictions, gold, classes):
    """Accuracy plus, for the binary task, entailment-class P/R/F1."""
    predictions = np.asarray(predictions, dtype=np.int64)
    gold = np.asarray(gold, dtype=np.int64)
    if predictions.size == 0:
        raise ValueError("cannot evaluate an empty prediction list")
    if predictions.shape != gold.shape:
        raise ValueError("predictions and gold labels differ in length")

    confusion = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(confusion, (gold, predictions), 1)
    accuracy = float(np.trace(confusion)) / float(confusion.sum())
    if classes != 2:
        return MetricsReport(accuracy=accuracy, confusion=confusion)

    tp = int(confusion[ENTAILMENT, ENTAILMENT])
    fp = int(confusion[1 - ENTAILMENT, ENTAILMENT])
    fn = int(confusion[ENTAILMENT, 1 - ENTAILMENT])
    flags = []

    def ratio(num, den, name):
        if den == 0:
            flags.append(name)
            return 0.0
        return num / den

    precision = ratio(tp, tp + fp, "precision")
    recall = ratio(tp, tp + fn, "recall")
    f1 = ratio(2.0 * precision * recall, precision + recall, "f1")
    return MetricsReport(
        accuracy=accuracy,
        confusion=confusion,
        precision=precision,
        recall=recall,
        f1=f1,
        zero_division=tuple(flags),
    )


def merge_confusions(a, b):
    """Shard-merge: confusion counts are additive."""
    return a + b


def norm_histogram(vectors, c, bins):
    """Equal-width histogram of embedding norms.

    The range is [0, 1/sqrt(c)) for a curved space and [0, max norm] in
    the flat case; returns a list of (left bin edge, count) whose counts
    sum to the number of rows.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    norms = np.linalg.norm(vectors, axis=1)
    if c > 0.0:
        upper = 1.0 / np.sqrt(c)
    else:
        upper = float(norms.max()) if norms.size and norms.max() > 0.0 else 1.0
    width = upper / bins
    idx = np.minimum((norms / width).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return [(i * width, int(counts[i])) for i in range(bins)]


def write_histogram_csv(path, histogram):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bin_edge,count\n")
        for edge, count in histogram:
            fh.write(f"{edge!r},{count}\n")
