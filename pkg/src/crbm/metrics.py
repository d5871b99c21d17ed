"""Task metrics and the tabular report container."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def label_error_percent(predictions, targets):
    """Average per-label classification error, in percent."""
    predictions = np.asarray(predictions)
    targets = np.asarray(targets)
    if predictions.shape != targets.shape:
        raise ValueError("prediction/target shapes differ")
    return float(100.0 * np.mean(predictions != targets))


def denoise_errors(predictions, clean, noisy):
    """(all-pixel error %, changed-pixel error %) against the clean images.

    A changed pixel is one where the noisy input differs from the clean
    target; predicting the noisy input verbatim scores exactly 100 on the
    changed metric. With no changed pixels the changed error is 0.
    """
    predictions = np.asarray(predictions)
    clean = np.asarray(clean)
    noisy = np.asarray(noisy, dtype=np.float64)
    if not (predictions.shape == clean.shape == noisy.shape):
        raise ValueError("prediction/clean/noisy shapes differ")
    wrong = predictions != clean
    all_pct = float(100.0 * wrong.mean())
    changed = noisy != clean.astype(np.float64)
    if not changed.any():
        return all_pct, 0.0
    return all_pct, float(100.0 * wrong[changed].mean())


@dataclass
class MetricsReport:
    """Per-fold metric rows plus their mean, printable as a TSV table."""

    task: str
    columns: tuple
    rows: list = field(default_factory=list)
    labels: list = field(default_factory=list)  # one name per row (fold/model)

    def add_row(self, label, values):
        if len(values) != len(self.columns):
            raise ValueError("row width does not match columns")
        self.labels.append(str(label))
        self.rows.append(tuple(float(v) for v in values))

    @property
    def mean(self):
        if not self.rows:
            raise ValueError("no rows")
        return tuple(float(np.mean([r[i] for r in self.rows])) for i in range(len(self.columns)))

    def to_tsv(self):
        lines = ["\t".join(("row",) + tuple(self.columns))]
        for label, row in zip(self.labels, self.rows):
            lines.append("\t".join([label] + [f"{v:.6g}" for v in row]))
        if self.rows:
            lines.append("\t".join(["mean"] + [f"{v:.6g}" for v in self.mean]))
        return "\n".join(lines) + "\n"
