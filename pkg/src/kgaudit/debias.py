"""Post-hoc leakage removal by linear projection and centroid shifting.

Both methods transform a copy of the given embedding rows: the caller
slices the probed entity kind out of the model and writes the result back,
so other entity kinds stay bit-identical.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .detect import detect_lc
from .graph import balanced_subsample
from .numkit import LogisticConfig, as_matrix, fit_logistic, rng_for


@dataclass
class DebiasTrace:
    method: str                     # "lp" | "lp-multi"
    iterations: int
    probe_accuracy: list[float] = field(default_factory=list)
    task_metric: list[float] = field(default_factory=list)
    stopped_early: bool = False

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "probe_accuracy", "task_metric"])
            for i in range(self.iterations):
                task = self.task_metric[i] if i < len(self.task_metric) else math.nan
                writer.writerow([
                    i + 1,
                    self.probe_accuracy[i] if i < len(self.probe_accuracy) else "",
                    "" if task is None or (isinstance(task, float) and math.isnan(task)) else task,
                ])


def _probe_accuracy(embeddings, labels, seed) -> float:
    """Balanced held-out logistic accuracy; NaN when classes are too small."""
    try:
        idx = balanced_subsample(labels, seed)
        report = detect_lc(embeddings[idx], labels[idx], seed=seed)
        return report.observed
    except ArgumentError:
        return math.nan


def remove_lp(
    embeddings,
    labels,
    iterations: int = 10,
    seed: int = 0,
    task_metric=None,
    logistic_config: LogisticConfig | None = None,
) -> tuple[np.ndarray, DebiasTrace]:
    """Iterated projection onto the hyperplane orthogonal to the learned
    separating direction of a two-valued attribute.

    Each iteration refits a logistic classifier on the current embeddings
    (the projected space can expose a new separating direction), normalises
    its weight vector into a unit direction, and removes that component
    from every row.  The trace records a balanced held-out probe accuracy
    after each iteration, plus ``task_metric(embeddings)`` when given.
    A degenerate (zero-weight) fit stops the process early.
    """
    if iterations < 1:
        raise ArgumentError("iterations must be >= 1")
    current = as_matrix(embeddings, "embeddings").copy()
    labels = np.asarray(labels, dtype=object).ravel()
    if labels.size != current.shape[0]:
        raise ArgumentError("labels and embeddings row counts differ")
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size != 2:
        raise ArgumentError(f"need exactly 2 label values, got {classes.size}")
    if counts.min() == 0:
        raise ArgumentError("both classes must be non-empty")

    trace = DebiasTrace(method="lp", iterations=0)
    for it in range(iterations):
        clf = fit_logistic(current, labels, logistic_config)
        norm = float(np.linalg.norm(clf.weights))
        if norm == 0.0:
            trace.stopped_early = True
            break
        direction = clf.weights / norm
        current -= np.outer(current @ direction, direction)
        trace.iterations += 1
        probe_seed = int(rng_for(seed, "lp-probe", it).integers(2**62))
        trace.probe_accuracy.append(_probe_accuracy(current, labels, probe_seed))
        trace.task_metric.append(
            float(task_metric(current)) if task_metric is not None else math.nan
        )
    return current, trace


def remove_lp_multi(
    embeddings,
    labels,
    seed: int = 0,
    task_metric=None,
) -> tuple[np.ndarray, DebiasTrace]:
    """Shift every class so all class centroids coincide.

    The common target is the unweighted mean of the class centroids; the
    within-class geometry (all pairwise member distances) is preserved
    exactly because each class moves rigidly.
    """
    current = as_matrix(embeddings, "embeddings").copy()
    labels = np.asarray(labels, dtype=object).ravel()
    if labels.size != current.shape[0]:
        raise ArgumentError("labels and embeddings row counts differ")
    classes = np.unique(labels)
    if classes.size < 2:
        raise ArgumentError("need at least 2 label values")

    centroids = np.stack([current[labels == cls].mean(axis=0) for cls in classes])
    grand = centroids.mean(axis=0)
    for cls, centroid in zip(classes, centroids):
        current[labels == cls] += grand - centroid

    trace = DebiasTrace(method="lp-multi", iterations=1)
    probe_seed = int(rng_for(seed, "lp-multi-probe").integers(2**62))
    trace.probe_accuracy.append(_probe_accuracy(current, labels, probe_seed))
    trace.task_metric.append(
        float(task_metric(current)) if task_metric is not None else math.nan
    )
    return current, trace
