"""Attribute-leakage probes with permutation-test significance.

Three probes quantify how much a protected attribute leaks into trained
embeddings: a held-out logistic classifier (lc), the first canonical
correlation between attribute indicators and embeddings (cca), and a
least-squares decomposition of group-mean embeddings into attribute
vectors (ld).  Each statistic can be certified against the null of
independent pairing by shuffling one side and re-computing.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .numkit import (
    CcaResult,
    LogisticConfig,
    as_matrix,
    cca,
    fit_logistic,
    pearson,
    rng_for,
    solve_least_squares,
)

HIGHER = "higher-is-evidence"
LOWER = "lower-is-evidence"


@dataclass
class DetectionReport:
    probe: str
    statistic_name: str
    observed: float
    permutation_values: np.ndarray
    p_value: float
    direction: str
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "probe": self.probe,
            "statistic": self.statistic_name,
            "observed": self.observed,
            "permutations": [float(v) for v in self.permutation_values],
            "p_value": self.p_value,
            "direction": self.direction,
            "seed": self.seed,
        }

    def save_json(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), sort_keys=True, indent=2),
            encoding="utf-8",
        )

    def csv_row(self) -> list:
        return [
            self.probe, self.statistic_name, self.observed,
            len(self.permutation_values), self.p_value, self.direction, self.seed,
        ]


CSV_HEADER = ["probe", "statistic", "observed", "permutations", "p_value",
              "direction", "seed"]


def write_detection_csv(path, reports: list[DetectionReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for report in reports:
            writer.writerow(report.csv_row())


@dataclass
class DecompositionResult:
    """Least-squares reconstruction quality of U from indicators A."""

    x: np.ndarray
    l2_loss: float
    mean_cosine: float
    retrieval_accuracy: float


# ---------------------------------------------------------------------------
# Permutation test
# ---------------------------------------------------------------------------

def permutation_test(
    statistic,
    a_side,
    u_side,
    permutations: int = 100,
    seed: int = 0,
    direction: str = HIGHER,
    probe: str = "custom",
    statistic_name: str = "statistic",
) -> DetectionReport:
    """Estimate how extreme the observed statistic is under shuffled pairing.

    ``statistic(a, u)`` is recomputed with the row order of ``a_side``
    permuted once per round; permutation ``i`` draws from the stream
    ``(seed, "perm", i)`` and is therefore reproducible in isolation.  The
    plus-one-corrected p-value counts permutations at least as extreme as
    the observed value, so it lies in (0, 1] and equals 1/(N+1) exactly
    when the observed value strictly beats all N rounds.
    """
    if permutations < 1:
        raise ArgumentError("need at least 1 permutation")
    if direction not in (HIGHER, LOWER):
        raise ArgumentError(f"unknown direction {direction!r}")
    a_side = np.asarray(a_side)
    n = a_side.shape[0]
    if getattr(u_side, "shape", (n,))[0] not in (n,):
        raise ArgumentError("a_side and u_side row counts differ")

    observed = float(statistic(a_side, u_side))
    values = np.empty(permutations)
    for i in range(permutations):
        perm = rng_for(seed, "perm", i).permutation(n)
        values[i] = float(statistic(a_side[perm], u_side))
    if direction == HIGHER:
        extreme = int(np.sum(values >= observed))
    else:
        extreme = int(np.sum(values <= observed))
    p_value = (1 + extreme) / (1 + permutations)
    return DetectionReport(
        probe=probe,
        statistic_name=statistic_name,
        observed=observed,
        permutation_values=values,
        p_value=p_value,
        direction=direction,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# detect-LC: logistic probe
# ---------------------------------------------------------------------------

def _lc_statistic(embeddings, split_ratio, seed, config):
    n = embeddings.shape[0]
    n_train = int(round(split_ratio * n))
    order = rng_for(seed, "lc-split").permutation(n)
    train_idx, test_idx = order[:n_train], order[n_train:]

    def statistic(labels, _unused) -> float:
        clf = fit_logistic(embeddings[train_idx], labels[train_idx], config)
        return clf.accuracy(embeddings[test_idx], labels[test_idx])

    return statistic


def detect_lc(
    embeddings,
    labels,
    split_ratio: float = 0.8,
    seed: int = 0,
    permutations: int = 0,
    config: LogisticConfig | None = None,
) -> DetectionReport:
    """Held-out accuracy of a logistic probe predicting the labels.

    Callers are expected to balance the labels first (the chance level is
    then 1/#classes).  The train/test split depends only on the seed, so a
    permutation run measures the pairing, not split noise.
    """
    embeddings = as_matrix(embeddings, "embeddings")
    labels = np.asarray(labels, dtype=object).ravel()
    if labels.size != embeddings.shape[0]:
        raise ArgumentError("labels and embeddings row counts differ")
    if not 0.0 < split_ratio < 1.0:
        raise ArgumentError("split_ratio must be in (0, 1)")
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2:
        raise ArgumentError("need at least 2 classes")
    if counts.min() < 10:
        raise ArgumentError(
            f"class {classes[int(np.argmin(counts))]!r} has fewer than 10 rows"
        )
    statistic = _lc_statistic(embeddings, split_ratio, seed, config)
    if permutations:
        return permutation_test(
            statistic, labels, embeddings,
            permutations=permutations, seed=seed, direction=HIGHER,
            probe="lc", statistic_name="test_accuracy",
        )
    return DetectionReport(
        probe="lc",
        statistic_name="test_accuracy",
        observed=float(statistic(labels, embeddings)),
        permutation_values=np.empty(0),
        p_value=1.0,
        direction=HIGHER,
        seed=seed,
    )


def binary_age_labels(age_values, probe: str) -> np.ndarray:
    """Collapse the 7 age buckets into one of the two binary probes.

    "youngest" groups buckets 1 and 18 against the rest; "fifty_plus"
    groups buckets 50 and 56 against the rest.
    """
    groups = {"youngest": ("1", "18"), "fifty_plus": ("50", "56")}
    if probe not in groups:
        raise ArgumentError(f"unknown age probe {probe!r}")
    marked = groups[probe]
    values = np.asarray(age_values, dtype=object).ravel()
    return np.asarray(
        [probe if str(v) in marked else "rest" for v in values], dtype=object
    )


# ---------------------------------------------------------------------------
# detect-CCA: canonical correlation probe
# ---------------------------------------------------------------------------

def detect_cca(
    attribute_matrix,
    embeddings,
    k: int | None = None,
    seed: int = 0,
    permutations: int = 100,
    ridge: float = 1e-8,
) -> tuple[CcaResult, DetectionReport]:
    """First-component correlation between attribute indicators and
    embeddings, certified by permutation.

    Returns the full CCA result for the observed pairing (all k component
    correlations, for correlation-curve reports) plus the detection report
    whose statistic is the Pearson correlation of the first projected pair.
    """
    a = as_matrix(attribute_matrix, "attribute_matrix")
    u = as_matrix(embeddings, "embeddings")
    if a.shape[0] != u.shape[0]:
        raise ArgumentError("attribute matrix and embeddings row counts differ")
    observed_result = cca(a, u, k=k, ridge=ridge)

    def statistic(a_perm, u_fixed) -> float:
        result = cca(a_perm, u_fixed, k=1, ridge=ridge)
        return pearson(a_perm @ result.w_a[:, 0], u_fixed @ result.w_u[:, 0])

    report = permutation_test(
        statistic, a, u,
        permutations=permutations, seed=seed, direction=HIGHER,
        probe="cca", statistic_name="first_component_pcc",
    )
    return observed_result, report


# ---------------------------------------------------------------------------
# detect-LD: linear decomposition probe
# ---------------------------------------------------------------------------

def retrieval_accuracy(u, u_hat) -> float:
    """Fraction of rows whose reconstruction is cosine-nearest to itself.

    Ties break toward the lowest index; a zero-norm reconstructed row
    counts as a miss.
    """
    u = as_matrix(u, "u")
    u_hat = as_matrix(u_hat, "u_hat")
    if u.shape != u_hat.shape:
        raise ArgumentError(f"shape mismatch: {u.shape} vs {u_hat.shape}")
    u_norms = np.linalg.norm(u, axis=1)
    h_norms = np.linalg.norm(u_hat, axis=1)
    un = np.divide(u, u_norms[:, None], out=np.zeros_like(u), where=u_norms[:, None] > 0)
    hn = np.divide(u_hat, h_norms[:, None], out=np.zeros_like(u_hat), where=h_norms[:, None] > 0)
    cosines = hn @ un.T
    nearest = np.argmax(cosines, axis=1)
    hits = (nearest == np.arange(u.shape[0])) & (h_norms > 0)
    return float(np.mean(hits))


def detect_ld(indicator, group_means) -> DecompositionResult:
    """Decompose group-mean embeddings as indicator-weighted attribute sums.

    Solves the least-squares system indicator @ X = group_means and scores
    the reconstruction by residual Frobenius norm, mean row-wise cosine,
    and identity-retrieval accuracy.
    """
    a = as_matrix(indicator, "indicator")
    u = as_matrix(group_means, "group_means")
    if a.shape[0] != u.shape[0]:
        raise ArgumentError("indicator and group-mean row counts differ")
    x, residual = solve_least_squares(a, u)
    u_hat = a @ x
    u_norms = np.linalg.norm(u, axis=1)
    h_norms = np.linalg.norm(u_hat, axis=1)
    denom = u_norms * h_norms
    dots = np.einsum("ij,ij->i", u, u_hat)
    cosines = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    return DecompositionResult(
        x=x,
        l2_loss=residual,
        mean_cosine=float(np.mean(cosines)),
        retrieval_accuracy=retrieval_accuracy(u, u_hat),
    )


_LD_STATS = {
    "l2_loss": LOWER,
    "mean_cosine": HIGHER,
    "retrieval_accuracy": HIGHER,
}


def detect_ld_reports(
    indicator, group_means, permutations: int = 100, seed: int = 0
) -> tuple[DecompositionResult, dict[str, DetectionReport]]:
    """Decompose, then certify all three reconstruction statistics.

    The same permutation sequence (derived from the seed) is reused for
    the three statistics, matching a single shuffled-pairing experiment
    read three ways.
    """
    observed = detect_ld(indicator, group_means)
    reports = {}
    for name, direction in _LD_STATS.items():
        def statistic(a_perm, u_fixed, _name=name):
            return getattr(detect_ld(a_perm, u_fixed), _name)

        reports[name] = permutation_test(
            statistic, indicator, group_means,
            permutations=permutations, seed=seed, direction=direction,
            probe="ld", statistic_name=name,
        )
    return observed, reports
