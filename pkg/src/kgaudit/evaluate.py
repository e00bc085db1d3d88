"""Task-quality measurement: expected-rating RMSE for rating graphs and
tail-ranking metrics (Hits@K, MR, MRR) for entity-prediction graphs, plus
the CSV/JSON report surfaces used for trade-off curves.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .graph import KnowledgeGraph
from .trainer import EmbeddingModel


@dataclass
class EvalReport:
    task: str                    # "rating" | "ranking"
    triple_count: int
    rmse: float | None = None
    hits1: float | None = None
    hits10: float | None = None
    mrr: float | None = None
    mr: float | None = None

    def validate(self) -> None:
        if self.task == "rating":
            if self.rmse is None or self.rmse < 0:
                raise ArgumentError("rating report needs rmse >= 0")
            return
        if None in (self.hits1, self.hits10, self.mrr, self.mr):
            raise ArgumentError("ranking report needs hits/mrr/mr")
        if not (0 <= self.hits1 <= self.hits10 <= 1):
            raise ArgumentError("need 0 <= hits@1 <= hits@10 <= 1")
        if not 0 < self.mrr <= 1 or self.mr < 1:
            raise ArgumentError("need mrr in (0,1] and mr >= 1")

    def to_json_dict(self) -> dict:
        doc = {"task": self.task, "triple_count": self.triple_count}
        for name in ("rmse", "hits1", "hits10", "mrr", "mr"):
            value = getattr(self, name)
            if value is not None:
                doc[name] = value
        return doc

    def save_json(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), sort_keys=True, indent=2), encoding="utf-8"
        )

    def save_csv(self, path) -> None:
        doc = self.to_json_dict()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(doc))
            writer.writerow([doc[k] for k in doc])


# ---------------------------------------------------------------------------
# Rating prediction
# ---------------------------------------------------------------------------

def _as_fact_array(triples) -> np.ndarray:
    arr = np.asarray(triples, dtype=np.int64)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ArgumentError(f"expected (n, 3) triples, got shape {arr.shape}")
    return arr


def _rating_values(model: EmbeddingModel, values) -> np.ndarray:
    if values is None:
        return np.arange(1, model.relation.shape[0] + 1, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.size != model.relation.shape[0]:
        raise ArgumentError("one numeric value per relation required")
    return values


def predict_ratings(model: EmbeddingModel, users, movies, values=None) -> np.ndarray:
    """Expected rating under the softmax over all relation scores."""
    values = _rating_values(model, values)
    users = np.asarray(users, dtype=np.int64)
    movies = np.asarray(movies, dtype=np.int64)
    ht = model.entity[users] * model.entity[movies]       # (n, d)
    scores = ht @ model.relation.T                        # (n, |R|)
    scores -= scores.max(axis=1, keepdims=True)
    probs = np.exp(scores)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs @ values


def predict_rating(model: EmbeddingModel, user: int, movie: int, values=None) -> float:
    return float(predict_ratings(model, [user], [movie], values)[0])


def rmse(model: EmbeddingModel, test_triples, values=None) -> float:
    """Root mean squared error of expected ratings over the test triples."""
    facts = _as_fact_array(test_triples)
    if facts.shape[0] == 0:
        raise ArgumentError("empty test set")
    values = _rating_values(model, values)
    preds = predict_ratings(model, facts[:, 0], facts[:, 2], values)
    truth = values[facts[:, 1]]
    return float(np.sqrt(np.mean((preds - truth) ** 2)))


# ---------------------------------------------------------------------------
# Entity ranking
# ---------------------------------------------------------------------------

def rank_tail(model: EmbeddingModel, triple, candidates) -> int:
    """Optimistic raw rank of the true tail among candidate entities.

    rank = 1 + number of candidates scoring strictly higher; ties therefore
    resolve to the best (lowest) rank.
    """
    h, r, t = (int(v) for v in triple)
    candidates = np.asarray(candidates, dtype=np.int64)
    if not np.any(candidates == t):
        raise ArgumentError(f"true tail {t} missing from candidates")
    query = model.entity[h] * model.relation[r]
    scores = model.entity[candidates] @ query
    s_true = float(model.entity[t] @ query)
    return int(1 + np.sum(scores > s_true))


def _known_tails(graph: KnowledgeGraph) -> dict[tuple[int, int], np.ndarray]:
    table: dict[tuple[int, int], list[int]] = {}
    for h, r, t in graph.facts:
        table.setdefault((int(h), int(r)), []).append(int(t))
    return {k: np.asarray(v, dtype=np.int64) for k, v in table.items()}


def link_metrics(
    model: EmbeddingModel,
    graph: KnowledgeGraph,
    test_triples,
    candidate_policy: str = "kind",
    filtered: bool = False,
) -> EvalReport:
    """Tail-ranking metrics over a test set.

    ``candidate_policy`` "kind" ranks against all entities of the kind
    admissible as tail for the triple's relation; "all" ranks against every
    entity.  Raw ranking is the default; ``filtered=True`` drops the other
    known-true tails of (head, relation) from the candidate pool.
    """
    facts = _as_fact_array(test_triples)
    if facts.shape[0] == 0:
        raise ArgumentError("empty test set")
    if candidate_policy not in ("kind", "all"):
        raise ArgumentError(f"unknown candidate policy {candidate_policy!r}")

    known = _known_tails(graph) if filtered else None
    ranks = np.empty(facts.shape[0], dtype=np.int64)
    row_of = {}
    for i in range(facts.shape[0]):
        row_of.setdefault(int(facts[i, 1]), []).append(i)

    for rel_id, rows in row_of.items():
        rows = np.asarray(rows, dtype=np.int64)
        if candidate_policy == "kind":
            kind = graph.relation_tail_kinds[rel_id]
            candidates = graph.entities_of_kind(kind)
        else:
            candidates = np.arange(graph.n_entities, dtype=np.int64)
        cand_emb = model.entity[candidates]

        heads = facts[rows, 0]
        tails = facts[rows, 2]
        if not np.isin(tails, candidates).all():
            raise ArgumentError(
                f"true tail outside candidate pool for relation {rel_id}"
            )
        queries = model.entity[heads] * model.relation[rel_id]   # (m, d)
        scores = queries @ cand_emb.T                            # (m, n_cand)
        s_true = np.einsum("md,md->m", queries, model.entity[tails])
        rank_rows = 1 + np.sum(scores > s_true[:, None], axis=1)

        if filtered:
            for j, row in enumerate(rows):
                others = known.get((int(heads[j]), rel_id))
                if others is None or others.size < 2:
                    continue
                others = others[others != tails[j]]
                if others.size == 0:
                    continue
                other_scores = model.entity[others] @ queries[j]
                rank_rows[j] -= int(np.sum(other_scores > s_true[j]))
        ranks[rows] = rank_rows

    report = EvalReport(
        task="ranking",
        triple_count=int(facts.shape[0]),
        hits1=float(np.mean(ranks <= 1)),
        hits10=float(np.mean(ranks <= 10)),
        mrr=float(np.mean(1.0 / ranks)),
        mr=float(np.mean(ranks)),
    )
    report.validate()
    return report


def rating_report(model: EmbeddingModel, test_triples, values=None) -> EvalReport:
    report = EvalReport(
        task="rating",
        triple_count=int(_as_fact_array(test_triples).shape[0]),
        rmse=rmse(model, test_triples, values),
    )
    report.validate()
    return report


# ---------------------------------------------------------------------------
# Trade-off curves
# ---------------------------------------------------------------------------

def write_tradeoff_csv(path, rows, x_name: str = "iteration",
                       task_name: str = "task_metric",
                       probe_name: str = "probe_accuracy") -> None:
    """Rows of (x, task metric, probe accuracy) for external plotting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([x_name, task_name, probe_name])
        for x, task_value, probe_value in rows:
            writer.writerow([
                x,
                "" if task_value is None or (isinstance(task_value, float) and math.isnan(task_value)) else task_value,
                "" if probe_value is None or (isinstance(probe_value, float) and math.isnan(probe_value)) else probe_value,
            ])
