"""Embedding training: bilinear-diagonal scoring, contrastive softmax or
margin ranking loss over negative-sampled triples, and optional
first-moment fairness penalties applied during training.

The per-fact operations here (``score``, ``softmax_loss``, ``margin_loss``,
``fm_penalty``, ``fm_multi_penalty``) are the auditable reference forms
with explicit gradients; the mini-batch SGD loop runs the equivalent
batched kernels from :mod:`kgaudit.kernels`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ArgumentError, TrainingDiverged
from .graph import KnowledgeGraph, Split, Triple, _fact_keys
from .numkit import rng_for


# ---------------------------------------------------------------------------
# Model and configuration
# ---------------------------------------------------------------------------

@dataclass
class EmbeddingModel:
    entity: np.ndarray    # (|V|, d) float64
    relation: np.ndarray  # (|R|, d) float64

    @property
    def dim(self) -> int:
        return int(self.entity.shape[1])

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.entity.copy(), self.relation.copy())


@dataclass
class FmConfig:
    """First-moment penalty settings.

    mode "two" pulls the mean embeddings of two protected-value groups
    together with weight ``sigma``; mode "multi" adds the unit-spread and
    pairwise-centroid terms and scales the base loss by ``theta``.
    """

    mode: str                      # "two" | "multi"
    attribute: str
    values: tuple[str, str] | None = None   # required for mode "two"
    sigma: float = 0.0
    theta: float = 1.0

    def __post_init__(self):
        if self.mode not in ("two", "multi"):
            raise ArgumentError(f"fm mode must be 'two' or 'multi', got {self.mode!r}")
        if self.mode == "two":
            if self.values is None or len(self.values) != 2:
                raise ArgumentError("fm mode 'two' needs exactly two attribute values")
            if self.sigma < 0:
                raise ArgumentError("sigma must be >= 0")
        if self.mode == "multi" and self.theta <= 0:
            raise ArgumentError("theta must be > 0")


@dataclass
class TrainConfig:
    dim: int = 64
    learning_rate: float = 0.01
    epochs: int = 300
    neg_entities: int = 10
    neg_relations: int = 4
    loss_kind: str = "softmax"     # "softmax" | "margin"
    margin: float = 6.0
    fm: FmConfig | None = None
    batch_size: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ArgumentError("learning rate must be > 0")
        if self.epochs < 1:
            raise ArgumentError("epochs must be >= 1")
        if self.loss_kind not in ("softmax", "margin"):
            raise ArgumentError(f"unknown loss kind {self.loss_kind!r}")
        if self.loss_kind == "margin" and self.margin <= 0:
            raise ArgumentError("margin must be > 0")
        if self.neg_entities < 0 or self.neg_relations < 0:
            raise ArgumentError("negative-sample counts must be >= 0")
        if self.batch_size < 1:
            raise ArgumentError("batch size must be >= 1")


@dataclass
class FmGroups:
    """Disjoint entity groups, one per protected value."""

    values: list[str]
    members: list[np.ndarray]

    def __post_init__(self):
        if len(self.values) != len(self.members):
            raise ArgumentError("values / members length mismatch")
        seen: set[int] = set()
        for value, ids in zip(self.values, self.members):
            if len(ids) == 0:
                raise ArgumentError(f"group {value!r} is empty")
            ids_set = set(int(i) for i in ids)
            if seen & ids_set:
                raise ArgumentError("groups overlap")
            seen |= ids_set

    @property
    def counts(self) -> list[int]:
        return [len(m) for m in self.members]


def fm_groups(graph: KnowledgeGraph, attribute: str, values=None) -> FmGroups:
    """Build protected-value groups from a graph attribute.

    With ``values`` given, exactly those groups (two-class penalty);
    otherwise every declared value with at least one member.
    """
    table = graph.attributes.get(attribute)
    if table is None:
        raise ArgumentError(f"unknown attribute {attribute!r}")
    wanted = list(values) if values is not None else list(table.values)
    members: dict[str, list[int]] = {v: [] for v in wanted}
    for eid, value in table.assignments.items():
        if value in members:
            members[value].append(eid)
    if values is None:
        wanted = [v for v in wanted if members[v]]
    return FmGroups(
        values=wanted,
        members=[np.asarray(sorted(members[v]), dtype=np.int64) for v in wanted],
    )


def init_model(graph: KnowledgeGraph, dim: int, seed: int) -> EmbeddingModel:
    """Uniform init in [-6/sqrt(d), +6/sqrt(d)] for both matrices."""
    if dim < 1:
        raise ArgumentError("dim must be >= 1")
    bound = 6.0 / np.sqrt(dim)
    rng = rng_for(seed, "init")
    return EmbeddingModel(
        entity=rng.uniform(-bound, bound, size=(graph.n_entities, dim)),
        relation=rng.uniform(-bound, bound, size=(graph.n_relations, dim)),
    )


# ---------------------------------------------------------------------------
# Scoring and reference losses
# ---------------------------------------------------------------------------

def _ids(triple) -> tuple[int, int, int]:
    h, r, t = triple
    return int(h), int(r), int(t)


def score(model: EmbeddingModel, triple) -> float:
    """Bilinear-diagonal score: sum_i h_i * r_i * t_i."""
    h, r, t = _ids(triple)
    return float(np.sum(model.entity[h] * model.relation[r] * model.entity[t]))


@dataclass
class GradientMap:
    """Sparse gradients keyed by row index."""

    entity: dict[int, np.ndarray] = field(default_factory=dict)
    relation: dict[int, np.ndarray] = field(default_factory=dict)

    def add_entity(self, row: int, vec: np.ndarray) -> None:
        cur = self.entity.get(row)
        self.entity[row] = vec.copy() if cur is None else cur + vec

    def add_relation(self, row: int, vec: np.ndarray) -> None:
        cur = self.relation.get(row)
        self.relation[row] = vec.copy() if cur is None else cur + vec


def _score_grads(model, triple, weight, grads: GradientMap) -> None:
    h, r, t = _ids(triple)
    hv, rv, tv = model.entity[h], model.relation[r], model.entity[t]
    grads.add_entity(h, weight * rv * tv)
    grads.add_entity(t, weight * hv * rv)
    grads.add_relation(r, weight * hv * tv)


def softmax_loss(model: EmbeddingModel, fact, corruptions) -> tuple[float, GradientMap]:
    """Negative log-probability of the true triple against its corruptions.

    Computed with a max shift for overflow safety; under score ties with K
    corruptions the loss is exactly ln(K + 1).
    """
    candidates = [fact, *corruptions]
    scores = np.array([score(model, c) for c in candidates])
    m = scores.max()
    shifted = scores - m
    z = np.exp(shifted).sum()
    loss = float(np.log(z) - shifted[0])
    weights = np.exp(shifted) / z
    weights[0] -= 1.0
    grads = GradientMap()
    for cand, w in zip(candidates, weights):
        _score_grads(model, cand, w, grads)
    return loss, grads


def margin_loss(model: EmbeddingModel, fact, corruptions, margin: float) -> tuple[float, GradientMap]:
    """Hinge ranking loss: sum over corruptions of [margin + S(f') - S(f)]+.

    The subgradient at the hinge point is 0.
    """
    if margin <= 0:
        raise ArgumentError("margin must be > 0")
    s_true = score(model, fact)
    loss = 0.0
    grads = GradientMap()
    n_violations = 0
    for cand in corruptions:
        violation = margin + score(model, cand) - s_true
        if violation > 0.0:
            loss += violation
            n_violations += 1
            _score_grads(model, cand, 1.0, grads)
    if n_violations:
        _score_grads(model, fact, -float(n_violations), grads)
    return float(loss), grads


def fm_penalty(model: EmbeddingModel, groups: FmGroups, sigma: float) -> tuple[float, GradientMap]:
    """Weighted distance between two group mean embeddings.

    Value sigma * ||mean_m - mean_n||_2, gradients spread over member rows
    (zero subgradient when the means already coincide).
    """
    if len(groups.members) != 2:
        raise ArgumentError("fm_penalty needs exactly two groups")
    if sigma < 0:
        raise ArgumentError("sigma must be >= 0")
    mem_m, mem_n = groups.members
    mu_m = model.entity[mem_m].mean(axis=0)
    mu_n = model.entity[mem_n].mean(axis=0)
    diff = mu_m - mu_n
    norm = float(np.linalg.norm(diff))
    grads = GradientMap()
    if norm > 0.0 and sigma > 0.0:
        direction = diff / norm
        gm = sigma * direction / len(mem_m)
        gn = -sigma * direction / len(mem_n)
        for eid in mem_m:
            grads.add_entity(int(eid), gm)
        for eid in mem_n:
            grads.add_entity(int(eid), gn)
    return sigma * norm, grads


def fm_multi_penalty(
    model: EmbeddingModel, groups: FmGroups, theta: float, base_loss: float
) -> tuple[float, GradientMap]:
    """Multi-class first-moment objective.

    theta * base_loss
      + sum_i (1/N_i) sum_{u in class i} (||u - mu_i||^2 - 1)^2
      + (1/P) sum_{i<j} ||mu_i - mu_j||^2,  P = n(n-1)/2.

    Gradients cover the two penalty terms (the scaled base loss is a
    constant input here); the centroid dependence is differentiated
    exactly.
    """
    if theta <= 0:
        raise ArgumentError("theta must be > 0")
    n_classes = len(groups.members)
    if n_classes < 2:
        raise ArgumentError("need at least two classes")

    grads = GradientMap()
    centroids = np.stack([model.entity[m].mean(axis=0) for m in groups.members])
    spread_term = 0.0
    for i, members in enumerate(groups.members):
        vecs = model.entity[members]
        errs = vecs - centroids[i]
        a = np.einsum("ij,ij->i", errs, errs) - 1.0
        n_i = len(members)
        spread_term += float(np.sum(a**2)) / n_i
        weighted = errs * a[:, None]
        correction = weighted.sum(axis=0) / n_i
        for k, eid in enumerate(members):
            grads.add_entity(int(eid), (4.0 / n_i) * (weighted[k] - correction))

    n_pairs = n_classes * (n_classes - 1) // 2
    diffs = centroids[:, None, :] - centroids[None, :, :]
    pair_term = float(np.sum(diffs[np.triu_indices(n_classes, k=1)] ** 2)) / n_pairs
    centroid_sum = centroids.sum(axis=0)
    for i, members in enumerate(groups.members):
        pair_grad = (2.0 / (n_pairs * len(members))) * (
            n_classes * centroids[i] - centroid_sum
        )
        for eid in members:
            grads.add_entity(int(eid), pair_grad)

    value = theta * base_loss + spread_term + pair_term
    return value, grads


# ---------------------------------------------------------------------------
# Negative sampling
# ---------------------------------------------------------------------------

class NegativeSamplingTables:
    """Per-kind entity pools and the sorted true-fact key set."""

    def __init__(self, graph: KnowledgeGraph):
        kinds = sorted(set(graph.entity_kinds))
        kind_index = {k: i for i, k in enumerate(kinds)}
        self.kind_of = np.asarray(
            [kind_index[k] for k in graph.entity_kinds], dtype=np.int64
        )
        pools = [graph.entities_of_kind(k) for k in kinds]
        self.pool_sizes = np.asarray([p.size for p in pools], dtype=np.int64)
        self.pool_offsets = np.concatenate(
            [[0], np.cumsum(self.pool_sizes[:-1])]
        ).astype(np.int64)
        self.pool_flat = (
            np.concatenate(pools) if pools else np.empty(0, np.int64)
        )
        self.n_entities = graph.n_entities
        self.n_relations = graph.n_relations
        self.true_keys = np.sort(
            _fact_keys(graph.facts, self.n_relations, self.n_entities)
        )

    def is_true(self, keys: np.ndarray) -> np.ndarray:
        if self.true_keys.size == 0:
            return np.zeros(keys.shape, dtype=bool)
        pos = np.searchsorted(self.true_keys, keys)
        pos = np.minimum(pos, self.true_keys.size - 1)
        return self.true_keys[pos] == keys


def sample_negatives(
    triple, graph: KnowledgeGraph, k_e: int, k_r: int, rng: np.random.Generator,
    max_attempts: int = 100, tables: NegativeSamplingTables | None = None,
    stats: dict | None = None,
) -> list[Triple]:
    """Corrupt one fact: k_e same-kind entity swaps (head or tail by fair
    coin), then k_r replacements of the relation by a different one.

    Corruptions colliding with true facts are redrawn up to
    ``max_attempts`` times and then kept (counted in ``stats`` under
    ``"kept_collisions"``).
    """
    if k_e < 0 or k_r < 0:
        raise ArgumentError("negative-sample counts must be >= 0")
    if k_r > 0 and graph.n_relations < 2:
        raise ArgumentError("cannot corrupt relations with fewer than 2 relations")
    tables = tables or NegativeSamplingTables(graph)
    h, r, t = _ids(triple)
    out: list[Triple] = []

    for _ in range(k_e):
        cand = None
        for _attempt in range(max_attempts):
            replace_head = bool(rng.random() < 0.5)
            kind = tables.kind_of[h if replace_head else t]
            pool_size = int(tables.pool_sizes[kind])
            pick = int(tables.pool_flat[tables.pool_offsets[kind] + int(rng.random() * pool_size)])
            cand = Triple(pick, r, t) if replace_head else Triple(h, r, pick)
            key = np.int64((cand.head * tables.n_relations + cand.relation) * tables.n_entities + cand.tail)
            if not bool(tables.is_true(np.asarray([key]))[0]):
                break
        else:
            if stats is not None:
                stats["kept_collisions"] = stats.get("kept_collisions", 0) + 1
        out.append(cand)

    for _ in range(k_r):
        cand = None
        for _attempt in range(max_attempts):
            v = int(rng.random() * (tables.n_relations - 1))
            new_r = v + (1 if v >= r else 0)
            cand = Triple(h, new_r, t)
            key = np.int64((h * tables.n_relations + new_r) * tables.n_entities + t)
            if not bool(tables.is_true(np.asarray([key]))[0]):
                break
        else:
            if stats is not None:
                stats["kept_collisions"] = stats.get("kept_collisions", 0) + 1
        out.append(cand)
    return out


def sample_negatives_batch(
    bh: np.ndarray, br: np.ndarray, bt: np.ndarray, k_e: int, k_r: int,
    tables: NegativeSamplingTables, rng: np.random.Generator,
    max_attempts: int = 100,
):
    """Vectorized corruption of a fact batch; same redraw-then-keep policy
    as :func:`sample_negatives`.  Returns (neg_e, neg_e_head, neg_r, kept).
    """
    b = bh.shape[0]
    kept = 0

    neg_e = np.zeros((b, k_e), dtype=np.int64)
    neg_e_head = np.zeros((b, k_e), dtype=np.uint8)
    if k_e:
        coin = rng.random((b, k_e)) < 0.5
        kinds = np.where(coin, tables.kind_of[bh][:, None], tables.kind_of[bt][:, None])
        draw = (rng.random((b, k_e)) * tables.pool_sizes[kinds]).astype(np.int64)
        neg_e = tables.pool_flat[tables.pool_offsets[kinds] + draw]
        neg_e_head = coin.astype(np.uint8)

        def _keys_e():
            heads = np.where(coin, neg_e, bh[:, None])
            tails = np.where(coin, bt[:, None], neg_e)
            return (heads * tables.n_relations + br[:, None]) * tables.n_entities + tails

        colliding = tables.is_true(_keys_e())
        for _ in range(max_attempts - 1):
            if not colliding.any():
                break
            n_bad = int(colliding.sum())
            new_coin = rng.random(n_bad) < 0.5
            coin[colliding] = new_coin
            kinds_bad = np.where(
                new_coin,
                tables.kind_of[np.broadcast_to(bh[:, None], coin.shape)[colliding]],
                tables.kind_of[np.broadcast_to(bt[:, None], coin.shape)[colliding]],
            )
            draw_bad = (rng.random(n_bad) * tables.pool_sizes[kinds_bad]).astype(np.int64)
            neg_e[colliding] = tables.pool_flat[tables.pool_offsets[kinds_bad] + draw_bad]
            neg_e_head[colliding] = new_coin.astype(np.uint8)
            colliding = tables.is_true(_keys_e())
        kept += int(colliding.sum())

    neg_r = np.zeros((b, k_r), dtype=np.int64)
    if k_r:
        if tables.n_relations < 2:
            raise ArgumentError("cannot corrupt relations with fewer than 2 relations")
        v = (rng.random((b, k_r)) * (tables.n_relations - 1)).astype(np.int64)
        neg_r = v + (v >= br[:, None])

        def _keys_r():
            return (bh[:, None] * tables.n_relations + neg_r) * tables.n_entities + bt[:, None]

        colliding = tables.is_true(_keys_r())
        for _ in range(max_attempts - 1):
            if not colliding.any():
                break
            n_bad = int(colliding.sum())
            v_bad = (rng.random(n_bad) * (tables.n_relations - 1)).astype(np.int64)
            br_bad = np.broadcast_to(br[:, None], neg_r.shape)[colliding]
            neg_r[colliding] = v_bad + (v_bad >= br_bad)
            colliding = tables.is_true(_keys_r())
        kept += int(colliding.sum())

    return neg_e, neg_e_head, neg_r, kept


# ---------------------------------------------------------------------------
# First-moment batch steps
# ---------------------------------------------------------------------------

def _fm_two_batch_step(ent, group_of, sigma, lr, batch_entities) -> float:
    present = batch_entities[group_of[batch_entities] >= 0]
    mem_m = present[group_of[present] == 0]
    mem_n = present[group_of[present] == 1]
    if mem_m.size == 0 or mem_n.size == 0:
        return 0.0
    mu_m = ent[mem_m].mean(axis=0)
    mu_n = ent[mem_n].mean(axis=0)
    diff = mu_m - mu_n
    norm = float(np.linalg.norm(diff))
    if norm > 0.0 and sigma > 0.0:
        direction = diff / norm
        ent[mem_m] -= lr * sigma * direction / mem_m.size
        ent[mem_n] += lr * sigma * direction / mem_n.size
    return sigma * norm


def _fm_multi_batch_step(ent, group_of, n_groups, lr, batch_entities) -> float:
    present = batch_entities[group_of[batch_entities] >= 0]
    if present.size == 0:
        return 0.0
    classes = [present[group_of[present] == g] for g in range(n_groups)]
    classes = [c for c in classes if c.size > 0]
    if len(classes) < 2:
        return 0.0

    centroids = np.stack([ent[c].mean(axis=0) for c in classes])
    penalty = 0.0
    updates_rows = []
    updates_vecs = []
    for i, members in enumerate(classes):
        vecs = ent[members]
        errs = vecs - centroids[i]
        a = np.einsum("ij,ij->i", errs, errs) - 1.0
        n_i = members.size
        penalty += float(np.sum(a**2)) / n_i
        weighted = errs * a[:, None]
        correction = weighted.sum(axis=0) / n_i
        updates_rows.append(members)
        updates_vecs.append((4.0 / n_i) * (weighted - correction))

    n_classes = len(classes)
    n_pairs = n_classes * (n_classes - 1) // 2
    centroid_sum = centroids.sum(axis=0)
    diffs = centroids[:, None, :] - centroids[None, :, :]
    penalty += float(np.sum(diffs[np.triu_indices(n_classes, k=1)] ** 2)) / n_pairs
    for i, members in enumerate(classes):
        pair_grad = (2.0 / (n_pairs * members.size)) * (
            n_classes * centroids[i] - centroid_sum
        )
        updates_rows.append(members)
        updates_vecs.append(np.broadcast_to(pair_grad, (members.size, ent.shape[1])))

    for rows, vecs in zip(updates_rows, updates_vecs):
        np.subtract.at(ent, rows, lr * vecs)
    return penalty


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    model: EmbeddingModel
    epoch_losses: list[float]
    fm_full_penalties: list[float] | None = None
    kept_collisions: int = 0


def train(
    graph: KnowledgeGraph,
    split: Split,
    config: TrainConfig,
    checkpoint_dir=None,
    log_every: int = 0,
) -> TrainResult:
    """Plain SGD over shuffled mini-batches of the training facts.

    First-moment penalties, when configured, are applied per batch over the
    group members present in that batch's facts; the full-group penalty is
    recomputed at each epoch end for the trace.  A checkpoint is written
    every 50 epochs when ``checkpoint_dir`` is given.  Aborts if the loss
    stops being finite.
    """
    if split.train.shape[0] == 0:
        raise ArgumentError("empty training split")
    model = init_model(graph, config.dim, config.seed)
    ent, rel = model.entity, model.relation
    tables = NegativeSamplingTables(graph)

    h = np.ascontiguousarray(split.train[:, 0])
    r = np.ascontiguousarray(split.train[:, 1])
    t = np.ascontiguousarray(split.train[:, 2])
    n = h.shape[0]

    fm_cfg = config.fm
    groups = group_of = None
    base_scale = 1.0
    if fm_cfg is not None:
        groups = fm_groups(
            graph, fm_cfg.attribute,
            values=fm_cfg.values if fm_cfg.mode == "two" else None,
        )
        group_of = -np.ones(graph.n_entities, dtype=np.int64)
        for gi, members in enumerate(groups.members):
            group_of[members] = gi
        if fm_cfg.mode == "multi":
            base_scale = fm_cfg.theta

    lr = config.learning_rate
    epoch_losses: list[float] = []
    fm_full: list[float] | None = [] if fm_cfg is not None else None
    kept = 0

    for epoch in range(config.epochs):
        rng = rng_for(config.seed, "epoch", epoch)
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            bh, br, bt = h[idx], r[idx], t[idx]
            neg_e, neg_e_head, neg_r, batch_kept = sample_negatives_batch(
                bh, br, bt, config.neg_entities, config.neg_relations, tables, rng
            )
            kept += batch_kept
            if config.loss_kind == "softmax":
                batch_loss = kernels.softmax_batch_step(
                    ent, rel, bh, br, bt, neg_e, neg_e_head, neg_r, lr * base_scale
                )
            else:
                batch_loss = kernels.margin_batch_step(
                    ent, rel, bh, br, bt, neg_e, neg_e_head, neg_r,
                    config.margin, lr * base_scale,
                )
            total += base_scale * batch_loss

            if fm_cfg is not None:
                batch_entities = np.unique(np.concatenate([bh, bt]))
                if fm_cfg.mode == "two":
                    total += _fm_two_batch_step(
                        ent, group_of, fm_cfg.sigma, lr, batch_entities
                    )
                else:
                    total += _fm_multi_batch_step(
                        ent, group_of, len(groups.members), lr, batch_entities
                    )

        if not np.isfinite(total):
            raise TrainingDiverged(
                f"loss became non-finite at epoch {epoch} (got {total})"
            )
        epoch_losses.append(total)
        if fm_cfg is not None:
            if fm_cfg.mode == "two":
                value, _ = fm_penalty(model, groups, fm_cfg.sigma)
            else:
                value, _ = fm_multi_penalty(model, groups, fm_cfg.theta, 0.0)
            fm_full.append(value)
        if log_every and (epoch + 1) % log_every == 0:
            print(f"epoch {epoch + 1}/{config.epochs} loss {total:.4f}", flush=True)
        if checkpoint_dir is not None and (epoch + 1) % 50 == 0:
            save_checkpoint(
                Path(checkpoint_dir) / f"ckpt-epoch{epoch + 1:04d}.bin", model, config
            )

    return TrainResult(
        model=model,
        epoch_losses=epoch_losses,
        fm_full_penalties=fm_full,
        kept_collisions=kept,
    )


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, model: EmbeddingModel, config: TrainConfig | None = None) -> None:
    """Binary checkpoint: uint64 (entities, relations, dim) then both
    matrices row-major float64 little-endian; config in a .json sidecar.
    """
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(
            struct.pack(
                "<QQQ", model.entity.shape[0], model.relation.shape[0], model.dim
            )
        )
        fh.write(model.entity.astype("<f8").tobytes(order="C"))
        fh.write(model.relation.astype("<f8").tobytes(order="C"))
    sidecar = {"entities": model.entity.shape[0], "relations": model.relation.shape[0],
               "dim": model.dim}
    if config is not None:
        sidecar["config"] = asdict(config)
    path.with_suffix(".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2), encoding="utf-8"
    )


def load_checkpoint(path) -> tuple[EmbeddingModel, dict | None]:
    path = Path(path)
    with open(path, "rb") as fh:
        n_ent, n_rel, dim = struct.unpack("<QQQ", fh.read(24))
        ent = np.frombuffer(fh.read(n_ent * dim * 8), dtype="<f8").reshape(n_ent, dim)
        rel = np.frombuffer(fh.read(n_rel * dim * 8), dtype="<f8").reshape(n_rel, dim)
    model = EmbeddingModel(ent.astype(np.float64), rel.astype(np.float64))
    sidecar_path = path.with_suffix(".json")
    config = None
    if sidecar_path.is_file():
        config = json.loads(sidecar_path.read_text(encoding="utf-8")).get("config")
    return model, config
