"""Synthetic rating graphs with a planted, tunable attribute leak.

Users carry a binary group attribute.  Ratings come from a shared latent
taste model, except on a "marked" half of the items where the mean rating
shifts by ``leak_strength`` in opposite directions for the two groups.
At leak_strength 0 behaviour is attribute-independent; at 1 the groups are
near-perfectly separable from behaviour alone, which makes these graphs
the ground-truth oracle for the detection and removal methods.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .graph import AttributeTable, KnowledgeGraph
from .numkit import rng_for

_LEAK_SHIFT = 1.6
_TASTE_SCALE = 1.1
_NOISE_SD = 0.6


@dataclass
class SyntheticSpec:
    users: int
    items: int
    leak_strength: float = 0.5
    dim_latent: int = 8
    ratings_per_user: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.users < 2 or self.items < 2:
            raise ArgumentError("need at least 2 users and 2 items")
        if not 0.0 <= self.leak_strength <= 1.0:
            raise ArgumentError("leak_strength must be in [0, 1]")
        if self.dim_latent < 1 or self.ratings_per_user < 1:
            raise ArgumentError("dim_latent and ratings_per_user must be >= 1")


def generate_synthetic(spec: SyntheticSpec) -> KnowledgeGraph:
    """Deterministic synthetic (user, rating, item) graph for a spec."""
    rng = rng_for(spec.seed, "synth")
    n_users, n_items = spec.users, spec.items
    per_user = min(spec.ratings_per_user, n_items)

    group_sign = np.where(np.arange(n_users) % 2 == 0, 1.0, -1.0)
    taste = rng.normal(size=(n_users, spec.dim_latent))
    appeal = rng.normal(size=(n_items, spec.dim_latent))
    marked = np.arange(n_items) < n_items // 2

    rows = []
    for user in range(n_users):
        items = rng.choice(n_items, size=per_user, replace=False)
        affinity = taste[user] @ appeal[items].T / np.sqrt(spec.dim_latent)
        mean = 3.0 + _TASTE_SCALE * np.tanh(affinity)
        mean = mean + spec.leak_strength * _LEAK_SHIFT * group_sign[user] * marked[items]
        ratings = np.clip(
            np.rint(mean + rng.normal(scale=_NOISE_SD, size=per_user)), 1, 5
        ).astype(np.int64)
        for item, rating in zip(items, ratings):
            rows.append((user, int(rating) - 1, n_users + int(item)))

    entity_names = [f"user:{u}" for u in range(n_users)] + [
        f"item:{i}" for i in range(n_items)
    ]
    entity_kinds = ["user"] * n_users + ["item"] * n_items
    assignments = {
        u: ("A" if group_sign[u] > 0 else "B") for u in range(n_users)
    }
    graph = KnowledgeGraph(
        entity_names=entity_names,
        entity_kinds=entity_kinds,
        relation_names=[str(v) for v in range(1, 6)],
        relation_head_kinds=["user"] * 5,
        relation_tail_kinds=["item"] * 5,
        facts=np.asarray(rows, dtype=np.int64),
        attributes={"group": AttributeTable("user", ["A", "B"], assignments)},
    )
    graph.validate()
    return graph
