"""Canonical knowledge-graph representation and dataset ingestion.

Datasets are parsed into a :class:`KnowledgeGraph`: dense 0-based entity
and relation ids (assigned in first-appearance order), an ordered fact
array, a kind tag per entity, and categorical attribute tables.  The same
module builds Boolean attribute matrices, deterministic splits and
balanced subsamples, and per-attribute-combination mean embeddings.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ArgumentError, DomainError, ParseError
from .numkit import rng_for

MOVIELENS_AGE_CODES = ("1", "18", "25", "35", "45", "50", "56")
MOVIELENS_OCCUPATION_CODES = tuple(str(i) for i in range(21))

# Canonical KG20C relation vocabulary.  "Paper in conference" triples are
# diverted to a paper attribute instead of becoming training facts.
KG20C_RELATIONS = (
    "Author in affiliation",
    "Author write paper",
    "Paper cite paper",
    "Paper in domain",
)
KG20C_CONFERENCE_RELATION = "Paper in conference"
_KG20C_SCHEMA = {
    "Author in affiliation": ("author", "affiliation"),
    "Author write paper": ("author", "paper"),
    "Paper cite paper": ("paper", "paper"),
    "Paper in domain": ("paper", "domain"),
    KG20C_CONFERENCE_RELATION: ("paper", "conference"),
}


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


@dataclass
class AttributeTable:
    """One categorical attribute: declared value set plus assignments."""

    kind: str
    values: list[str]
    assignments: dict[int, str]

    def __post_init__(self):
        declared = set(self.values)
        for eid, value in self.assignments.items():
            if value not in declared:
                raise DomainError(
                    f"value {value!r} for entity {eid} outside declared set"
                )


@dataclass
class KnowledgeGraph:
    entity_names: list[str]
    entity_kinds: list[str]
    relation_names: list[str]
    relation_head_kinds: list[str]
    relation_tail_kinds: list[str]
    facts: np.ndarray                      # (n, 3) int64 rows (head, rel, tail)
    attributes: dict[str, AttributeTable] = field(default_factory=dict)
    predefined_split: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def n_entities(self) -> int:
        return len(self.entity_names)

    @property
    def n_relations(self) -> int:
        return len(self.relation_names)

    @property
    def n_facts(self) -> int:
        return int(self.facts.shape[0])

    def triples(self) -> Iterator[Triple]:
        for h, r, t in self.facts:
            yield Triple(int(h), int(r), int(t))

    def entities_of_kind(self, kind: str) -> np.ndarray:
        kinds = np.asarray(self.entity_kinds, dtype=object)
        return np.flatnonzero(kinds == kind).astype(np.int64)

    def validate(self) -> None:
        if self.facts.size:
            if self.facts[:, 0].max() >= self.n_entities or self.facts[:, 0].min() < 0:
                raise DomainError("head id out of range")
            if self.facts[:, 2].max() >= self.n_entities or self.facts[:, 2].min() < 0:
                raise DomainError("tail id out of range")
            if self.facts[:, 1].max() >= self.n_relations or self.facts[:, 1].min() < 0:
                raise DomainError("relation id out of range")
        keys = _fact_keys(self.facts, self.n_relations, self.n_entities)
        if np.unique(keys).size != keys.size:
            raise DomainError("duplicate facts present")

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        doc = {
            "entities": {"names": self.entity_names, "kinds": self.entity_kinds},
            "relations": {
                "names": self.relation_names,
                "head_kinds": self.relation_head_kinds,
                "tail_kinds": self.relation_tail_kinds,
            },
            "facts": self.facts.tolist(),
            "attributes": {
                name: {
                    "kind": table.kind,
                    "values": table.values,
                    "assignments": {str(k): v for k, v in sorted(table.assignments.items())},
                }
                for name, table in sorted(self.attributes.items())
            },
            "predefined_split": None,
        }
        if self.predefined_split is not None:
            train, test = self.predefined_split
            doc["predefined_split"] = {"train": train.tolist(), "test": test.tolist()}
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "KnowledgeGraph":
        split = None
        if doc.get("predefined_split"):
            split = (
                np.asarray(doc["predefined_split"]["train"], dtype=np.int64),
                np.asarray(doc["predefined_split"]["test"], dtype=np.int64),
            )
        return cls(
            entity_names=list(doc["entities"]["names"]),
            entity_kinds=list(doc["entities"]["kinds"]),
            relation_names=list(doc["relations"]["names"]),
            relation_head_kinds=list(doc["relations"]["head_kinds"]),
            relation_tail_kinds=list(doc["relations"]["tail_kinds"]),
            facts=np.asarray(doc["facts"], dtype=np.int64).reshape(-1, 3),
            attributes={
                name: AttributeTable(
                    kind=entry["kind"],
                    values=list(entry["values"]),
                    assignments={int(k): v for k, v in entry["assignments"].items()},
                )
                for name, entry in doc.get("attributes", {}).items()
            },
            predefined_split=split,
        )

    @classmethod
    def load(cls, path) -> "KnowledgeGraph":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class Split:
    train: np.ndarray
    test: np.ndarray
    seed: int
    ratio: float
    predefined: bool = False


def _fact_keys(facts: np.ndarray, n_relations: int, n_entities: int) -> np.ndarray:
    """Encode (h, r, t) rows as single int64 keys for set operations."""
    return (facts[:, 0] * n_relations + facts[:, 1]) * n_entities + facts[:, 2]


class _IdAssigner:
    """Dense ids in first-appearance order."""

    def __init__(self):
        self.index: dict[str, int] = {}
        self.names: list[str] = []
        self.kinds: list[str] = []

    def get(self, name: str, kind: str, line: int | None = None) -> int:
        eid = self.index.get(name)
        if eid is None:
            eid = len(self.names)
            self.index[name] = eid
            self.names.append(name)
            self.kinds.append(kind)
            return eid
        if self.kinds[eid] != kind:
            raise DomainError(
                f"entity {name!r} used as {kind!r} but previously {self.kinds[eid]!r}"
                + (f" (line {line})" if line is not None else "")
            )
        return eid


def _dedup_facts(rows: list[tuple[int, int, int]], n_relations: int, n_entities: int) -> np.ndarray:
    facts = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    if not facts.size:
        return facts
    keys = _fact_keys(facts, n_relations, n_entities)
    _, first = np.unique(keys, return_index=True)
    if first.size != facts.shape[0]:
        warnings.warn(
            f"{facts.shape[0] - first.size} duplicate facts ignored", stacklevel=3
        )
        facts = facts[np.sort(first)]
    return facts


# ---------------------------------------------------------------------------
# MovieLens-1M ingestion
# ---------------------------------------------------------------------------

def ingest_movielens(directory) -> KnowledgeGraph:
    """Parse a MovieLens-1M release directory into a knowledge graph.

    Users and movies become entities (users first, file order; movies by
    first appearance in the ratings file); the five rating values become
    relations "1".."5"; each rating record becomes one (user, rating,
    movie) fact.  Gender, age-bucket and occupation codes attach to users.
    Records are '::'-delimited Latin-1 text.
    """
    directory = Path(directory)
    ratings_path = directory / "ratings.dat"
    users_path = directory / "users.dat"
    if not ratings_path.is_file() or not users_path.is_file():
        raise ArgumentError(f"{directory} does not contain ratings.dat and users.dat")

    ids = _IdAssigner()
    gender: dict[int, str] = {}
    age: dict[int, str] = {}
    occupation: dict[int, str] = {}

    with open(users_path, encoding="latin-1") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != 5:
                raise ParseError(f"expected 5 '::' fields, got {len(parts)}", lineno)
            user, g, a, occ, _zip = parts
            eid = ids.get(f"user:{user}", "user", lineno)
            if g not in ("F", "M"):
                raise DomainError(f"line {lineno}: unknown gender code {g!r}")
            if a not in MOVIELENS_AGE_CODES:
                raise DomainError(f"line {lineno}: unknown age code {a!r}")
            if occ not in MOVIELENS_OCCUPATION_CODES:
                raise DomainError(f"line {lineno}: unknown occupation code {occ!r}")
            gender[eid] = g
            age[eid] = a
            occupation[eid] = occ

    rows: list[tuple[int, int, int]] = []
    with open(ratings_path, encoding="latin-1") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != 4:
                raise ParseError(f"expected 4 '::' fields, got {len(parts)}", lineno)
            user, movie, rating, _ts = parts
            try:
                value = int(rating)
            except ValueError:
                raise ParseError(f"non-integer rating {rating!r}", lineno) from None
            if not 1 <= value <= 5:
                raise DomainError(f"line {lineno}: rating {value} outside 1-5")
            head = ids.get(f"user:{user}", "user", lineno)
            tail = ids.get(f"movie:{movie}", "movie", lineno)
            rows.append((head, value - 1, tail))

    relation_names = [str(v) for v in range(1, 6)]
    facts = _dedup_facts(rows, len(relation_names), len(ids.names))
    graph = KnowledgeGraph(
        entity_names=ids.names,
        entity_kinds=ids.kinds,
        relation_names=relation_names,
        relation_head_kinds=["user"] * 5,
        relation_tail_kinds=["movie"] * 5,
        facts=facts,
        attributes={
            "gender": AttributeTable("user", ["F", "M"], gender),
            "age": AttributeTable("user", list(MOVIELENS_AGE_CODES), age),
            "occupation": AttributeTable("user", list(MOVIELENS_OCCUPATION_CODES), occupation),
        },
    )
    graph.validate()
    return graph


# ---------------------------------------------------------------------------
# KG20C ingestion
# ---------------------------------------------------------------------------

def _normalize_relation(token: str) -> str | None:
    flat = token.replace("_", " ").replace("-", " ").strip().lower()
    for canonical in (*KG20C_RELATIONS, KG20C_CONFERENCE_RELATION):
        if flat == canonical.lower():
            return canonical
    return None


def _kg20c_files(directory: Path) -> list[tuple[str, Path]]:
    named = []
    for section in ("train", "valid", "test"):
        for suffix in (".txt", ".tsv"):
            path = directory / f"{section}{suffix}"
            if path.is_file():
                named.append((section, path))
                break
    if named:
        return named
    loose = sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix in (".txt", ".tsv")
    )
    if not loose:
        raise ArgumentError(f"{directory} contains no .txt/.tsv triple files")
    return [("train", p) for p in loose]


def ingest_kg20c(directory) -> KnowledgeGraph:
    """Parse a KG20C citation-graph directory.

    Accepts tab-separated (head, relation, tail) lines from either
    predefined train/valid/test files (split recorded on the graph, valid
    folded into train) or any other .txt/.tsv files.  Conference-membership
    triples never become facts: the conference is stored as a paper
    attribute, so embeddings train on the remaining four relation types
    only.  Every paper must carry exactly one conference label.
    """
    directory = Path(directory)
    files = _kg20c_files(directory)
    has_predefined = {name for name, _ in files} >= {"train", "test"}

    ids = _IdAssigner()
    rel_index = {name: i for i, name in enumerate(KG20C_RELATIONS)}
    rows: list[tuple[int, int, int]] = []
    sections: list[str] = []
    conference: dict[int, str] = {}

    for section, path in files:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ParseError(
                        f"{path.name}: expected 3 tab-separated fields, got {len(parts)}",
                        lineno,
                    )
                head, rel_token, tail = (p.strip() for p in parts)
                canonical = _normalize_relation(rel_token)
                if canonical is None:
                    raise ParseError(
                        f"{path.name}: unknown relation {rel_token!r}", lineno
                    )
                head_kind, tail_kind = _KG20C_SCHEMA[canonical]
                hid = ids.get(head, head_kind, lineno)
                tid = ids.get(tail, tail_kind, lineno)
                if canonical == KG20C_CONFERENCE_RELATION:
                    label = ids.names[tid]
                    previous = conference.get(hid)
                    if previous is not None and previous != label:
                        raise DomainError(
                            f"paper {head!r} labeled with multiple conferences"
                        )
                    conference[hid] = label
                    continue
                rows.append((hid, rel_index[canonical], tid))
                sections.append(section)

    facts = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    keys = _fact_keys(facts, len(KG20C_RELATIONS), len(ids.names)) if facts.size else np.empty(0, np.int64)
    _, first = np.unique(keys, return_index=True)
    if first.size != facts.shape[0]:
        warnings.warn(f"{facts.shape[0] - first.size} duplicate facts ignored")
        keep = np.sort(first)
        facts = facts[keep]
        sections = [sections[i] for i in keep]

    papers = [
        eid for eid, kind in enumerate(ids.kinds) if kind == "paper"
    ]
    unlabeled = [ids.names[eid] for eid in papers if eid not in conference]
    if unlabeled:
        raise DomainError(
            f"{len(unlabeled)} papers lack a conference label "
            f"(first: {unlabeled[0]!r})"
        )

    predefined = None
    if has_predefined:
        section_arr = np.asarray(sections, dtype=object)
        test_idx = np.flatnonzero(section_arr == "test").astype(np.int64)
        train_idx = np.flatnonzero(section_arr != "test").astype(np.int64)
        predefined = (train_idx, test_idx)

    conference_values = sorted(set(conference.values()))
    graph = KnowledgeGraph(
        entity_names=ids.names,
        entity_kinds=ids.kinds,
        relation_names=list(KG20C_RELATIONS),
        relation_head_kinds=[_KG20C_SCHEMA[r][0] for r in KG20C_RELATIONS],
        relation_tail_kinds=[_KG20C_SCHEMA[r][1] for r in KG20C_RELATIONS],
        facts=facts,
        attributes={
            "conference": AttributeTable("paper", conference_values, conference)
        },
        predefined_split=predefined,
    )
    graph.validate()
    return graph


# ---------------------------------------------------------------------------
# Splits and subsamples
# ---------------------------------------------------------------------------

def split_triples(graph: KnowledgeGraph, test_ratio: float, seed: int) -> Split:
    """Partition facts into train/test uniformly at random under the seed.

    Graphs that ship predefined splits keep them verbatim (the seed is
    ignored and the predefined flag is set).
    """
    if not 0.0 < test_ratio < 1.0:
        raise ArgumentError(f"test_ratio must be in (0, 1), got {test_ratio}")
    if graph.predefined_split is not None:
        train_idx, test_idx = graph.predefined_split
        return Split(
            train=graph.facts[train_idx].copy(),
            test=graph.facts[test_idx].copy(),
            seed=seed,
            ratio=test_ratio,
            predefined=True,
        )
    n = graph.n_facts
    n_test = int(round(test_ratio * n))
    perm = rng_for(seed, "split").permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return Split(
        train=graph.facts[train_idx].copy(),
        test=graph.facts[test_idx].copy(),
        seed=seed,
        ratio=test_ratio,
    )


def balanced_subsample(labels, seed: int) -> np.ndarray:
    """Indices of a class-balanced, shuffled subsample.

    Every class is downsampled to the minority-class count; deterministic
    for a fixed seed.
    """
    labels = np.asarray(labels, dtype=object).ravel()
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2:
        raise ArgumentError("need at least 2 distinct labels")
    target = int(counts.min())
    rng = rng_for(seed, "balanced")
    picked = [
        rng.choice(np.flatnonzero(labels == cls), size=target, replace=False)
        for cls in classes
    ]
    out = np.concatenate(picked).astype(np.int64)
    rng.shuffle(out)
    return out


def subsample_kind(graph: KnowledgeGraph, kind: str, fraction: float, seed: int) -> KnowledgeGraph:
    """Keep a random fraction of the entities of one kind.

    Facts touching dropped entities are removed; surviving entities are
    re-indexed densely preserving their original relative order.  Used for
    desk-scale proxy runs.
    """
    if not 0.0 < fraction <= 1.0:
        raise ArgumentError(f"fraction must be in (0, 1], got {fraction}")
    pool = graph.entities_of_kind(kind)
    if not pool.size:
        raise ArgumentError(f"no entities of kind {kind!r}")
    n_keep = max(1, int(round(fraction * pool.size)))
    rng = rng_for(seed, "subsample", kind)
    kept = set(rng.choice(pool, size=n_keep, replace=False).tolist())

    keep_entity = np.ones(graph.n_entities, dtype=bool)
    for eid in pool:
        if int(eid) not in kept:
            keep_entity[eid] = False
    fact_mask = keep_entity[graph.facts[:, 0]] & keep_entity[graph.facts[:, 2]]
    facts = graph.facts[fact_mask]

    used = np.zeros(graph.n_entities, dtype=bool)
    used[keep_entity] = True
    old_ids = np.flatnonzero(used)
    remap = -np.ones(graph.n_entities, dtype=np.int64)
    remap[old_ids] = np.arange(old_ids.size)
    facts = facts.copy()
    facts[:, 0] = remap[facts[:, 0]]
    facts[:, 2] = remap[facts[:, 2]]

    attributes = {
        name: AttributeTable(
            kind=table.kind,
            values=list(table.values),
            assignments={
                int(remap[eid]): value
                for eid, value in table.assignments.items()
                if remap[eid] >= 0
            },
        )
        for name, table in graph.attributes.items()
    }
    return KnowledgeGraph(
        entity_names=[graph.entity_names[i] for i in old_ids],
        entity_kinds=[graph.entity_kinds[i] for i in old_ids],
        relation_names=list(graph.relation_names),
        relation_head_kinds=list(graph.relation_head_kinds),
        relation_tail_kinds=list(graph.relation_tail_kinds),
        facts=facts,
        attributes=attributes,
    )


# ---------------------------------------------------------------------------
# Attribute matrices and group means
# ---------------------------------------------------------------------------

@dataclass
class AttributeMatrix:
    """Boolean entity-by-attribute-value indicators, one-hot per attribute."""

    rows: np.ndarray                   # entity ids, (n,)
    columns: list[tuple[str, str]]     # (attribute name, value)
    data: np.ndarray                   # (n, c) uint8
    groups: dict[str, np.ndarray]      # attribute name -> column indices

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def build_attribute_matrix(
    graph: KnowledgeGraph, attribute_names: list[str], entity_kind: str
) -> AttributeMatrix:
    """One-hot encode the requested attributes for one entity kind.

    Rows are the entities of the kind possessing every requested attribute,
    in id order; columns follow the requested attribute order, values in
    declared order.
    """
    if not attribute_names:
        raise ArgumentError("need at least one attribute name")
    tables = []
    for name in attribute_names:
        table = graph.attributes.get(name)
        if table is None:
            raise ArgumentError(f"unknown attribute {name!r}")
        if table.kind != entity_kind:
            raise ArgumentError(
                f"attribute {name!r} is declared for kind {table.kind!r}, "
                f"not {entity_kind!r}"
            )
        tables.append(table)

    rows = [
        eid
        for eid in graph.entities_of_kind(entity_kind)
        if all(int(eid) in t.assignments for t in tables)
    ]
    rows = np.asarray(rows, dtype=np.int64)

    columns: list[tuple[str, str]] = []
    groups: dict[str, np.ndarray] = {}
    for name, table in zip(attribute_names, tables):
        start = len(columns)
        columns.extend((name, value) for value in table.values)
        groups[name] = np.arange(start, len(columns))

    data = np.zeros((rows.size, len(columns)), dtype=np.uint8)
    for name, table in zip(attribute_names, tables):
        offset = int(groups[name][0])
        value_index = {v: i for i, v in enumerate(table.values)}
        for i, eid in enumerate(rows):
            data[i, offset + value_index[table.assignments[int(eid)]]] = 1
    return AttributeMatrix(rows=rows, columns=columns, data=data, groups=groups)


def attribute_labels(graph: KnowledgeGraph, attribute: str, entity_ids=None) -> np.ndarray:
    """Label values of one attribute for the given entities (object dtype)."""
    table = graph.attributes.get(attribute)
    if table is None:
        raise ArgumentError(f"unknown attribute {attribute!r}")
    if entity_ids is None:
        entity_ids = np.asarray(sorted(table.assignments), dtype=np.int64)
    labels = []
    for eid in np.asarray(entity_ids, dtype=np.int64):
        value = table.assignments.get(int(eid))
        if value is None:
            raise ArgumentError(f"entity {eid} lacks attribute {attribute!r}")
        labels.append(value)
    return np.asarray(labels, dtype=object)


def group_mean_embeddings(model, attribute_matrix: AttributeMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Mean embedding per non-empty attribute-value combination.

    Returns ``(U, A)``: one U row per combination (arithmetic mean of the
    member embeddings) and the matching one-hot concatenation row in A.
    Combinations are ordered lexicographically by their value indices.
    """
    embeddings = np.asarray(getattr(model, "entity", model), dtype=np.float64)
    rows = attribute_matrix.rows
    if rows.size and int(rows.max()) >= embeddings.shape[0]:
        raise ArgumentError("attribute-matrix rows outside the embedding table")

    group_cols = [attribute_matrix.groups[name] for name in attribute_matrix.groups]
    patterns = np.stack(
        [np.argmax(attribute_matrix.data[:, cols], axis=1) for cols in group_cols],
        axis=1,
    )
    order = np.lexsort(tuple(patterns[:, i] for i in range(patterns.shape[1] - 1, -1, -1)))
    sorted_patterns = patterns[order]
    unique_patterns, starts = np.unique(sorted_patterns, axis=0, return_index=True)
    starts = np.sort(starts)
    bounds = np.append(starts, sorted_patterns.shape[0])

    n_groups = starts.size
    mean_matrix = np.empty((n_groups, embeddings.shape[1]))
    indicator = np.zeros((n_groups, attribute_matrix.data.shape[1]), dtype=np.uint8)
    for g in range(n_groups):
        member_rows = order[bounds[g] : bounds[g + 1]]
        member_ids = rows[member_rows]
        mean_matrix[g] = embeddings[member_ids].mean(axis=0)
        pattern = sorted_patterns[bounds[g]]
        for cols, value_idx in zip(group_cols, pattern):
            indicator[g, cols[value_idx]] = 1
    return mean_matrix, indicator
