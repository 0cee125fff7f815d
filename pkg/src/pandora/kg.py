"""Knowledge-graph conversion: subgraph extraction and type-grouped boxes.

A question anchors on topic entities; a depth-first search collects every
simple path of at most `hop_limit` relation steps (both edge directions),
restricted to a question-relevant relation subset. The traversed facts are
grouped into one box per entity type, with foreign keys inferred wherever
two columns in different boxes share a value.

The triple index is immutable once built; traversal keeps its state on the
path, so many questions can search one index concurrently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

from .boxes import Box, BoxSet, ForeignKey, parse_cell, sanitize_field
from .llm import cosine
from .tabular import ParseError

ISA = "IsA"
CATCH_ALL_TYPE = "entity"


class UnknownTopicEntity(ValueError):
    """A topic entity does not occur in the triple store."""


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    obj: str

    def validate(self) -> None:
        if not self.subject or not self.predicate:
            raise ParseError(f"triple with empty subject or predicate: {self!r}")


@dataclass
class KgQueryContext:
    """Per-question traversal parameters."""

    topic_entities: list[str]
    candidate_relations: list[str]
    hop_limit: int = 3
    relation_keep_k: int = 10
    pre_ranked: bool = False  # candidate_relations already ranked: truncate, don't re-rank

    def validate(self) -> None:
        if not self.topic_entities:
            raise ValueError("topic_entities must be non-empty")
        if self.hop_limit < 1:
            raise ValueError("hop_limit must be >= 1")
        if self.relation_keep_k < 1:
            raise ValueError("relation_keep_k must be >= 1")


@dataclass(frozen=True)
class PathRecord:
    """One traversed path: pairs of (type, type, entity), (type, relation, value) steps."""

    steps: tuple[tuple[str, str, str], ...]


def load_triples(path: str | Path) -> list[Triple]:
    """Read tab-separated subject/predicate/object lines; ``#`` comments skipped."""
    triples = []
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"{path}: line {lineno}: expected 3 tab-separated fields")
            t = Triple(*parts)
            t.validate()
            triples.append(t)
    return triples


def build_typing(triples: list[Triple]) -> dict[str, list[str]]:
    """Entity id -> sorted list of declared types (from reserved IsA triples)."""
    typing: dict[str, set[str]] = {}
    for t in triples:
        if t.predicate == ISA:
            typing.setdefault(t.subject, set()).add(t.obj)
    return {e: sorted(ts) for e, ts in typing.items()}


def filter_relations(
    question: str, relations: list[str], embedder, keep_k: int
) -> list[str]:
    """Keep the `keep_k` relations most similar to the question.

    Output is ordered by descending cosine similarity, ties broken by
    ascending relation name. Duplicates in the input collapse.
    """
    if not relations:
        raise ValueError("relations must be non-empty")
    if keep_k < 1:
        raise ValueError("keep_k must be >= 1")
    q = embedder.embed(question)
    ranked = sorted(
        set(relations), key=lambda r: (-cosine(q, embedder.embed(r)), r)
    )
    return ranked[:keep_k]


class TripleIndex:
    """Adjacency over a triple list, split by direction and relation."""

    def __init__(self, triples: list[Triple]):
        self.out: dict[str, dict[str, list[str]]] = {}
        self.inc: dict[str, dict[str, list[str]]] = {}
        self.mentioned: set[str] = set()
        for t in triples:
            self.mentioned.add(t.subject)
            self.mentioned.add(t.obj)
            if t.predicate == ISA:
                continue
            self.out.setdefault(t.subject, {}).setdefault(t.predicate, []).append(t.obj)
            self.inc.setdefault(t.obj, {}).setdefault(t.predicate, []).append(t.subject)

    def expansions(self, entity: str, kept: set[str]) -> list[tuple[str, str, bool]]:
        """Deterministic (relation, neighbor, incoming?) candidates from `entity`."""
        moves = []
        for rel, objs in self.out.get(entity, {}).items():
            if rel in kept:
                moves.extend((rel, o, False) for o in objs)
        for rel, subs in self.inc.get(entity, {}).items():
            if rel in kept:
                moves.extend((rel, s, True) for s in subs)
        moves.sort()
        return moves


def extract_subgraph(
    triples: list[Triple],
    ctx: KgQueryContext,
    kept_relations: list[str],
    typing: dict[str, list[str]] | None = None,
) -> list[PathRecord]:
    """Enumerate every simple path of 1..hop_limit kept-relation steps.

    Paths are rooted at the topic entities and may follow edges in either
    direction; an entity is never revisited within one path. Each hop appends
    a (type, type, entity) anchor for the hop's true subject plus a
    (type, relation, value) step for the traversed fact, and the path is
    recorded at every depth, not only at full length. Duplicate records
    (reachable along several roots) collapse.
    """
    ctx.validate()
    if typing is None:
        typing = build_typing(triples)
    index = TripleIndex(triples)
    for topic in ctx.topic_entities:
        if topic not in index.mentioned:
            raise UnknownTopicEntity(topic)
    kept = {r for r in kept_relations if r != ISA}

    def type_of(entity: str) -> str:
        types = typing.get(entity)
        return types[0] if types else CATCH_ALL_TYPE

    records: list[PathRecord] = []
    seen: set[tuple] = set()
    steps: list[tuple[str, str, str]] = []

    def dfs(entity: str, visited: set[str], depth: int) -> None:
        if depth == ctx.hop_limit:
            return
        for rel, neighbor, incoming in index.expansions(entity, kept):
            if neighbor in visited:
                continue
            subject = neighbor if incoming else entity
            obj = entity if incoming else neighbor
            anchor_type = type_of(subject)
            steps.append((anchor_type, anchor_type, subject))
            steps.append((anchor_type, rel, obj))
            key = tuple(steps)
            if key not in seen:
                seen.add(key)
                records.append(PathRecord(steps=key))
            visited.add(neighbor)
            dfs(neighbor, visited, depth + 1)
            visited.remove(neighbor)
            steps.pop()
            steps.pop()

    for topic in ctx.topic_entities:
        dfs(topic, {topic}, 0)
    return records


def kg_to_boxset(
    records: list[PathRecord],
    typing: dict[str, list[str]],
    max_rows_per_entity: int = 64,
) -> BoxSet:
    """Group traversed facts into one box per entity type.

    A box's fields are the type itself plus every relation whose subject has
    that type. Each subject contributes one row per combination of its
    relation values (relations without a value padded with missing); when the
    combination count for one subject exceeds `max_rows_per_entity`, that
    subject falls back to one row per fact, guaranteeing every fact is still
    represented. Foreign keys link any two columns of different boxes that
    share at least one non-missing value.
    """
    facts: list[tuple[str, str, str]] = []
    fact_seen: set[tuple[str, str, str]] = set()
    anchors: set[str] = set()
    mentioned: set[str] = set()
    for record in records:
        for i in range(0, len(record.steps), 2):
            _, _, subject = record.steps[i]
            _, rel, obj = record.steps[i + 1]
            anchors.add(subject)
            mentioned.add(subject)
            mentioned.add(obj)
            fact = (subject, rel, obj)
            if fact not in fact_seen:
                fact_seen.add(fact)
                facts.append(fact)

    # Typed values materialize as rows of their type boxes; untyped values
    # get a catch-all row only when they anchor facts (pure untyped objects
    # are indistinguishable from literals and stay values).
    members: dict[str, set[str]] = {}
    for entity in mentioned:
        types = typing.get(entity)
        if types:
            for entity_type in types:
                members.setdefault(entity_type, set()).add(entity)
        elif entity in anchors:
            members.setdefault(CATCH_ALL_TYPE, set()).add(entity)

    values: dict[str, dict[str, list[str]]] = {}  # subject -> relation -> objects
    for subject, rel, obj in facts:
        values.setdefault(subject, {}).setdefault(rel, []).append(obj)

    boxes: list[Box] = []
    box_names: set[str] = set()
    column_values: dict[tuple[str, str], set] = {}  # (box, field) -> non-missing values
    for type_key in sorted(members):
        subjects = sorted(members[type_key])
        relations = sorted({rel for s in subjects for rel in values.get(s, {})})
        box_name = sanitize_field(type_key, box_names)
        taken: set[str] = set()
        fields = [sanitize_field(type_key, taken)]
        fields += [sanitize_field(rel, taken) for rel in relations]
        rows: list[tuple] = []
        row_seen: set[tuple] = set()
        for subject in subjects:
            for row in _subject_rows(subject, relations, values, max_rows_per_entity):
                if row not in row_seen:
                    row_seen.add(row)
                    rows.append(row)
        columns: dict[str, list] = {f.canonical: [] for f in fields}
        for row in rows:
            for f, cell in zip(fields, row):
                value = parse_cell(cell) if cell is not None else None
                columns[f.canonical].append(value)
        box = Box.from_columns(box_name, fields, columns)
        boxes.append(box)
        for f in fields:
            column_values[(box_name.canonical, f.canonical)] = {
                v for v in columns[f.canonical] if v is not None
            }

    fks = []
    keys = sorted(column_values)
    for i, a in enumerate(keys):
        for b in keys[i + 1 :]:
            if a[0] == b[0]:
                continue
            if column_values[a] & column_values[b]:
                fks.append(ForeignKey(src=a, dst=b))
    box_set = BoxSet(boxes=boxes, foreign_keys=fks)
    box_set.validate()
    return box_set


def _subject_rows(
    subject: str,
    relations: list[str],
    values: dict[str, dict[str, list[str]]],
    max_rows: int,
) -> list[tuple]:
    """Rows for one subject: value combinations, or one-per-fact on overflow."""
    per_relation = [sorted(set(values.get(subject, {}).get(rel, []))) for rel in relations]
    combos = 1
    for vals in per_relation:
        combos *= max(len(vals), 1)
    if combos > max_rows:
        rows = []
        for idx, vals in enumerate(per_relation):
            for v in vals:
                cells: list[str | None] = [None] * len(relations)
                cells[idx] = v
                rows.append((subject, *cells))
        return rows
    pools = [vals if vals else [None] for vals in per_relation]
    return [(subject, *combo) for combo in itertools.product(*pools)]
