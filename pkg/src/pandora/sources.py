"""Tagged knowledge sources and their conversion to box sets.

A source names a table file, a database file, or a triple store (plus topic
entities and candidate relations). Conversion dispatches to the tabular or
graph converter; for graphs the question prunes the relation set first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .boxes import BoxSet
from .kg import (
    KgQueryContext,
    build_typing,
    extract_subgraph,
    filter_relations,
    kg_to_boxset,
    load_triples,
)
from .tabular import db_to_boxset, load_database, load_table, table_to_box


class ConversionError(ValueError):
    """A knowledge source could not be converted to boxes."""


@dataclass
class KnowledgeSource:
    kind: str  # table | db | kg
    path: str
    topic_entities: list[str] = field(default_factory=list)
    candidate_relations: list[str] = field(default_factory=list)
    pre_ranked: bool = False

    @classmethod
    def from_obj(cls, obj: dict, base_dir: Path | None = None) -> "KnowledgeSource":
        kind = obj.get("type")
        if kind not in ("table", "db", "kg"):
            raise ConversionError(f"unknown source type {kind!r}")
        path = Path(obj["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return cls(
            kind=kind,
            path=str(path),
            topic_entities=list(obj.get("topic_entities", [])),
            candidate_relations=list(obj.get("candidate_relations", [])),
            pre_ranked=bool(obj.get("pre_ranked", False)),
        )

    @property
    def task(self) -> str:
        return self.kind

    def to_boxset(
        self,
        question: str = "",
        embedder=None,
        hop_limit: int = 3,
        relation_keep_k: int = 10,
        max_rows_per_entity: int = 64,
    ) -> BoxSet:
        try:
            if self.kind == "table":
                return BoxSet(boxes=[table_to_box(load_table(self.path))])
            if self.kind == "db":
                return db_to_boxset(load_database(self.path))
            if self.kind == "kg":
                return self._kg_boxset(
                    question, embedder, hop_limit, relation_keep_k, max_rows_per_entity
                )
        except ConversionError:
            raise
        except Exception as e:
            raise ConversionError(f"{self.kind} source {self.path}: {e}") from e
        raise ConversionError(f"unknown source type {self.kind!r}")

    def _kg_boxset(
        self,
        question: str,
        embedder,
        hop_limit: int,
        relation_keep_k: int,
        max_rows_per_entity: int,
    ) -> BoxSet:
        triples = load_triples(self.path)
        typing = build_typing(triples)
        candidates = self.candidate_relations
        if not candidates:
            candidates = sorted(
                {t.predicate for t in triples if t.predicate != "IsA"}
            )
        if not candidates:
            raise ConversionError(f"kg source {self.path} has no non-typing relations")
        if self.pre_ranked or embedder is None or not question:
            kept = candidates[:relation_keep_k]
        else:
            kept = filter_relations(question, candidates, embedder, relation_keep_k)
        ctx = KgQueryContext(
            topic_entities=self.topic_entities,
            candidate_relations=candidates,
            hop_limit=hop_limit,
            relation_keep_k=relation_keep_k,
            pre_ranked=self.pre_ranked,
        )
        records = extract_subgraph(triples, ctx, kept, typing)
        return kg_to_boxset(records, typing, max_rows_per_entity=max_rows_per_entity)
