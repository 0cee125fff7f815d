"""Verified demonstration memory: construction, persistence, retrieval.

The store holds (question, schema, reasoning, program) demonstrations that
passed an execution check against gold answers. It is built progressively:
database examples first (their reference queries make annotation reliable),
then table and graph examples annotated with the database entries as
demonstrations. Retrieval ranks entries by question embedding similarity and
by default ignores task boundaries.
"""

from __future__ import annotations

import json
import logging
import math
import random
import threading
from dataclasses import dataclass
from pathlib import Path

from .boxes import Value, render_schema
from .llm import BackendUnavailable, EmbeddingVector, GenerationRequest, ScriptExhausted, cosine
from .metrics import metric_set_match, normalize
from .prompts import EmptyOutput, build_annotation_prompt, parse_output
from .sandbox import ExecRequest
from .sources import KnowledgeSource

logger = logging.getLogger(__name__)


@dataclass
class MemoryEntry:
    id: str
    task: str  # db | table | kg
    question: str
    schema_text: str
    reasoning: str
    program: str
    embedding: EmbeddingVector
    verified: bool = True

    def to_obj(self, embedder_id: str) -> dict:
        return {
            "id": self.id,
            "task": self.task,
            "question": self.question,
            "schema": self.schema_text,
            "reasoning": self.reasoning,
            "program": self.program,
            "embedding": list(self.embedding.components),
            "embedder": embedder_id,
            "verified": self.verified,
        }


@dataclass
class TrainingExample:
    id: str
    task: str
    question: str
    source: KnowledgeSource
    gold_answers: list[list[Value]]
    gold_logical_form: str | None = None

    def validate(self) -> None:
        if not self.gold_answers:
            raise ValueError(f"example {self.id}: gold_answers must be non-empty")
        for row in self.gold_answers:
            for cell in row:
                if cell is not None and not isinstance(cell, (str, int, float, bool)):
                    raise ValueError(f"example {self.id}: gold cell {cell!r} is not a scalar")


@dataclass(frozen=True)
class RetrievalPolicy:
    kind: str  # cross_task | same_task | random | none
    task: str | None = None
    seed: int = 0


CROSS_TASK = RetrievalPolicy(kind="cross_task")


class MemoryStore:
    """Append-only entry list with similarity retrieval.

    Retrieval is read-only and safe for concurrent callers; appends are
    serialized by a lock.
    """

    def __init__(self, embedder, entries: list[MemoryEntry] | None = None):
        self.embedder = embedder
        self.entries: list[MemoryEntry] = entries or []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, entry: MemoryEntry) -> None:
        with self._lock:
            self.entries.append(entry)

    @classmethod
    def load(cls, path: str | Path, embedder) -> "MemoryStore":
        entries = []
        stale = 0
        with open(path, encoding="utf-8") as fp:
            for line in fp:
                if not line.strip():
                    continue
                obj = json.loads(line)
                if obj.get("embedder") == embedder.embedder_id:
                    embedding = EmbeddingVector(tuple(float(x) for x in obj["embedding"]))
                else:
                    # Embedder changed since the store was written: re-embed.
                    embedding = embedder.embed(obj["question"])
                    stale += 1
                entries.append(
                    MemoryEntry(
                        id=obj["id"],
                        task=obj["task"],
                        question=obj["question"],
                        schema_text=obj["schema"],
                        reasoning=obj["reasoning"],
                        program=obj["program"],
                        embedding=embedding,
                        verified=bool(obj["verified"]),
                    )
                )
        if stale:
            logger.warning("re-embedded %d entries written under a different embedder", stale)
        return cls(embedder, entries)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fp:
            for entry in self.entries:
                fp.write(json.dumps(entry.to_obj(self.embedder.embedder_id), ensure_ascii=False))
                fp.write("\n")

    def retrieve(self, question: str, k: int, policy: RetrievalPolicy = CROSS_TASK) -> list[MemoryEntry]:
        """Top-k entries under the given policy, most similar first.

        `cross_task` ranks the whole store; `same_task` restricts to the
        policy's task tag; `random` draws a seeded uniform sample; `none`
        returns nothing. Ties break on ascending entry id.
        """
        if k <= 0 or policy.kind == "none":
            return []
        if policy.kind == "same_task":
            pool = [e for e in self.entries if e.task == policy.task]
        else:
            pool = list(self.entries)
        if policy.kind == "random":
            rng = random.Random(policy.seed)
            return rng.sample(pool, min(k, len(pool)))
        query = self.embedder.embed(question)
        ranked = sorted(pool, key=lambda e: (-cosine(query, e.embedding), e.id))
        return ranked[:k]


def _summarize_rows(rows: list[list[Value]] | None, limit: int = 3) -> str:
    if not rows:
        return "an empty result"
    normalized = normalize(rows)
    shown = sorted(normalized.items)[:limit]
    suffix = ", ..." if len(normalized.items) > limit else ""
    return f"{sum(normalized.items.values())} row(s): {', '.join(shown)}{suffix}"


def annotate(
    example: TrainingExample,
    demos: list[MemoryEntry],
    budget: int,
    *,
    llm,
    embedder,
    sandbox,
    hop_limit: int = 3,
    relation_keep_k: int = 10,
    time_limit_ms: int = 10000,
    max_result_cells: int = 10000,
    max_tokens: int = 2048,
) -> MemoryEntry | None:
    """Generate, execute, and verify a (reasoning, program) annotation.

    The program must reproduce the example's gold answers under normalized
    set equality; mismatches and execution diagnostics are fed back for up
    to `budget` total generations. Returns None when the budget runs out.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    boxset = example.source.to_boxset(
        example.question, embedder, hop_limit=hop_limit, relation_keep_k=relation_keep_k
    )
    schema_text = render_schema(boxset)
    gold = normalize(example.gold_answers)
    feedback: str | None = None
    for _ in range(budget):
        prompt = build_annotation_prompt(
            example.question, schema_text, example.gold_logical_form, demos, feedback
        )
        try:
            raw = llm.complete(GenerationRequest(prompt=prompt, max_tokens=max_tokens, tag=example.id))
        except (BackendUnavailable, ScriptExhausted) as e:
            logger.warning("annotation of %s: generation failed: %s", example.id, e)
            feedback = f"The previous generation failed: {e}"
            continue
        try:
            reasoning, program = parse_output(raw)
        except EmptyOutput:
            feedback = "The previous response was empty."
            continue
        outcome = sandbox.execute(
            ExecRequest(
                boxset=boxset,
                program=program,
                time_limit_ms=time_limit_ms,
                max_result_cells=max_result_cells,
            )
        )
        if outcome.ok and metric_set_match(normalize(outcome.answer), gold):
            return MemoryEntry(
                id=example.id,
                task=example.task,
                question=example.question,
                schema_text=schema_text,
                reasoning=reasoning,
                program=program,
                embedding=embedder.embed(example.question),
            )
        mismatch = (
            f"Execution produced {_summarize_rows(outcome.answer)} "
            f"but gold is {_summarize_rows(example.gold_answers)}"
        )
        feedback = f"{mismatch}. {outcome.diagnostic}".strip()
    return None


def sample_size(n: int, fraction: float) -> int:
    return min(n, math.ceil(fraction * n)) if n else 0


def _sample(examples: list[TrainingExample], fraction: float, rng: random.Random) -> list[TrainingExample]:
    count = sample_size(len(examples), fraction)
    if not count:
        return []
    picked = sorted(rng.sample(range(len(examples)), count))
    return [examples[i] for i in picked]


# Verified entries kept per task before annotation stops; matches the shipped
# memory sizes (a few hundred per task is enough).
DEFAULT_TASK_CAP = 600


def init_memory(
    db_examples: list[TrainingExample],
    *,
    llm,
    embedder,
    sandbox,
    budget: int = 3,
    fraction: float = 0.05,
    seed: int = 0,
    k_demos: int = 10,
    task_cap: int = DEFAULT_TASK_CAP,
    **annotate_kwargs,
) -> MemoryStore:
    """Build the initial store from database examples with reference queries.

    A seeded uniform sample of ceil(fraction * n) examples is annotated in
    corpus order; the very first annotations bootstrap with no demonstrations
    and later ones use the already-verified entries. Failures are skipped;
    annotation stops once `task_cap` entries verified.
    """
    for example in db_examples:
        if example.task != "db" or not example.gold_logical_form:
            raise ValueError(f"example {example.id}: stage one needs db examples with gold queries")
    store = MemoryStore(embedder)
    sample = _sample(db_examples, fraction, random.Random(seed))
    for example in sample:
        if len(store.entries) >= task_cap:
            break
        demos = store.retrieve(example.question, k_demos)
        entry = annotate(
            example, demos, budget, llm=llm, embedder=embedder, sandbox=sandbox, **annotate_kwargs
        )
        if entry is not None:
            store.append(entry)
    if not store.entries:
        logger.warning("memory initialization verified no entries out of %d sampled", len(sample))
    return store


def adapt_tasks(
    store: MemoryStore,
    table_examples: list[TrainingExample],
    kg_examples: list[TrainingExample],
    *,
    llm,
    embedder,
    sandbox,
    budget: int = 3,
    fraction: float = 0.05,
    seed: int = 0,
    k_demos: int = 10,
    task_cap: int = DEFAULT_TASK_CAP,
    **annotate_kwargs,
) -> MemoryStore:
    """Extend the store to the table and graph tasks via retrieved demos."""
    if not store.entries:
        raise ValueError("multi-task adaptation needs a non-empty initial store")
    stages = [("table", table_examples, 1), ("kg", kg_examples, 2)]
    for task, examples, offset in stages:
        for example in examples:
            if example.task != task:
                raise ValueError(f"example {example.id}: expected task {task!r}, got {example.task!r}")
        sample = _sample(examples, fraction, random.Random(seed * 3 + offset))
        for example in sample:
            if sum(1 for e in store.entries if e.task == task) >= task_cap:
                break
            demos = store.retrieve(example.question, k_demos)
            entry = annotate(
                example, demos, budget, llm=llm, embedder=embedder, sandbox=sandbox, **annotate_kwargs
            )
            if entry is not None:
                store.append(entry)
    return store
