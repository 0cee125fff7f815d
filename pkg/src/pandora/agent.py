"""The reasoning loop: prompt, generate, execute, repair.

One question flows through: source conversion, demonstration retrieval,
a reasoning prompt, program extraction, sandboxed execution, and - while the
outcome stays invalid - repair prompts built from execution feedback. The
generation budget covers the whole loop: with the default accounting the
initial generation is round one and repairs use the remaining rounds.
Every attempt is recorded in a trace; the loop never raises.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .boxes import BoxSet, Value, render_schema
from .llm import BackendUnavailable, GenerationRequest, ScriptExhausted
from .memory import MemoryStore, RetrievalPolicy
from .prompts import (
    PROMPT_VERSION,
    EmptyOutput,
    build_guidance_prompt,
    build_reasoning_prompt,
    parse_output,
)
from .sandbox import (
    VALID,
    ExecOutcome,
    ExecRequest,
    SandboxClient,
    classify_validity,
)
from .sources import ConversionError, KnowledgeSource

FAILURE_CONVERSION = "conversion_error"
FAILURE_BACKEND = "backend_error"


@dataclass
class EngineConfig:
    """Knobs for the reasoning loop and its ablations."""

    k_demos: int = 10
    max_rounds: int = 3  # total generation budget per question
    count_initial_in_rounds: bool = True  # False: budget = 1 initial + max_rounds repairs
    disable_execution_guidance: bool = False
    same_task_only: bool = False
    random_retrieval: bool = False
    zero_shot: bool = False
    seed: int = 0
    hops: int = 3
    relation_keep_k: int = 10
    max_rows_per_entity: int = 64
    schema_sample_values: int = 0
    time_limit_ms: int = 10000
    max_result_cells: int = 10000
    max_tokens: int = 2048
    prompt_version: str = PROMPT_VERSION

    def validate(self) -> None:
        if self.k_demos < 0:
            raise ValueError("k_demos must be >= 0")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")

    def generation_budget(self) -> int:
        if self.disable_execution_guidance:
            return 1
        if self.count_initial_in_rounds:
            return self.max_rounds
        return 1 + self.max_rounds

    def retrieval_policy(self, task: str) -> RetrievalPolicy:
        if self.zero_shot:
            return RetrievalPolicy(kind="none")
        if self.random_retrieval:
            return RetrievalPolicy(kind="random", seed=self.seed)
        if self.same_task_only:
            return RetrievalPolicy(kind="same_task", task=task)
        return RetrievalPolicy(kind="cross_task")


@dataclass
class Attempt:
    prompt_kind: str  # reasoning | guidance
    prompt: str
    raw: str
    reasoning: str
    program: str
    outcome: ExecOutcome
    validity: str

    def to_obj(self) -> dict:
        return {
            "prompt_kind": self.prompt_kind,
            "prompt": self.prompt,
            "raw": self.raw,
            "reasoning": self.reasoning,
            "program": self.program,
            "status": self.outcome.status,
            "diagnostic": self.outcome.diagnostic,
            "validity": self.validity,
        }


@dataclass
class ReasoningTrace:
    question: str
    task: str
    schema_text: str = ""
    demo_ids: list[str] = field(default_factory=list)
    attempts: list[Attempt] = field(default_factory=list)
    answer: list[list[Value]] | None = None
    failure: str | None = None
    failure_detail: str = ""
    llm_calls: int = 0
    wall_time_s: float = 0.0

    @property
    def succeeded(self) -> bool:
        return self.answer is not None

    def to_obj(self) -> dict:
        return {
            "question": self.question,
            "task": self.task,
            "schema_text": self.schema_text,
            "demo_ids": self.demo_ids,
            "attempts": [a.to_obj() for a in self.attempts],
            "answer": self.answer,
            "failure": self.failure,
            "failure_detail": self.failure_detail,
            "llm_calls": self.llm_calls,
            "wall_time_s": self.wall_time_s,
        }


def answer_question(
    question: str,
    source: KnowledgeSource,
    cfg: EngineConfig,
    *,
    llm,
    embedder,
    sandbox: SandboxClient,
    memory: MemoryStore | None = None,
    tag: str = "*",
) -> ReasoningTrace:
    """Run the full pipeline for one question and return its trace."""
    cfg.validate()
    started = time.perf_counter()
    trace = ReasoningTrace(question=question, task=source.task)
    try:
        boxset = source.to_boxset(
            question,
            embedder,
            hop_limit=cfg.hops,
            relation_keep_k=cfg.relation_keep_k,
            max_rows_per_entity=cfg.max_rows_per_entity,
        )
    except ConversionError as e:
        trace.failure = FAILURE_CONVERSION
        trace.failure_detail = str(e)
        trace.wall_time_s = time.perf_counter() - started
        return trace

    trace.schema_text = render_schema(boxset, sample_values=cfg.schema_sample_values)
    demos = []
    if memory is not None and not cfg.zero_shot:
        demos = memory.retrieve(question, cfg.k_demos, cfg.retrieval_policy(source.task))
    trace.demo_ids = [d.id for d in demos]

    prompt = build_reasoning_prompt(question, trace.schema_text, demos)
    prompt_kind = "reasoning"
    budget = cfg.generation_budget()
    for round_index in range(budget):
        try:
            raw = llm.complete(
                GenerationRequest(prompt=prompt, max_tokens=cfg.max_tokens, tag=tag)
            )
        except (BackendUnavailable, ScriptExhausted) as e:
            trace.failure = FAILURE_BACKEND
            trace.failure_detail = str(e)
            break
        trace.llm_calls += 1
        try:
            reasoning, program = parse_output(raw)
        except EmptyOutput:
            reasoning, program = "", ""
        outcome = _execute(sandbox, boxset, program, cfg)
        validity = classify_validity(outcome)
        trace.attempts.append(
            Attempt(
                prompt_kind=prompt_kind,
                prompt=prompt,
                raw=raw,
                reasoning=reasoning,
                program=program,
                outcome=outcome,
                validity=validity,
            )
        )
        if validity == VALID:
            trace.answer = outcome.answer
            trace.failure = None
            break
        trace.failure = validity
        trace.failure_detail = outcome.diagnostic
        if cfg.disable_execution_guidance or round_index + 1 >= budget:
            break
        prompt = build_guidance_prompt(question, trace.schema_text, reasoning, program, outcome)
        prompt_kind = "guidance"

    trace.wall_time_s = time.perf_counter() - started
    return trace


def _execute(sandbox: SandboxClient, boxset: BoxSet, program: str, cfg: EngineConfig) -> ExecOutcome:
    if not program:
        return ExecOutcome(status="runtime_error", diagnostic="model output contained no program")
    return sandbox.execute(
        ExecRequest(
            boxset=boxset,
            program=program,
            time_limit_ms=cfg.time_limit_ms,
            max_result_cells=cfg.max_result_cells,
        )
    )
