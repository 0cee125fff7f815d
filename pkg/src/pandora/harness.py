"""Benchmark harness: dataset loading, scoring, and report assembly.

Datasets are JSONL files of examples whose source paths resolve relative to
the dataset file. Each example is answered by the engine, scored with its
task's primary metric plus F1, and classified into a machine-detectable
failure class. Examples may run in parallel; the report is reduced in
dataset order, so parallelism never changes the output.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .agent import EngineConfig, ReasoningTrace, answer_question
from .memory import MemoryStore, TrainingExample
from .metrics import (
    FAILURE_EMPTY,
    FAILURE_EXECUTION,
    FAILURE_NONE,
    FAILURE_WRONG,
    TASK_METRIC,
    MetricReport,
    build_report,
    metric_f1,
    metric_hit1,
    metric_set_match,
    normalize,
)
from .sandbox import INVALID_EMPTY
from .sources import KnowledgeSource


class DatasetError(ValueError):
    """A dataset file is malformed; message names the offending line."""


def load_examples(path: str | Path) -> list[TrainingExample]:
    """Load dataset or training JSONL; source paths resolve next to the file."""
    path = Path(path)
    base_dir = path.parent
    examples = []
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                example = TrainingExample(
                    id=str(obj["id"]),
                    task=obj["task"],
                    question=obj["question"],
                    source=KnowledgeSource.from_obj(obj["source"], base_dir=base_dir),
                    gold_answers=[list(row) for row in obj["gold_answers"]],
                    gold_logical_form=obj.get("gold_logical_form"),
                )
                example.validate()
            except DatasetError:
                raise
            except Exception as e:
                raise DatasetError(f"{path}: line {lineno}: {e}") from e
            if example.task not in TASK_METRIC:
                raise DatasetError(f"{path}: line {lineno}: unknown task {example.task!r}")
            examples.append(example)
    return examples


def score_example(example: TrainingExample, trace: ReasoningTrace) -> dict:
    """Verdicts for one answered example: primary metric, F1, failure class."""
    gold = normalize(example.gold_answers)
    pred_rows = trace.answer or []
    pred = normalize(pred_rows)
    primary = TASK_METRIC[example.task]
    verdicts = {"f1": metric_f1(pred, gold)}
    if primary == "hit1":
        verdicts["hit1"] = metric_hit1(pred_rows, gold)
    else:
        verdicts[primary] = metric_set_match(pred, gold)
    if trace.succeeded:
        failure = FAILURE_NONE if verdicts[primary] == 1 else FAILURE_WRONG
    elif trace.failure == INVALID_EMPTY:
        failure = FAILURE_EMPTY
    else:
        failure = FAILURE_EXECUTION
    return {
        "id": example.id,
        "task": example.task,
        "verdicts": verdicts,
        "failure": failure,
        "llm_calls": trace.llm_calls,
        "wall_time_s": trace.wall_time_s,
    }


def run_benchmark(
    dataset_path: str | Path,
    cfg: EngineConfig,
    *,
    llm,
    embedder,
    sandbox,
    memory: MemoryStore | None = None,
    parallel: int = 1,
    report_path: str | Path | None = None,
    traces_path: str | Path | None = None,
) -> MetricReport:
    """Answer and score every dataset example; optionally write artifacts."""
    examples = load_examples(dataset_path)

    def run_one(example: TrainingExample) -> ReasoningTrace:
        return answer_question(
            example.question,
            example.source,
            cfg,
            llm=llm,
            embedder=embedder,
            sandbox=sandbox,
            memory=memory,
            tag=example.id,
        )

    started = time.perf_counter()
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            traces = list(pool.map(run_one, examples))
    else:
        traces = [run_one(example) for example in examples]
    elapsed = time.perf_counter() - started

    records = [score_example(example, trace) for example, trace in zip(examples, traces)]
    report = build_report(records)
    report.meta = {
        "examples": len(examples),
        "wall_time_s": elapsed,
        "parallel": parallel,
        # Fixed house normalization; benchmark suites differ on this.
        "normalization": "lowercase, collapsed whitespace, integral floats as ints, 12 sig digits, na=none",
    }

    if report_path is not None:
        Path(report_path).write_text(
            json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    if traces_path is not None:
        with open(traces_path, "w", encoding="utf-8") as fp:
            for example, trace in zip(examples, traces):
                obj = trace.to_obj()
                obj["id"] = example.id
                fp.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return report
