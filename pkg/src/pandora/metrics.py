"""Answer normalization and scoring.

All metrics compare normalized answers: cells become canonical strings, rows
become ``|``-joined tuples, and an answer is the multiset of its row tuples.
Set-match (execution/denotation accuracy) uses multiset equality; F1 works
on deduplicated sets; hit@1 checks the first predicted row alone.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

from .boxes import Value

_WS_RE = re.compile(r"\s+")


def normalize_cell(value: Value) -> str:
    """Canonical string for one cell.

    Text is lowercased with whitespace collapsed; integral floats render as
    integers and other floats with 12 significant digits; missing values
    become ``none``.
    """
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value.is_integer():
            return str(int(value))
        return f"{value:.12g}"
    return _WS_RE.sub(" ", value.strip().lower())


def normalize_row(row: list[Value]) -> str:
    return "|".join(normalize_cell(cell) for cell in row)


@dataclass
class NormalizedAnswer:
    items: Counter
    raw_rows: list[list[Value]] = field(default_factory=list)

    @property
    def distinct(self) -> set[str]:
        return set(self.items)


def normalize(rows: list[list[Value]]) -> NormalizedAnswer:
    """Normalize rows to a multiset of canonical row strings."""
    return NormalizedAnswer(items=Counter(normalize_row(r) for r in rows), raw_rows=rows)


def _as_normalized(answer) -> NormalizedAnswer:
    return answer if isinstance(answer, NormalizedAnswer) else normalize(answer)


def metric_set_match(pred, gold) -> int:
    """1 iff the normalized multisets are equal. Serves both EX and DA."""
    pred, gold = _as_normalized(pred), _as_normalized(gold)
    if not gold.items:
        raise ValueError("gold answer must be non-empty")
    return int(pred.items == gold.items)


def metric_f1(pred, gold) -> float:
    """Set-overlap F1 on deduplicated answers."""
    pred, gold = _as_normalized(pred), _as_normalized(gold)
    if not gold.items:
        raise ValueError("gold answer must be non-empty")
    pred_set, gold_set = pred.distinct, gold.distinct
    if not pred_set:
        return 0.0
    overlap = len(pred_set & gold_set)
    precision = overlap / len(pred_set)
    recall = overlap / len(gold_set)
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def metric_hit1(pred_rows: list[list[Value]], gold) -> int:
    """1 iff the first predicted row is among the gold rows."""
    gold = _as_normalized(gold)
    if not gold.items:
        raise ValueError("gold answer must be non-empty")
    if not pred_rows:
        return 0
    return int(normalize_row(pred_rows[0]) in gold.distinct)


# Failure classes an engine run can be assigned, in reporting order.
FAILURE_NONE = "none"
FAILURE_EXECUTION = "execution_failure"
FAILURE_EMPTY = "empty_result"
FAILURE_WRONG = "wrong_answer"
FAILURE_CLASSES = (FAILURE_NONE, FAILURE_EXECUTION, FAILURE_EMPTY, FAILURE_WRONG)

# Primary metric per task; F1 is reported everywhere in addition.
TASK_METRIC = {"db": "ex", "table": "da", "kg": "hit1"}


@dataclass
class MetricReport:
    examples: list[dict]
    aggregates: dict[str, float]
    failure_counts: dict[str, int]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "aggregates": self.aggregates,
            "failure_counts": self.failure_counts,
            "meta": self.meta,
            "examples": self.examples,
        }


def build_report(example_records: list[dict]) -> MetricReport:
    """Reduce per-example verdicts into aggregate means and failure counts."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    failures = {cls: 0 for cls in FAILURE_CLASSES}
    for record in example_records:
        for metric, verdict in record["verdicts"].items():
            sums[metric] = sums.get(metric, 0.0) + verdict
            counts[metric] = counts.get(metric, 0) + 1
        failures[record["failure"]] += 1
    aggregates = {metric: sums[metric] / counts[metric] for metric in sorted(sums)}
    return MetricReport(
        examples=example_records,
        aggregates=aggregates,
        failure_counts={k: v for k, v in failures.items() if v},
    )
