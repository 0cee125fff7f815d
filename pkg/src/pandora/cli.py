"""Command-line entry point: convert, build-memory, ask, eval.

Exit codes are a stable contract: 0 success, 1 the engine ran but failed to
produce a valid answer, 2 usage/config/data errors. Configuration precedence
is flags over environment variables over defaults; all randomness flows from
the single --seed flag.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .agent import EngineConfig, answer_question
from .boxes import render_schema, serialize_boxset
from .harness import DatasetError, load_examples, run_benchmark
from .llm import (
    BackendUnavailable,
    FallbackEmbedder,
    RemoteEmbedder,
    RemoteLLM,
    ScriptedLLM,
)
from .memory import MemoryStore, adapt_tasks, init_memory, sample_size
from .sandbox import SandboxClient
from .sources import ConversionError, KnowledgeSource

logger = logging.getLogger(__name__)


def _add_source_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--table", help="table file (CSV or table JSON)")
    parser.add_argument("--db", help="database JSON file")
    parser.add_argument("--kg", help="triple store file (TSV)")
    parser.add_argument("--topic", action="append", default=[], help="KG topic entity (repeatable)")
    parser.add_argument("--relations", help="comma-separated candidate relations for KG sources")
    parser.add_argument("--pre-ranked", action="store_true", help="candidate relations are pre-ranked")
    parser.add_argument("--question", help="natural-language question (also prunes KG relations)")


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--memory", help="memory store JSONL path")
    parser.add_argument("--llm", default="remote", help="remote | scripted:FILE")
    parser.add_argument("--embedder", default="fallback", help="remote | fallback")
    parser.add_argument("--sandbox-cmd", help="worker command (overrides PANDORA_SANDBOX_CMD)")
    parser.add_argument("--k", type=int, default=10, help="demonstrations per prompt")
    parser.add_argument("--max-rounds", type=int, default=3, help="total generations per question")
    parser.add_argument("--hops", type=int, default=3, help="KG subgraph hop limit")
    parser.add_argument("--keep-k", type=int, default=10, help="KG relations kept after pruning")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--parallel", type=int, default=1)
    parser.add_argument("--trace", help="write the reasoning trace(s) to this path")
    parser.add_argument("--time-limit-ms", type=int, default=10000)
    parser.add_argument("--max-tokens", type=int, default=2048)
    parser.add_argument("--no-eg", action="store_true", help="disable execution guidance")
    parser.add_argument("--same-task", action="store_true", help="retrieve same-task demos only")
    parser.add_argument("--random-retrieval", action="store_true", help="retrieve random demos")
    parser.add_argument("--zero-shot", action="store_true", help="no demonstrations at all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pandora", description=__doc__)
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_convert = sub.add_parser("convert", help="convert a source to its box representation")
    _add_source_flags(p_convert)
    p_convert.add_argument("--hops", type=int, default=3)
    p_convert.add_argument("--keep-k", type=int, default=10)
    p_convert.add_argument("--schema-only", action="store_true", help="print the schema text")

    p_build = sub.add_parser("build-memory", help="annotate training examples into a memory store")
    _add_engine_flags(p_build)
    p_build.add_argument("--train", required=True, help="training examples JSONL")
    p_build.add_argument("--fraction", type=float, default=0.05, help="sample fraction per task")
    p_build.add_argument("--budget", type=int, default=3, help="annotation attempts per example")
    p_build.add_argument("--task-cap", type=int, default=600, help="verified entries kept per task")

    p_ask = sub.add_parser("ask", help="answer one question")
    _add_source_flags(p_ask)
    _add_engine_flags(p_ask)
    p_ask.add_argument("--tag", default="ask", help="script key for the scripted backend")

    p_eval = sub.add_parser("eval", help="run a dataset and score it")
    _add_engine_flags(p_eval)
    p_eval.add_argument("--dataset", required=True, help="dataset JSONL")
    p_eval.add_argument("--report", default="report.json", help="report JSON output path")

    return parser


def _make_llm(choice: str):
    if choice == "remote":
        return RemoteLLM.from_env()
    if choice.startswith("scripted:"):
        return ScriptedLLM.from_file(choice.split(":", 1)[1])
    raise ValueError(f"unknown LLM backend {choice!r} (use remote or scripted:FILE)")


def _make_embedder(choice: str):
    if choice == "fallback":
        return FallbackEmbedder()
    if choice == "remote":
        return RemoteEmbedder.from_env()
    raise ValueError(f"unknown embedder {choice!r} (use remote or fallback)")


def _make_config(args: argparse.Namespace) -> EngineConfig:
    cfg = EngineConfig(
        k_demos=args.k,
        max_rounds=args.max_rounds,
        disable_execution_guidance=args.no_eg,
        same_task_only=args.same_task,
        random_retrieval=args.random_retrieval,
        zero_shot=args.zero_shot,
        seed=args.seed,
        hops=args.hops,
        relation_keep_k=args.keep_k,
        time_limit_ms=args.time_limit_ms,
        max_tokens=args.max_tokens,
    )
    cfg.validate()
    return cfg


def _make_source(args: argparse.Namespace) -> KnowledgeSource:
    chosen = [(kind, path) for kind, path in (("table", args.table), ("db", args.db), ("kg", args.kg)) if path]
    if len(chosen) != 1:
        raise ValueError("exactly one of --table, --db, --kg is required")
    kind, path = chosen[0]
    relations = [r.strip() for r in args.relations.split(",") if r.strip()] if args.relations else []
    return KnowledgeSource(
        kind=kind,
        path=path,
        topic_entities=args.topic,
        candidate_relations=relations,
        pre_ranked=args.pre_ranked,
    )


def cmd_convert(args: argparse.Namespace) -> int:
    source = _make_source(args)
    boxset = source.to_boxset(
        args.question or "",
        FallbackEmbedder(),
        hop_limit=args.hops,
        relation_keep_k=args.keep_k,
    )
    if args.schema_only:
        print(render_schema(boxset))
    else:
        print(serialize_boxset(boxset).decode("utf-8"))
    return 0


def cmd_build_memory(args: argparse.Namespace) -> int:
    if not args.memory:
        raise ValueError("--memory is required as the output path")
    examples = load_examples(args.train)
    by_task = {"db": [], "table": [], "kg": []}
    for example in examples:
        by_task[example.task].append(example)
    llm = _make_llm(args.llm)
    embedder = _make_embedder(args.embedder)
    kwargs = dict(
        budget=args.budget,
        fraction=args.fraction,
        seed=args.seed,
        k_demos=args.k,
        task_cap=args.task_cap,
        hop_limit=args.hops,
        relation_keep_k=args.keep_k,
        time_limit_ms=args.time_limit_ms,
        max_tokens=args.max_tokens,
    )
    store = None
    with SandboxClient(cmd=args.sandbox_cmd, pool_size=args.parallel) as sandbox:
        try:
            store = init_memory(by_task["db"], llm=llm, embedder=embedder, sandbox=sandbox, **kwargs)
            if store.entries and (by_task["table"] or by_task["kg"]):
                adapt_tasks(
                    store,
                    by_task["table"],
                    by_task["kg"],
                    llm=llm,
                    embedder=embedder,
                    sandbox=sandbox,
                    **kwargs,
                )
            elif not store.entries:
                logger.warning("initial store is empty; skipping multi-task adaptation")
        finally:
            if store is not None:
                store.save(args.memory)

    sampled = sum(sample_size(len(by_task[t]), args.fraction) for t in ("db", "table", "kg"))
    counts = {t: sum(1 for e in store.entries if e.task == t) for t in ("db", "table", "kg")}
    rate = len(store.entries) / sampled if sampled else 0.0
    print(f"memory written to {args.memory}")
    print(f"entries per task: {json.dumps(counts)}")
    print(f"verification rate: {len(store.entries)}/{sampled} = {rate:.2f}")
    return 0


def cmd_ask(args: argparse.Namespace) -> int:
    if not args.question:
        raise ValueError("--question is required")
    source = _make_source(args)
    cfg = _make_config(args)
    llm = _make_llm(args.llm)
    embedder = _make_embedder(args.embedder)
    memory = None
    if args.memory:
        memory = MemoryStore.load(args.memory, embedder)
    elif not args.zero_shot:
        raise ValueError("--memory is required unless --zero-shot is set")
    with SandboxClient(cmd=args.sandbox_cmd, pool_size=1) as sandbox:
        trace = answer_question(
            args.question,
            source,
            cfg,
            llm=llm,
            embedder=embedder,
            sandbox=sandbox,
            memory=memory,
            tag=args.tag,
        )
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fp:
            json.dump(trace.to_obj(), fp, ensure_ascii=False, indent=2)
            fp.write("\n")
    if trace.succeeded:
        print(json.dumps(trace.answer, ensure_ascii=False))
        return 0
    print(f"no valid answer: {trace.failure} {trace.failure_detail}".strip(), file=sys.stderr)
    return 1


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _make_config(args)
    llm = _make_llm(args.llm)
    embedder = _make_embedder(args.embedder)
    memory = MemoryStore.load(args.memory, embedder) if args.memory else None
    with SandboxClient(cmd=args.sandbox_cmd, pool_size=max(1, args.parallel)) as sandbox:
        report = run_benchmark(
            args.dataset,
            cfg,
            llm=llm,
            embedder=embedder,
            sandbox=sandbox,
            memory=memory,
            parallel=args.parallel,
            report_path=args.report,
            traces_path=args.trace,
        )
    print(f"examples: {report.meta['examples']}  wall time: {report.meta['wall_time_s']:.2f}s")
    for metric, value in report.aggregates.items():
        print(f"{metric:>6}: {value:.4f}")
    if report.failure_counts:
        print(f"failures: {json.dumps(report.failure_counts)}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.verbose:
        resolved = {k: v for k, v in vars(args).items() if k != "command"}
        print(f"config: {json.dumps(resolved, default=str, sort_keys=True)}", file=sys.stderr)
    handlers = {
        "convert": cmd_convert,
        "build-memory": cmd_build_memory,
        "ask": cmd_ask,
        "eval": cmd_eval,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, DatasetError, ConversionError, BackendUnavailable) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
