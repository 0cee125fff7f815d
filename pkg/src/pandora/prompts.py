"""Prompt templates and model-output parsing.

Prompts are plain deterministic string concatenation: identical inputs yield
byte-identical prompts. Schemas are rendered without values to keep prompts
small; demonstrations carry the schema text recorded when they were
annotated, so memory entries stay self-contained.
"""

from __future__ import annotations

from .sandbox import STATUS_OK, ExecOutcome

PROMPT_VERSION = "v1"

EMPTY_RESULT_FEEDBACK = "The program executed successfully but returned an empty result."

REASONING_INSTRUCTION = """\
You are a careful data analyst. Answer the question using the dataframes \
described by the schema below. Reason step by step about which boxes, fields, \
filters, joins, and aggregations the question needs, then write one Python \
program that computes the answer.
Rules:
- Every box in the schema is available as a pandas dataframe under its own name.
- Write your reasoning as plain text first, then exactly one fenced code block.
- The program must assign the final answer to a variable named `result`.
"""

GUIDANCE_INSTRUCTION = """\
Your previous program for this question was invalid. Use the feedback below to \
repair it. Reconsider your reasoning, then write one corrected fenced code \
block that assigns the answer to a variable named `result`.
"""

ANNOTATION_INSTRUCTION = """\
Annotate the question with step-by-step reasoning and one executable pandas \
program. When a reference query is given, translate its logic onto the \
dataframes in the schema. Write your reasoning as plain text first, then \
exactly one fenced code block assigning the final answer to a variable named \
`result`.
"""


class EmptyOutput(ValueError):
    """The model returned a blank response."""


def demo_block(index: int, question: str, schema_text: str, reasoning: str, program: str) -> str:
    return (
        f"### Demonstration {index}\n"
        f"Question: {question}\n"
        f"Schema:\n{schema_text}\n"
        f"Reasoning: {reasoning}\n"
        f"Program:\n```python\n{program}\n```\n"
    )


def _task_block(question: str, schema_text: str, logical_form: str | None = None) -> str:
    lines = ["### Task", f"Question: {question}"]
    if logical_form:
        lines.append(f"Reference query: {logical_form}")
    lines.append(f"Schema:\n{schema_text}")
    return "\n".join(lines) + "\n"


def build_reasoning_prompt(question: str, schema_text: str, demos: list) -> str:
    """Compose instruction | demonstrations (retrieval order) | target."""
    parts = [REASONING_INSTRUCTION, "\n"]
    for i, demo in enumerate(demos, start=1):
        parts.append(demo_block(i, demo.question, demo.schema_text, demo.reasoning, demo.program))
        parts.append("\n")
    parts.append(_task_block(question, schema_text))
    return "".join(parts)


def build_guidance_prompt(
    question: str, schema_text: str, reasoning: str, program: str, outcome: ExecOutcome
) -> str:
    """Compose the repair prompt from the failed attempt and its feedback."""
    if outcome.status == STATUS_OK and outcome.answer:
        raise ValueError("guidance prompt requires an invalid outcome")
    if outcome.status == STATUS_OK:
        feedback = EMPTY_RESULT_FEEDBACK
    else:
        feedback = outcome.diagnostic or f"execution failed with status {outcome.status}"
    return (
        GUIDANCE_INSTRUCTION
        + "\n"
        + _task_block(question, schema_text)
        + "### Previous attempt\n"
        + f"Reasoning: {reasoning}\n"
        + f"Program:\n```python\n{program}\n```\n"
        + "### Feedback\n"
        + feedback
        + "\n"
    )


def build_annotation_prompt(
    question: str,
    schema_text: str,
    logical_form: str | None,
    demos: list,
    feedback: str | None = None,
) -> str:
    """Compose the memory-annotation prompt, optionally with retry feedback."""
    parts = [ANNOTATION_INSTRUCTION, "\n"]
    for i, demo in enumerate(demos, start=1):
        parts.append(demo_block(i, demo.question, demo.schema_text, demo.reasoning, demo.program))
        parts.append("\n")
    parts.append(_task_block(question, schema_text, logical_form))
    if feedback:
        parts.append("### Feedback\n" + feedback + "\n")
    return "".join(parts)


def parse_output(raw: str) -> tuple[str, str]:
    """Split model output into (reasoning, program).

    The program is the contents of the last fenced code block (a trailing
    unclosed fence counts, since models drop closing fences); everything
    before that block is the reasoning. Without any fence the whole text is
    tried as a program.
    """
    if not raw or not raw.strip():
        raise EmptyOutput("model returned a blank response")
    lines = raw.splitlines()
    fences = [i for i, line in enumerate(lines) if line.lstrip().startswith("```")]
    if not fences:
        return "", raw.strip()
    if len(fences) % 2 == 0:
        open_i, close_i = fences[-2], fences[-1]
        program = "\n".join(lines[open_i + 1 : close_i])
    else:
        open_i = fences[-1]
        program = "\n".join(lines[open_i + 1 :])
    reasoning = "\n".join(lines[:open_i]).strip()
    return reasoning, program.strip()
