"""Interpreter sidecar: executes dataframe programs shipped over stdio.

One JSON object per line on stdin, one reply per line on stdout. Each
request runs in a fresh namespace with every box materialized as a pandas
dataframe under its canonical name (JSON null becomes the native missing
value) and `pd` bound for convenience; the `result` variable is captured
and normalized to rows of JSON scalars. The worker enforces no timeout of
its own: the client kills it, and replies are written atomically per line
so a kill can never leave a partial frame.
"""

from __future__ import annotations

import io
import json
import sys
import traceback
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pandas as pd

DIAGNOSTIC_LIMIT = 4096
CAPTURED_OUTPUT_LIMIT = 1024


def _clip_tail(text: str, limit: int) -> str:
    data = text.encode("utf-8", errors="replace")
    if len(data) <= limit:
        return text
    return data[-limit:].decode("utf-8", errors="replace")


def _cell(value):
    if value is None or isinstance(value, (str, bool)):
        return value
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if value != value:
            return None
        if value in (float("inf"), float("-inf")):
            return str(value)  # JSON cannot carry infinities
        return value
    try:
        if pd.isna(value):
            return None
    except (TypeError, ValueError):
        pass
    return str(value)


def _is_scalar(value) -> bool:
    return value is None or isinstance(
        value, (str, bool, int, float, np.bool_, np.integer, np.floating)
    )


def normalize_result(result) -> list[list]:
    """Shape any program result into rows of JSON scalars.

    Scalars become a 1x1 answer, flat sequences a single column, dataframes
    row-major rows with column order preserved and the index dropped.
    Anything non-scalar in cell position is stringified so the protocol
    never carries foreign payloads.
    """
    if isinstance(result, pd.DataFrame):
        return [[_cell(v) for v in row] for row in result.itertuples(index=False, name=None)]
    if isinstance(result, pd.Series):
        return [[_cell(v)] for v in result.tolist()]
    if isinstance(result, np.ndarray):
        result = result.tolist()
    if _is_scalar(result):
        return [[_cell(result)]]
    if isinstance(result, (set, frozenset)):
        result = sorted(result, key=repr)
    if isinstance(result, (list, tuple)):
        rows = []
        for item in result:
            if isinstance(item, pd.Series):
                rows.append([_cell(v) for v in item.tolist()])
            elif isinstance(item, np.ndarray):
                rows.append([_cell(v) for v in item.tolist()])
            elif isinstance(item, (list, tuple)):
                rows.append([_cell(v) for v in item])
            else:
                rows.append([_cell(item)])
        return rows
    return [[_cell(result)]]


def build_namespace(boxes_obj: dict) -> dict:
    namespace = {"pd": pd}
    for box in boxes_obj.get("boxes", []):
        columns = {f: box["columns"][f] for f in box["fields"]}
        namespace[box["name"]] = pd.DataFrame(columns)
    return namespace


def handle_request(request: dict) -> dict:
    request_id = request.get("id", "unknown")
    if not isinstance(request.get("program"), str) or not isinstance(request.get("boxes"), dict):
        return {
            "id": request_id,
            "status": "runtime_error",
            "diagnostic": "protocol: request needs string 'program' and object 'boxes'",
        }
    captured = io.StringIO()
    try:
        namespace = build_namespace(request["boxes"])
        with redirect_stdout(captured), redirect_stderr(captured):
            exec(request["program"], namespace)
            if "result" not in namespace:
                raise NameError("name 'result' is not defined")
            answer = normalize_result(namespace["result"])
    except BaseException as e:
        diagnostic = f"{type(e).__name__}: {e}\n{traceback.format_exc()}"
        output_tail = _clip_tail(captured.getvalue(), CAPTURED_OUTPUT_LIMIT)
        if output_tail.strip():
            diagnostic += f"\nprogram output (tail):\n{output_tail}"
        return {
            "id": request_id,
            "status": "runtime_error",
            "diagnostic": _clip_tail(diagnostic, DIAGNOSTIC_LIMIT),
        }
    return {"id": request_id, "status": "ok", "answer": answer}


def serve_loop(stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("frame must be a JSON object")
        except (json.JSONDecodeError, ValueError) as e:
            frame = {"id": "unknown", "status": "runtime_error", "diagnostic": f"protocol: {e}"}
        else:
            frame = handle_request(request)
        try:
            payload = json.dumps(frame, ensure_ascii=False, allow_nan=False)
        except ValueError as e:
            payload = json.dumps(
                {
                    "id": frame.get("id", "unknown"),
                    "status": "runtime_error",
                    "diagnostic": f"protocol: result not serializable: {e}",
                }
            )
        stdout.write(payload + "\n")
        stdout.flush()


def main() -> None:
    serve_loop()


if __name__ == "__main__":
    main()
