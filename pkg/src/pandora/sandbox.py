"""Client side of the program-execution boundary.

Programs run in a separate worker process speaking newline-delimited JSON
over stdin/stdout. The client ships (box set, program), enforces the wall
clock by killing the worker, normalizes results, and classifies validity.
A worker is disposed of after any non-ok outcome, so state can never leak
across failures; ok workers are reused but execute each request in a fresh
namespace on their side.
"""

from __future__ import annotations

import json
import os
import queue
import shlex
import subprocess
import threading
import uuid
from dataclasses import dataclass

from .boxes import BoxSet, Value, boxset_to_obj

SANDBOX_CMD_VAR = "PANDORA_SANDBOX_CMD"
DIAGNOSTIC_LIMIT = 4096
TIMEOUT_GRACE_S = 0.25

STATUS_OK = "ok"
STATUS_RUNTIME_ERROR = "runtime_error"
STATUS_TIMEOUT = "timeout"
STATUS_PROTOCOL_ERROR = "protocol_error"

VALID = "valid"
INVALID_ERROR = "invalid_error"
INVALID_EMPTY = "invalid_empty"


@dataclass
class ExecRequest:
    boxset: BoxSet
    program: str
    time_limit_ms: int = 10000
    max_result_cells: int = 10000

    def validate(self) -> None:
        if self.time_limit_ms <= 0 or self.max_result_cells <= 0:
            raise ValueError("sandbox limits must be positive")


@dataclass
class ExecOutcome:
    status: str
    answer: list[list[Value]] | None = None
    diagnostic: str = ""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


def classify_validity(outcome: ExecOutcome) -> str:
    """An execution is valid iff it succeeded and returned at least one row."""
    if outcome.status != STATUS_OK:
        return INVALID_ERROR
    if not outcome.answer:
        return INVALID_EMPTY
    return VALID


def _clip(text: str, limit: int = DIAGNOSTIC_LIMIT) -> str:
    data = text.encode("utf-8", errors="replace")
    if len(data) <= limit:
        return text
    return data[-limit:].decode("utf-8", errors="replace")


class _Worker:
    """One subprocess plus a reader thread feeding a line queue."""

    def __init__(self, cmd: list[str]):
        self.proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
        )
        self.dead = False
        self.lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            self.lines.put(line)
        self.lines.put(None)  # EOF marker

    def send(self, frame: dict) -> None:
        assert self.proc.stdin is not None
        self.proc.stdin.write(json.dumps(frame, ensure_ascii=False) + "\n")
        self.proc.stdin.flush()

    def kill(self) -> None:
        try:
            self.proc.kill()
            self.proc.wait(timeout=5)
        except Exception:
            pass


class SandboxClient:
    """Thread-safe executor pool; each worker serves one request at a time."""

    def __init__(self, cmd: str | list[str] | None = None, pool_size: int = 1):
        if cmd is None:
            cmd = os.environ.get(SANDBOX_CMD_VAR)
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        self.cmd = cmd
        self.pool_size = max(1, pool_size)
        self._slots = threading.Semaphore(self.pool_size)
        self._idle: list[_Worker] = []
        self._lock = threading.Lock()
        self._closed = False

    def execute(self, request: ExecRequest) -> ExecOutcome:
        request.validate()
        if not self.cmd:
            return ExecOutcome(
                status=STATUS_PROTOCOL_ERROR,
                diagnostic=f"no sandbox worker configured (set {SANDBOX_CMD_VAR})",
            )
        self._slots.acquire()
        worker: _Worker | None = None
        try:
            worker = self._checkout()
            outcome = self._run(worker, request)
            if outcome.status != STATUS_OK:
                worker.dead = True
        except OSError as e:
            return ExecOutcome(
                status=STATUS_PROTOCOL_ERROR, diagnostic=f"worker spawn failed: {e}"
            )
        finally:
            if worker is not None:
                self._checkin(worker)
            self._slots.release()
        return outcome

    def _run(self, worker: _Worker, request: ExecRequest) -> ExecOutcome:
        request_id = uuid.uuid4().hex
        frame = {
            "id": request_id,
            "boxes": boxset_to_obj(request.boxset),
            "program": request.program,
            "time_limit_ms": request.time_limit_ms,
        }
        try:
            worker.send(frame)
        except (OSError, ValueError) as e:
            worker.dead = True
            return ExecOutcome(status=STATUS_PROTOCOL_ERROR, diagnostic=f"worker write failed: {e}")
        try:
            line = worker.lines.get(timeout=request.time_limit_ms / 1000.0 + TIMEOUT_GRACE_S)
        except queue.Empty:
            worker.dead = True
            worker.kill()
            return ExecOutcome(
                status=STATUS_TIMEOUT,
                diagnostic=f"execution exceeded {request.time_limit_ms} ms and was killed",
            )
        if line is None:
            worker.dead = True
            return ExecOutcome(
                status=STATUS_PROTOCOL_ERROR, diagnostic="worker exited without replying"
            )
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as e:
            worker.dead = True
            worker.kill()
            return ExecOutcome(
                status=STATUS_PROTOCOL_ERROR,
                diagnostic=f"malformed worker frame: {e}: {_clip(line, 200)!r}",
            )
        if not isinstance(reply, dict) or reply.get("id") != request_id:
            worker.dead = True
            worker.kill()
            return ExecOutcome(
                status=STATUS_PROTOCOL_ERROR,
                diagnostic=f"worker frame id mismatch: {_clip(str(reply), 200)}",
            )
        return self._normalize(reply, request)

    def _normalize(self, reply: dict, request: ExecRequest) -> ExecOutcome:
        status = reply.get("status")
        if status == STATUS_OK:
            answer = reply.get("answer")
            rows, bad = _coerce_rows(answer)
            if bad:
                return ExecOutcome(status=STATUS_PROTOCOL_ERROR, diagnostic=bad)
            diagnostic = _clip(str(reply.get("diagnostic", "")))
            rows, truncated = _truncate_cells(rows, request.max_result_cells)
            if truncated:
                note = f"result truncated to {request.max_result_cells} cells"
                diagnostic = f"{diagnostic}; {note}" if diagnostic else note
            return ExecOutcome(status=STATUS_OK, answer=rows, diagnostic=diagnostic)
        if status in (STATUS_RUNTIME_ERROR, STATUS_TIMEOUT):
            diagnostic = _clip(str(reply.get("diagnostic", ""))) or "worker reported failure"
            return ExecOutcome(status=status, diagnostic=diagnostic)
        return ExecOutcome(
            status=STATUS_PROTOCOL_ERROR, diagnostic=f"unknown worker status {status!r}"
        )

    def _checkout(self) -> _Worker:
        with self._lock:
            if self._idle:
                return self._idle.pop()
        return _Worker(self.cmd)

    def _checkin(self, worker: _Worker) -> None:
        # Non-ok outcomes mark the worker dead; it is replaced, never reused.
        if worker.dead or worker.proc.poll() is not None:
            worker.kill()
            return
        with self._lock:
            if self._closed:
                worker.kill()
            else:
                self._idle.append(worker)

    def close(self) -> None:
        with self._lock:
            self._closed = True
            workers, self._idle = self._idle, []
        for worker in workers:
            worker.kill()

    def __enter__(self) -> "SandboxClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _coerce_rows(answer: object) -> tuple[list[list[Value]], str]:
    if not isinstance(answer, list):
        return [], f"ok frame without row-list answer: {type(answer).__name__}"
    rows: list[list[Value]] = []
    for row in answer:
        if not isinstance(row, list):
            return [], f"malformed answer row: {type(row).__name__}"
        cells: list[Value] = []
        for cell in row:
            if cell is None or isinstance(cell, (str, int, float, bool)):
                cells.append(cell)
            else:
                return [], f"malformed answer cell: {type(cell).__name__}"
        rows.append(cells)
    return rows, ""


def _truncate_cells(rows: list[list[Value]], max_cells: int) -> tuple[list[list[Value]], bool]:
    total = 0
    for i, row in enumerate(rows):
        total += max(len(row), 1)
        if total > max_cells:
            return rows[:i], True
    return rows, False
