"""Interpreter sidecar for the box-set execution protocol."""

from .worker import handle_request, normalize_result, serve_loop  # noqa: F401
