"""Error types shared across the toolkit.

Every failure that callers are expected to handle carries a stable string
code (e.g. ``"container-corrupt"``) so that CLI and service layers can map
errors to exit codes and protocol events without string-matching messages.
"""

from __future__ import annotations


class ObaError(Exception):
    """Toolkit error with a stable machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"
