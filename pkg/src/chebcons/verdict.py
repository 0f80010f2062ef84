from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional


@dataclass(frozen=True)
class Verdict:
    """Pass/fail result of a predicate, with the first failing clause."""

    ok: bool
    reason: Optional[str] = None
    value: Any = None

    def __bool__(self):
        return self.ok

    def __str__(self):
        status = "PASS" if self.ok else "FAIL"
        parts = [status]
        if self.reason:
            parts.append(self.reason)
        if self.value is not None:
            parts.append(f"value={self.value}")
        return " | ".join(parts)
