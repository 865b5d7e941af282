"""Scripted chat replies for mock mode, keyed by prompt hash and attempt.

A fixture file maps the SHA-256 hex digest of a prompt to an ordered list of
replies; call n for that prompt returns entry n (the final entry repeats once
the script is exhausted). Prompts with no fixture get a deterministic
hash-derived integer in [0, 100], so the endpoint always answers.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

__all__ = ["ChatFixtures", "default_reply", "prompt_key"]


def prompt_key(prompt: str) -> str:
    """The fixture key for a prompt: its SHA-256 hex digest."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def default_reply(key: str, attempt: int) -> str:
    """Stable integer reply in [0, 100] for unscripted prompts."""
    digest = hashlib.sha256(f"{key}:{attempt}".encode("utf-8")).digest()
    return str(int.from_bytes(digest[:8], "big") % 101)


@dataclass
class ChatFixtures:
    """Reply scripts plus per-prompt attempt counters (attempts start at 1)."""

    scripts: Mapping[str, Sequence[str]] = field(default_factory=dict)
    _attempts: Counter = field(default_factory=Counter)

    def __post_init__(self) -> None:
        for key, replies in self.scripts.items():
            if not replies:
                raise ValueError(f"fixture {key!r} has no replies")

    @classmethod
    def from_file(cls, path: str | Path) -> "ChatFixtures":
        """Read a JSON fixture file: {prompt_sha256: [reply, ...], ...}."""
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot read fixtures {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValueError(f"fixtures {path} must be a JSON object")
        return cls(scripts={str(k): [str(r) for r in v] for k, v in raw.items()})

    def next_reply(self, prompt: str) -> tuple[str, int]:
        """The scripted (or default) reply and this prompt's attempt number."""
        key = prompt_key(prompt)
        self._attempts[key] += 1
        attempt = self._attempts[key]
        script = self.scripts.get(key)
        if script is None:
            return default_reply(key, attempt), attempt
        return script[min(attempt - 1, len(script) - 1)], attempt
