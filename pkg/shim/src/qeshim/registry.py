"""Named scoring models, loaded lazily from a registry config.

One process hosts many models keyed by name. A registry entry points at a
zero-argument factory (``package.module:attribute``); the factory runs once on
the first request for that model and must return a callable mapping a list of
pair dicts to a list of float scores. The special name "mock" is always
available and needs no registry entry.
"""

from __future__ import annotations

import hashlib
import importlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import yaml

__all__ = [
    "InvalidRegistry",
    "MOCK_MODEL",
    "ModelEntry",
    "ModelLoadFailure",
    "ModelRegistry",
    "UnknownModel",
    "mock_score",
]

MOCK_MODEL = "mock"

Scorer = Callable[[Sequence[Mapping]], Sequence[float]]


class UnknownModel(Exception):
    """The requested model name is not registered."""


class ModelLoadFailure(Exception):
    """The model's factory could not be imported or raised while loading."""


class InvalidRegistry(Exception):
    """The registry config file is malformed."""


def mock_score(pairs: Sequence[Mapping]) -> list[float]:
    """Stable hash-derived score in [0, 1) per (src, tgt) pair.

    Depends on the pair texts only, so identical pairs score identically in
    any request, in any order, in any process.
    """
    scores = []
    for pair in pairs:
        digest = hashlib.sha256(
            "\x1f".join(("qeshim", pair["src"], pair["tgt"])).encode("utf-8")
        ).digest()
        scores.append(int.from_bytes(digest[:8], "big") / 2**64)
    return scores


@dataclass(frozen=True, slots=True)
class ModelEntry:
    """Registry row: where a model comes from and how it behaves.

    token_cap is the model's source+target token budget, used only to
    annotate over-length pairs; can_mask=False means context cannot be
    conditioned on without being scored, so masked pairs degrade to
    context-free scoring.
    """

    name: str
    target: str
    token_cap: int = 512
    can_mask: bool = True

    def __post_init__(self) -> None:
        if not self.name or self.name == MOCK_MODEL:
            raise InvalidRegistry(f"invalid registry model name {self.name!r}")
        if ":" not in self.target:
            raise InvalidRegistry(
                f"model {self.name!r}: target must be 'module:attribute', got {self.target!r}"
            )
        if self.token_cap < 1:
            raise InvalidRegistry(f"model {self.name!r}: token_cap must be >= 1")


@dataclass
class ModelRegistry:
    """Lazy-loading model store; loaded scorers are cached for reuse."""

    entries: tuple[ModelEntry, ...] = ()
    _loaded: dict[str, Scorer] = field(default_factory=dict)

    def __post_init__(self) -> None:
        names = [entry.name for entry in self.entries]
        if len(set(names)) != len(names):
            raise InvalidRegistry(f"duplicate model names in registry: {names}")
        self._by_name = {entry.name: entry for entry in self.entries}

    @classmethod
    def from_file(cls, path: str | Path) -> "ModelRegistry":
        """Read a YAML registry: models: {name: {target, token_cap?, can_mask?}}."""
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise InvalidRegistry(f"cannot read registry {path}: {exc}") from exc
        if not isinstance(raw, Mapping) or not isinstance(raw.get("models"), Mapping):
            raise InvalidRegistry(f"registry {path} must map 'models' to a mapping")
        entries = []
        for name, spec in raw["models"].items():
            if not isinstance(spec, Mapping) or "target" not in spec:
                raise InvalidRegistry(f"model {name!r}: entry needs a 'target'")
            entries.append(
                ModelEntry(
                    name=str(name),
                    target=str(spec["target"]),
                    token_cap=int(spec.get("token_cap", 512)),
                    can_mask=bool(spec.get("can_mask", True)),
                )
            )
        return cls(entries=tuple(entries))

    @property
    def names(self) -> list[str]:
        return sorted([MOCK_MODEL, *self._by_name])

    def entry(self, name: str) -> ModelEntry | None:
        """The registry entry for ``name``; None for the builtin mock."""
        if name == MOCK_MODEL:
            return None
        if name not in self._by_name:
            raise UnknownModel(name)
        return self._by_name[name]

    def scorer(self, name: str) -> Scorer:
        """The scoring callable for ``name``, loading it on first use."""
        if name == MOCK_MODEL:
            return mock_score
        entry = self.entry(name)
        if name not in self._loaded:
            module_name, _, attribute = entry.target.partition(":")
            try:
                factory = getattr(importlib.import_module(module_name), attribute)
                self._loaded[name] = factory()
            except Exception as exc:
                raise ModelLoadFailure(
                    f"model {name!r} failed to load from {entry.target!r}: {exc}"
                ) from exc
        return self._loaded[name]
