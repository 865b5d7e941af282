"""HTTP scoring shim: QE scorer and chat endpoints with a deterministic mock mode."""

from .app import Settings, create_app
from .fixtures import ChatFixtures, prompt_key
from .registry import ModelEntry, ModelRegistry

__all__ = [
    "ChatFixtures",
    "ModelEntry",
    "ModelRegistry",
    "Settings",
    "create_app",
    "prompt_key",
]
