"""Language-dependent helpers: sentence joining and token-count heuristics.

The token counts here are deliberately cheap estimates used for budget
arithmetic and length bucketing; a backend's own tokenizer takes precedence
when it reports counts.
"""

from __future__ import annotations

__all__ = [
    "is_japanese",
    "joiner",
    "join_sentences",
    "approx_token_count",
    "language_name",
]

# Tokens-per-unit calibration for the two supported estimate modes:
# whitespace-delimited words for space-separated languages, characters for
# Japanese.
_TOKENS_PER_WORD = 1.3
_TOKENS_PER_JA_CHAR = 0.7

_LANGUAGE_NAMES = {
    "en": "English",
    "ja": "Japanese",
    "de": "German",
    "fr": "French",
    "es": "Spanish",
    "zh": "Chinese",
    "ko": "Korean",
    "ru": "Russian",
    "pt": "Portuguese",
    "it": "Italian",
}


def is_japanese(lang: str) -> bool:
    return lang.split("-")[0].split("_")[0].lower() in ("ja", "jpn")


def joiner(lang: str) -> str:
    """Separator used when sentences are joined back into running text."""
    return "" if is_japanese(lang) else " "


def join_sentences(texts: list[str] | tuple[str, ...], lang: str) -> str:
    return joiner(lang).join(texts)


def approx_token_count(text: str, lang: str) -> int:
    """Estimate the token count of ``text``.

    Japanese: non-whitespace characters x 0.7. Everything else:
    whitespace-delimited words x 1.3. Non-empty text never estimates to zero.
    """
    if not text or not text.strip():
        return 0
    if is_japanese(lang):
        units = sum(1 for ch in text if not ch.isspace())
        estimate = units * _TOKENS_PER_JA_CHAR
    else:
        units = len(text.split())
        estimate = units * _TOKENS_PER_WORD
    return max(1, round(estimate))


def language_name(code: str) -> str:
    """Human-readable language name for prompts; falls back to the code."""
    return _LANGUAGE_NAMES.get(code.split("-")[0].split("_")[0].lower(), code)
