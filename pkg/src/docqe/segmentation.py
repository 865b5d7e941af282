"""Rule-based sentence segmentation with byte-exact round-tripping.

Sentences carry character spans into the original text, so the document can
always be reassembled with its original inter-sentence whitespace. Two rule
sets are provided: an English splitter (terminator + whitespace + capital,
with abbreviation protection) and a Japanese splitter (fixed terminator set
with closing-quote attachment, no whitespace requirement).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import BothEmpty
from .lang import is_japanese

__all__ = [
    "Sentence",
    "SegmentedDoc",
    "AlignedPairs",
    "segment_english",
    "segment_japanese",
    "segment",
    "align_and_pad",
]

# Closing punctuation that stays attached to the sentence it terminates.
_EN_CLOSERS = "\"'”’)\\]"
_JA_CLOSERS = "」』）〉》】\"'”’)\\]"

_EN_TERMINATOR_RE = re.compile(r"[.!?][%s]*" % _EN_CLOSERS)
_JA_TERMINATOR_RE = re.compile(r"[。！？!?][%s]*" % _JA_CLOSERS)

# Whitespace then the first following character; the split is only taken when
# that character opens a new sentence.
_NEXT_CHAR_RE = re.compile(r"\s+(\S)")
_OPENING_CHARS = "\"'“‘([¿「『（"

_LAST_TOKEN_RE = re.compile(r"(\S+)\Z")
_INITIAL_RE = re.compile(r"^[A-Z]\.$")

# Tokens that end with a period without ending a sentence.
_ABBREVIATIONS = frozenset(
    {
        "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "Rev.", "Hon.", "St.", "Gen.",
        "Capt.", "Lt.", "Sgt.", "Col.", "Sen.", "Rep.", "Jr.", "Sr.",
        "vs.", "etc.", "e.g.", "i.e.", "cf.", "al.", "approx.", "dept.",
        "est.", "min.", "max.", "no.", "No.", "Nos.", "p.", "pp.", "Fig.",
        "fig.", "Eq.", "eq.", "U.S.", "U.K.", "U.N.", "Inc.", "Ltd.", "Co.",
        "Corp.", "Mt.", "Ft.", "Ave.", "Blvd.", "Rd.", "Jan.", "Feb.",
        "Mar.", "Apr.", "Jun.", "Jul.", "Aug.", "Sep.", "Sept.", "Oct.",
        "Nov.", "Dec.", "Mon.", "Tue.", "Wed.", "Thu.", "Fri.", "Sat.",
        "Sun.",
    }
)


@dataclass(frozen=True, slots=True)
class Sentence:
    """One sentence with its half-open character span in the source text."""

    text: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end <= self.start:
            raise ValueError(f"empty or inverted span ({self.start}, {self.end})")

    @property
    def char_span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True, slots=True)
class SegmentedDoc:
    """A document plus its derived, span-annotated sentence list."""

    language: str
    raw_text: str
    sentences: tuple[Sentence, ...]

    @property
    def sentence_texts(self) -> tuple[str, ...]:
        return tuple(s.text for s in self.sentences)

    def __len__(self) -> int:
        return len(self.sentences)

    def reconstruct(self) -> str:
        """Reassemble the original text from sentences and recorded gaps."""
        if not self.sentences:
            return self.raw_text
        parts = [self.raw_text[: self.sentences[0].start]]
        for i, sent in enumerate(self.sentences):
            parts.append(sent.text)
            nxt = (
                self.sentences[i + 1].start
                if i + 1 < len(self.sentences)
                else len(self.raw_text)
            )
            parts.append(self.raw_text[sent.end : nxt])
        return "".join(parts)


@dataclass(frozen=True, slots=True)
class AlignedPairs:
    """Order-aligned (source, target) sentence pairs after length padding.

    pad_side names the side that received padding; the last pad_count entries
    on that side repeat its final original sentence (or the empty string when
    that side had no sentences at all).
    """

    pairs: tuple[tuple[str, str], ...]
    pad_side: str
    pad_count: int

    def __post_init__(self) -> None:
        if self.pad_side not in ("none", "source", "target"):
            raise ValueError(f"unknown pad_side {self.pad_side!r}")
        if self.pad_count < 0 or self.pad_count > len(self.pairs):
            raise ValueError(f"pad_count {self.pad_count} out of range")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def source_texts(self) -> tuple[str, ...]:
        return tuple(src for src, _ in self.pairs)

    @property
    def target_texts(self) -> tuple[str, ...]:
        return tuple(tgt for _, tgt in self.pairs)


def _is_abbreviation(text: str, terminator_index: int) -> bool:
    """True when the token ending at ``terminator_index`` blocks a split."""
    if text[terminator_index] != ".":
        return False
    match = _LAST_TOKEN_RE.search(text, 0, terminator_index + 1)
    if match is None:
        return False
    token = match.group(1).lstrip(_OPENING_CHARS)
    return token in _ABBREVIATIONS or bool(_INITIAL_RE.match(token))


def _opens_sentence(ch: str) -> bool:
    return ch.isupper() or ch in _OPENING_CHARS


def _first_nonspace(text: str, pos: int) -> int | None:
    while pos < len(text):
        if not text[pos].isspace():
            return pos
        pos += 1
    return None


def _trailing_sentence(text: str, start: int) -> Sentence | None:
    end = len(text)
    while end > start and text[end - 1].isspace():
        end -= 1
    if end <= start:
        return None
    return Sentence(text=text[start:end], start=start, end=end)


def segment_english(text: str) -> tuple[Sentence, ...]:
    """Split English text into sentences.

    A split happens after ``. ! ?`` (plus attached closing quotes/brackets)
    when followed by whitespace and an uppercase or opening character, unless
    the preceding token is a known abbreviation or a single initial.
    """
    sentences: list[Sentence] = []
    start = _first_nonspace(text, 0)
    if start is None:
        return ()
    for match in _EN_TERMINATOR_RE.finditer(text, start):
        following = _NEXT_CHAR_RE.match(text, match.end())
        if following is None:
            continue
        if not _opens_sentence(following.group(1)):
            continue
        if _is_abbreviation(text, match.start()):
            continue
        sentences.append(
            Sentence(text=text[start : match.end()], start=start, end=match.end())
        )
        start = following.start(1)
    tail = _trailing_sentence(text, start)
    if tail is not None:
        sentences.append(tail)
    return tuple(sentences)


def segment_japanese(text: str) -> tuple[Sentence, ...]:
    """Split Japanese text after each terminator and its closing quotes."""
    sentences: list[Sentence] = []
    start = _first_nonspace(text, 0)
    if start is None:
        return ()
    while True:
        match = _JA_TERMINATOR_RE.search(text, start)
        if match is None:
            break
        sentences.append(
            Sentence(text=text[start : match.end()], start=start, end=match.end())
        )
        nxt = _first_nonspace(text, match.end())
        if nxt is None:
            return tuple(sentences)
        start = nxt
    tail = _trailing_sentence(text, start)
    if tail is not None:
        sentences.append(tail)
    return tuple(sentences)


def segment(text: str, lang: str) -> SegmentedDoc:
    """Segment ``text`` with the rule set for ``lang`` (Japanese or default)."""
    splitter = segment_japanese if is_japanese(lang) else segment_english
    return SegmentedDoc(language=lang, raw_text=text, sentences=splitter(text))


def align_and_pad(src: SegmentedDoc, tgt: SegmentedDoc) -> AlignedPairs:
    """Pair source and target sentences by order, padding the shorter side.

    Padding repeats the shorter side's final sentence; a side with zero
    sentences contributes empty strings. Raises BothEmpty when neither side
    has any sentences.
    """
    src_texts = list(src.sentence_texts)
    tgt_texts = list(tgt.sentence_texts)
    m, n = len(src_texts), len(tgt_texts)
    if m == 0 and n == 0:
        raise BothEmpty("both documents segmented to zero sentences")
    total = max(m, n)
    pad_count = abs(m - n)
    if m < n:
        pad_side = "source"
        filler = src_texts[-1] if src_texts else ""
        src_texts.extend([filler] * (total - m))
    elif n < m:
        pad_side = "target"
        filler = tgt_texts[-1] if tgt_texts else ""
        tgt_texts.extend([filler] * (total - n))
    else:
        pad_side = "none"
    return AlignedPairs(
        pairs=tuple(zip(src_texts, tgt_texts)),
        pad_side=pad_side,
        pad_count=pad_count,
    )
