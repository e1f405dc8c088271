"""Text records, word-level tokenization, vocabulary, and corpus-quality metrics.

A corpus is a plain list of :class:`Example`. On disk it is JSONL: one object
per line with keys ``text`` (string), ``source`` (string), ``meta`` (string map),
UTF-8. A vocabulary file is one word per line; line order defines token ids and
id 0 is always the out-of-vocabulary token.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

SOURCES = ("filtered", "generated_chat", "transformed", "raw", "private_sim")

OOV_TOKEN = "<oov>"

# Lowercased input only. Runs of letters and runs of digits are single tokens;
# every other non-space character is its own token, so tokenization is total.
_TOKEN_RE = re.compile(r"[a-z]+|[0-9]+|[^a-z0-9\s]")

# A turn marker is a line starting with an optional **, a short speaker label,
# a colon, and an optional closing ** (covers "**Me:**" and "Therapist:").
_TURN_RE = re.compile(r"^\s*(?:\*\*)?([^:*\n]{1,40}):(?:\*\*)?\s?(.*)$")

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


class EmptySequenceError(ValueError):
    """Raised when a metric is undefined on an empty token sequence."""


@dataclass(frozen=True)
class Example:
    """One text record with its provenance tag and free-form metadata."""

    text: str
    source: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}; expected one of {SOURCES}")
        if not self.text.strip():
            raise ValueError("example text is empty after normalization")


@dataclass(frozen=True)
class TokenizedExample:
    """Token ids for one example plus the count of out-of-vocabulary ids."""

    ids: tuple
    oov_count: int

    def __post_init__(self):
        if self.oov_count != sum(1 for i in self.ids if i == Vocabulary.OOV_ID):
            raise ValueError("oov_count does not match ids")


class Vocabulary:
    """Fixed word-level token table; id 0 is the reserved OOV token.

    Lookups are total: any word not in the table maps to ``OOV_ID``.
    """

    OOV_ID = 0

    def __init__(self, words: Sequence[str]):
        words = list(words)
        if not words or words[0] != OOV_TOKEN:
            words = [OOV_TOKEN] + words
        if len(set(words)) != len(words):
            raise ValueError("vocabulary contains duplicate words")
        self._words = words
        self._index = {w: i for i, w in enumerate(words)}

    @property
    def size(self) -> int:
        return len(self._words)

    @property
    def oov_id(self) -> int:
        return self.OOV_ID

    @property
    def words(self) -> list:
        return list(self._words)

    def id_of(self, word: str) -> int:
        return self._index.get(word, self.OOV_ID)

    def word_of(self, token_id: int) -> str:
        return self._words[token_id]

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def __len__(self) -> int:
        return len(self._words)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._words == other._words

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for w in self._words:
                f.write(w + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            words = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        if words[0] != OOV_TOKEN:
            raise ValueError(f"vocabulary file must start with {OOV_TOKEN!r}")
        return cls(words)


def word_tokens(text: str) -> list:
    """Lowercase and split into word/number/punctuation tokens."""
    return _TOKEN_RE.findall(text.lower())


def build_vocabulary(corpus: Iterable[Example], size: int) -> Vocabulary:
    """Build a vocabulary from corpus word frequencies.

    Takes the ``size - 1`` most frequent words (ties broken alphabetically)
    plus the OOV token at id 0. Returns fewer entries when the corpus has
    fewer distinct words.
    """
    if size < 2:
        raise ValueError("vocabulary size must be at least 2 (OOV plus one word)")
    counts = Counter()
    for ex in corpus:
        counts.update(word_tokens(ex.text))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary([w for w, _ in ranked[: size - 1]])


def tokenize(text: str, vocab: Vocabulary) -> TokenizedExample:
    """Map text to token ids; unknown words become the OOV id. Empty text is fine."""
    ids = tuple(vocab.id_of(t) for t in word_tokens(text))
    return TokenizedExample(ids=ids, oov_count=sum(1 for i in ids if i == vocab.OOV_ID))


def oov_rate(ex: TokenizedExample) -> float:
    """Fraction of tokens outside the vocabulary. Undefined on empty sequences."""
    if not ex.ids:
        raise EmptySequenceError("oov rate is undefined for an empty token sequence")
    return ex.oov_count / len(ex.ids)


def vocab_coverage(corpus: Iterable[Example], vocab: Vocabulary) -> float:
    """Fraction of non-OOV vocabulary words that occur at least once in the corpus."""
    if vocab.size <= 1:
        return 1.0  # no real words to cover
    vocab_words = set(vocab.words[1:])
    seen = set()
    for ex in corpus:
        for tok in word_tokens(ex.text):
            if tok in vocab_words:
                seen.add(tok)
        if len(seen) == len(vocab_words):
            break
    return len(seen) / (vocab.size - 1)


def split_turns(chat_text: str, source: str = "raw", meta: dict | None = None) -> list:
    """Split a multi-turn chat into one :class:`Example` per turn.

    Speaker markers are stripped; lines without a marker continue the current
    turn. Text with no recognizable markers at all becomes a single example
    flagged with ``meta["no_turn_markers"] = "1"``.
    """
    meta = dict(meta or {})
    if not chat_text.strip():
        return []
    turns = []
    current: list | None = None
    saw_marker = False
    for line in chat_text.splitlines():
        m = _TURN_RE.match(line)
        if m:
            saw_marker = True
            if current:
                turns.append(" ".join(current))
            current = [m.group(2).strip()] if m.group(2).strip() else []
        elif line.strip():
            if current is None:
                current = []
            current.append(line.strip())
    if current:
        turns.append(" ".join(current))
    if not saw_marker:
        return [Example(text=chat_text.strip(), source=source, meta={**meta, "no_turn_markers": "1"})]
    out = []
    for i, t in enumerate(turns):
        if t.strip():
            out.append(Example(text=t, source=source, meta={**meta, "turn": str(i)}))
    return out


def split_sentences(text: str, source: str = "raw", meta: dict | None = None) -> list:
    """Split prose into one example per sentence.

    Boundaries are ``. ! ?`` followed by whitespace; abbreviations are not
    treated specially (documented limitation).
    """
    meta = dict(meta or {})
    if not text.strip():
        return []
    parts = [p.strip() for p in _SENTENCE_SPLIT_RE.split(text.strip()) if p.strip()]
    return [Example(text=p, source=source, meta=dict(meta)) for p in parts]


def save_corpus(corpus: Iterable[Example], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in corpus:
            rec = {"text": ex.text, "source": ex.source, "meta": ex.meta}
            f.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


def load_corpus(path) -> list:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(Example(text=rec["text"], source=rec["source"], meta=dict(rec.get("meta", {}))))
    return out
