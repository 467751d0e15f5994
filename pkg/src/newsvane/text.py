"""Headline tokenization, vocabulary construction and ordinal encoding.

A headline becomes a fixed-length integer vector in three steps: tokenize
(lowercase, strip punctuation, drop stop-words), map each kept token to its
vocabulary index, and post-pad with the reserved index 0 up to the uniform
length ``max_len``. Index 0 never maps to a real token; it is the padding
dummy whose embedding stays a frozen zero vector.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .fileio import write_text_atomic

PAD_TOKEN = "<pad>"

# Fixed English stop-word list, embedded for reproducibility. Edits here
# change every downstream vocabulary, so treat it as frozen.
STOP_WORDS: frozenset[str] = frozenset(
    """
    a about above after again against all am an and any are as at be because
    been before being below between both but by can cannot could did do does
    doing down during each few for from further had has have having he her
    here hers herself him himself his how i if in into is it its itself just
    me more most my myself no nor not now of off on once only or other our
    ours ourselves out over own same she should so some such than that the
    their theirs them themselves then there these they this those through to
    too under until up very was we were what when where which while who whom
    why will with would you your yours yourself yourselves
    """.split()
)

# Characters treated as punctuation on top of the Unicode P* categories.
_EXTRA_PUNCTUATION = frozenset("$%&+<=>|~")


@lru_cache(maxsize=4096)
def _is_punctuation(ch: str) -> bool:
    return ch in _EXTRA_PUNCTUATION or unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Split a raw headline into lowercase tokens.

    Punctuation characters are deleted (not replaced by spaces), the result
    is split on whitespace, and stop-words are removed. The output may be
    empty; downstream encoding handles that.
    """
    cleaned = "".join(ch for ch in text.lower() if not _is_punctuation(ch))
    return [tok for tok in cleaned.split() if tok not in STOP_WORDS]


@dataclass(frozen=True)
class Vocabulary:
    """Token-to-index map built from the training collection.

    Indices are contiguous from 1; index 0 is reserved for padding.
    ``max_len`` is the uniform encoded length, by default the longest
    tokenized training sentence.
    """

    word_to_index: dict[str, int]
    max_len: int

    @property
    def size(self) -> int:
        return len(self.word_to_index)

    def __contains__(self, token: str) -> bool:
        return token in self.word_to_index

    def index_to_word(self) -> dict[int, str]:
        return {i: w for w, i in self.word_to_index.items()}

    def with_max_len(self, max_len: int) -> "Vocabulary":
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        return replace(self, max_len=max_len)


def build_vocabulary(training_texts: list[list[str]]) -> Vocabulary:
    """Assign indices >= 1 in first-occurrence order over the training tokens."""
    word_to_index: dict[str, int] = {}
    max_len = 0
    for tokens in training_texts:
        max_len = max(max_len, len(tokens))
        for tok in tokens:
            if tok not in word_to_index:
                word_to_index[tok] = len(word_to_index) + 1
    if not word_to_index:
        raise ValueError("cannot build a vocabulary: every token list is empty")
    return Vocabulary(word_to_index=word_to_index, max_len=max_len)


@dataclass(frozen=True, eq=False)
class EncodedHeadline:
    """A headline as a length-``max_len`` index vector plus its true length.

    Positions >= true_len hold the padding index 0; positions before it hold
    real token indices >= 1.
    """

    indices: np.ndarray  # int64, shape (max_len,)
    true_len: int


def encode_and_pad(tokens: list[str], vocab: Vocabulary) -> EncodedHeadline:
    """Encode kept tokens and post-pad with zeros to ``vocab.max_len``.

    Tokens absent from the vocabulary are dropped (no trained representation
    exists for them); sentences longer than ``max_len`` keep their first
    ``max_len`` tokens.
    """
    m = vocab.max_len
    kept = [vocab.word_to_index[t] for t in tokens if t in vocab.word_to_index][:m]
    indices = np.zeros(m, dtype=np.int64)
    indices[: len(kept)] = kept
    return EncodedHeadline(indices=indices, true_len=len(kept))


def decode(enc: EncodedHeadline, vocab: Vocabulary) -> list[str]:
    """Inverse of :func:`encode_and_pad` over the non-padding prefix."""
    inverse = vocab.index_to_word()
    return [inverse[int(i)] for i in enc.indices[: enc.true_len]]


def vocabulary_to_text(vocab: Vocabulary) -> str:
    """Serialize as a header line ``max_len=<m>`` plus ``token<TAB>index`` rows."""
    lines = [f"max_len={vocab.max_len}"]
    for token, index in sorted(vocab.word_to_index.items(), key=lambda kv: kv[1]):
        lines.append(f"{token}\t{index}")
    return "\n".join(lines) + "\n"


def vocabulary_from_text(content: str) -> Vocabulary:
    lines = content.splitlines()
    if not lines or not lines[0].startswith("max_len="):
        raise ValueError("vocabulary file must start with a 'max_len=<m>' header")
    max_len = int(lines[0].split("=", 1)[1])
    word_to_index: dict[str, int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        try:
            token, index = line.split("\t")
            word_to_index[token] = int(index)
        except ValueError as exc:
            raise ValueError(f"vocabulary file line {lineno}: expected 'token<TAB>index'") from exc
    expected = set(range(1, len(word_to_index) + 1))
    if set(word_to_index.values()) != expected:
        raise ValueError("vocabulary indices must be contiguous from 1")
    return Vocabulary(word_to_index=word_to_index, max_len=max_len)


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    write_text_atomic(path, vocabulary_to_text(vocab))


def load_vocabulary(path: str | Path) -> Vocabulary:
    return vocabulary_from_text(Path(path).read_text(encoding="utf-8"))


def vocabulary_hash(vocab: Vocabulary) -> str:
    """Stable content hash used to pair checkpoints with their vocabulary."""
    import hashlib

    return hashlib.sha256(vocabulary_to_text(vocab).encode()).hexdigest()
