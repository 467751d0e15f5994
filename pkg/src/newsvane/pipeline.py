"""End-to-end dataset preparation: label, split, tokenize, encode.

Ties the corpus and text layers together into the sample lists the trainer
and the backtester consume. The vocabulary is built from training headlines
only; test headlines are encoded against it, dropping out-of-vocabulary
tokens.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

from .corpus import (
    TRI_CLASSES,
    DatasetSplit,
    HeadlineRecord,
    PriceBar,
    label_all,
    split_half_hourly_unique,
)
from .text import EncodedHeadline, Vocabulary, build_vocabulary, encode_and_pad, tokenize

TRI_INDEX = {name: i for i, name in enumerate(TRI_CLASSES)}


@dataclass(frozen=True, eq=False)
class Sample:
    """One model-ready headline: encoding plus labels and trade metadata."""

    headline_id: int
    asset: str
    date: dt.date
    trade_date: dt.date
    next_day_return: float
    binary_label: int
    tri_label: str
    enc: EncodedHeadline

    @property
    def tri_index(self) -> int:
        return TRI_INDEX[self.tri_label]


@dataclass(frozen=True, eq=False)
class PreparedData:
    vocab: Vocabulary
    train: tuple[Sample, ...]
    test: tuple[Sample, ...]
    split: DatasetSplit
    n_unlabeled: int  # headlines dropped because the price history ended


def prepare_dataset(
    headlines: list[HeadlineRecord],
    prices: list[PriceBar],
    portfolio: set[str] | frozenset[str],
    max_len: int | None = None,
) -> PreparedData:
    """Label, split and encode a corpus.

    Headlines whose next trading day is beyond the price history are dropped
    before splitting (their count is reported). ``max_len`` optionally
    overrides the encoded length; otherwise the longest tokenized training
    sentence defines it.
    """
    labels, skipped = label_all(headlines, prices)
    labeled_headlines = [h for h in headlines if h.id in labels]
    split = split_half_hourly_unique(labeled_headlines, portfolio)

    by_id = {h.id: h for h in labeled_headlines}
    train_tokens = {hid: tokenize(by_id[hid].text) for hid in sorted(split.train_ids)}
    vocab = build_vocabulary(list(train_tokens.values()))
    if max_len is not None:
        vocab = vocab.with_max_len(max_len)

    def to_sample(hid: int, tokens: list[str]) -> Sample:
        h = by_id[hid]
        lab = labels[hid]
        return Sample(
            headline_id=hid, asset=h.asset, date=h.date, trade_date=lab.trade_date,
            next_day_return=lab.next_day_return, binary_label=lab.binary_label,
            tri_label=lab.tri_label, enc=encode_and_pad(tokens, vocab),
        )

    train = tuple(to_sample(hid, toks) for hid, toks in train_tokens.items())
    test = tuple(
        to_sample(hid, tokenize(by_id[hid].text)) for hid in sorted(split.test_ids)
    )
    return PreparedData(
        vocab=vocab, train=train, test=test, split=split, n_unlabeled=len(skipped)
    )


def to_pairs(samples: tuple[Sample, ...], head: str) -> list[tuple[EncodedHeadline, int]]:
    """Project samples onto (encoding, class index) pairs for the given head."""
    if head == "binary":
        return [(s.enc, s.binary_label) for s in samples]
    return [(s.enc, s.tri_index) for s in samples]


def validation_slice(
    samples: tuple[Sample, ...], fraction: float, seed: int
) -> tuple[tuple[Sample, ...], tuple[Sample, ...]]:
    """Split training samples into (fit, selection) parts by whole dates.

    Slicing by date rather than by headline keeps same-day rewrites of one
    event on the same side of the split.
    """
    import numpy as np

    from .seeding import derive_seed

    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    dates = sorted({s.date for s in samples})
    if len(dates) < 2:
        raise ValueError("need at least two distinct dates to carve a validation slice")
    rng = np.random.default_rng(derive_seed(seed, "validation-slice"))
    n_val = max(1, int(round(fraction * len(dates))))
    if n_val >= len(dates):
        n_val = len(dates) - 1
    chosen = set(rng.permutation(len(dates))[:n_val].tolist())
    val_dates = {dates[i] for i in chosen}
    fit = tuple(s for s in samples if s.date not in val_dates)
    val = tuple(s for s in samples if s.date in val_dates)
    return fit, val
