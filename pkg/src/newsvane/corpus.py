"""Headline and price ingestion, next-day labeling, and the leakage-free split.

Raw inputs are two CSV files: timestamped per-asset headlines and daily
open/close price bars. Each headline is labeled with the return of the next
trading day after its calendar date, both as a binary up/down label and as a
three-way avoid / inconsequential / buy label with a +-0.5% significance
band. The test split keeps only "half-hourly unique" headlines: if an asset
has a single headline within a fixed wall-clock half-hour bucket, the event
it describes is assumed unique to that headline, so it cannot leak into
training through a same-event rewrite from another source.

A deterministic synthetic generator produces desk-scale corpora with a
controllable amount of real signal, used by the self-tests and demos.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fileio import write_text_atomic
from .seeding import derive_seed

TRI_AVOID = "avoid"
TRI_INCONSEQUENTIAL = "inconsequential"
TRI_BUY = "buy"
TRI_CLASSES = (TRI_AVOID, TRI_INCONSEQUENTIAL, TRI_BUY)

# Next-day returns inside (-SIGNIFICANT_RETURN, +SIGNIFICANT_RETURN) are
# considered inconsequential for the three-class labeling; the boundaries
# themselves are inconsequential too (both outer rules are strict).
SIGNIFICANT_RETURN = 0.005

HEADLINE_CSV_HEADER = ["id", "asset", "date", "time", "relevance", "text"]
PRICE_CSV_HEADER = ["asset", "date", "open", "close"]


@dataclass(frozen=True)
class HeadlineRecord:
    """One ingested headline row."""

    id: int
    asset: str
    date: dt.date
    time: dt.time
    text: str
    relevance: float

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("headline text must be non-empty")
        if not 0.0 <= self.relevance <= 1.0:
            raise ValueError("relevance must lie in [0, 1]")


@dataclass(frozen=True)
class PriceBar:
    """Daily open/close prices for one asset."""

    asset: str
    date: dt.date
    open: float
    close: float

    def __post_init__(self) -> None:
        if self.open <= 0 or self.close <= 0:
            raise ValueError("prices must be positive")


@dataclass(frozen=True)
class LabeledSample:
    """A headline joined with the next trading day's return and labels."""

    headline_id: int
    asset: str
    trade_date: dt.date
    next_day_return: float
    binary_label: int
    tri_label: str


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint train/test headline id sets plus the retained test dates."""

    train_ids: frozenset[int]
    test_ids: frozenset[int]
    test_dates: tuple[dt.date, ...]


def _parse_date(text: str) -> dt.date:
    return dt.datetime.strptime(text, "%Y-%m-%d").date()


def _parse_time(text: str) -> dt.time:
    return dt.datetime.strptime(text, "%H:%M").time()


def load_headlines(path: str | Path, min_relevance: float = 1.0) -> list[HeadlineRecord]:
    """Read a headline CSV, keeping rows with relevance >= ``min_relevance``.

    Ids are (re)assigned sequentially over the kept rows in file order; the
    file's own id column is validated as an integer but not used as identity.
    Raises ``ValueError`` naming the offending line for malformed rows, and
    when no row qualifies.
    """
    path = Path(path)
    records: list[HeadlineRecord] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HEADLINE_CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(HEADLINE_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != 6:
                    raise ValueError(f"expected 6 fields, got {len(row)}")
                int(row[0])
                asset = row[1].strip()
                if not asset:
                    raise ValueError("empty asset")
                date = _parse_date(row[2])
                time = _parse_time(row[3])
                relevance = float(row[4])
                record = HeadlineRecord(
                    id=len(records), asset=asset, date=date, time=time,
                    text=row[5], relevance=relevance,
                )
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
            if relevance >= min_relevance:
                records.append(record)
    if not records:
        raise ValueError(f"{path}: no qualifying headlines at min_relevance={min_relevance}")
    return records


def load_prices(path: str | Path) -> list[PriceBar]:
    """Read a price CSV; rejects duplicate (asset, date) bars and non-positive prices."""
    path = Path(path)
    bars: list[PriceBar] = []
    seen: set[tuple[str, dt.date]] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PRICE_CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(PRICE_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != 4:
                    raise ValueError(f"expected 4 fields, got {len(row)}")
                bar = PriceBar(
                    asset=row[0].strip(), date=_parse_date(row[1]),
                    open=float(row[2]), close=float(row[3]),
                )
                key = (bar.asset, bar.date)
                if key in seen:
                    raise ValueError(f"duplicate bar for {bar.asset} {bar.date}")
                seen.add(key)
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
            bars.append(bar)
    return bars


def write_headlines_csv(records: list[HeadlineRecord], path: str | Path) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADLINE_CSV_HEADER)
    for r in records:
        writer.writerow(
            [r.id, r.asset, r.date.isoformat(), r.time.strftime("%H:%M"), f"{r.relevance:.1f}", r.text]
        )
    write_text_atomic(path, buf.getvalue())


def write_prices_csv(bars: list[PriceBar], path: str | Path) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PRICE_CSV_HEADER)
    for b in bars:
        writer.writerow([b.asset, b.date.isoformat(), f"{b.open:.6f}", f"{b.close:.6f}"])
    write_text_atomic(path, buf.getvalue())


def _price_index(prices: list[PriceBar]) -> dict[str, list[PriceBar]]:
    by_asset: dict[str, list[PriceBar]] = {}
    for bar in prices:
        by_asset.setdefault(bar.asset, []).append(bar)
    for bars in by_asset.values():
        bars.sort(key=lambda b: b.date)
    return by_asset


def next_trading_day(asset: str, after: dt.date, prices: list[PriceBar]) -> dt.date:
    """Smallest price-bar date for ``asset`` strictly after ``after``."""
    later = [b.date for b in prices if b.asset == asset and b.date > after]
    if not later:
        raise ValueError(f"end of price history: no bar for {asset} after {after}")
    return min(later)


def _label_from_bar(headline: HeadlineRecord, bar: PriceBar) -> LabeledSample:
    ret = (bar.close - bar.open) / bar.open
    if ret > SIGNIFICANT_RETURN:
        tri = TRI_BUY
    elif ret < -SIGNIFICANT_RETURN:
        tri = TRI_AVOID
    else:
        tri = TRI_INCONSEQUENTIAL
    return LabeledSample(
        headline_id=headline.id,
        asset=headline.asset,
        trade_date=bar.date,
        next_day_return=ret,
        binary_label=1 if ret > 0 else 0,
        tri_label=tri,
    )


def label_sample(headline: HeadlineRecord, prices: list[PriceBar]) -> LabeledSample:
    """Label one headline with the next trading day's open-to-close return.

    Binary label 1 means the close exceeded the open (a positive one-day
    return); unchanged or falling prices are class 0. The three-class label
    is 'buy' above +0.5%, 'avoid' below -0.5%, else 'inconsequential'.
    """
    trade_date = next_trading_day(headline.asset, headline.date, prices)
    bar = next(b for b in prices if b.asset == headline.asset and b.date == trade_date)
    return _label_from_bar(headline, bar)


def label_all(
    headlines: list[HeadlineRecord], prices: list[PriceBar]
) -> tuple[dict[int, LabeledSample], list[int]]:
    """Label every headline; returns (labels by id, ids skipped at end of history)."""
    index = _price_index(prices)
    dates_by_asset = {a: [b.date for b in bars] for a, bars in index.items()}
    labels: dict[int, LabeledSample] = {}
    skipped: list[int] = []
    import bisect

    for h in headlines:
        dates = dates_by_asset.get(h.asset, [])
        pos = bisect.bisect_right(dates, h.date)
        if pos == len(dates):
            skipped.append(h.id)
            continue
        labels[h.id] = _label_from_bar(h, index[h.asset][pos])
    return labels, skipped


def _half_hour_bucket(t: dt.time) -> tuple[int, int]:
    return (t.hour, 0 if t.minute < 30 else 30)


def split_half_hourly_unique(
    headlines: list[HeadlineRecord], portfolio: set[str] | frozenset[str]
) -> DatasetSplit:
    """Build the time-uniqueness train/test split over the portfolio assets.

    A headline is time-unique when no other headline for the same asset falls
    in the same half-hour wall-clock bucket (:00/:30 aligned). A date is
    retained for testing only if every portfolio asset has at least one
    time-unique headline on it, which keeps the testing date range identical
    across the portfolio. Test set: time-unique headlines on retained dates.
    Training set: all headlines on non-retained dates. Headlines that share a
    retained date but are not time-unique are dropped entirely, so a same-day
    rewrite of a test event can never appear in training. Headlines for
    assets outside the portfolio are ignored.
    """
    if not portfolio:
        raise ValueError("portfolio must be non-empty")
    scoped = [h for h in headlines if h.asset in portfolio]
    counts: dict[tuple[str, dt.date, tuple[int, int]], int] = {}
    for h in scoped:
        key = (h.asset, h.date, _half_hour_bucket(h.time))
        counts[key] = counts.get(key, 0) + 1

    unique_ids: set[int] = set()
    unique_assets_by_date: dict[dt.date, set[str]] = {}
    for h in scoped:
        if counts[(h.asset, h.date, _half_hour_bucket(h.time))] == 1:
            unique_ids.add(h.id)
            unique_assets_by_date.setdefault(h.date, set()).add(h.asset)

    retained = {d for d, assets in unique_assets_by_date.items() if assets >= set(portfolio)}
    if not retained:
        raise ValueError(
            "no test dates: no date has a half-hourly unique headline for every "
            "portfolio asset; provide more data or a smaller portfolio"
        )
    test_ids = frozenset(h.id for h in scoped if h.date in retained and h.id in unique_ids)
    train_ids = frozenset(h.id for h in scoped if h.date not in retained)
    return DatasetSplit(
        train_ids=train_ids, test_ids=test_ids, test_dates=tuple(sorted(retained))
    )


# --- synthetic corpus ----------------------------------------------------

_BULLISH_PHRASES = (
    "shares surge record profit",
    "earnings beat forecasts strongly",
    "wins major supply contract",
    "raises guidance robust demand",
    "announces buyback dividend boost",
    "posts stellar quarterly growth",
    "upgrade analysts bullish outlook",
    "expands rapidly new markets",
    "revenue jumps customers flock",
    "margin gains cost discipline",
)

_BEARISH_PHRASES = (
    "shares slump weak outlook",
    "earnings miss shrinking sales",
    "loses key customer contract",
    "cuts guidance soft demand",
    "faces probe accounting scandal",
    "posts dismal quarterly slide",
    "downgrade analysts bearish view",
    "retreats struggling core unit",
    "revenue drops churn rises",
    "margin squeeze rising costs",
)

_NEUTRAL_TAILS = (
    "traders react",
    "report says",
    "sources indicate",
    "filing shows",
    "wire update",
    "desk note",
)

# Burst-size distribution for headline arrival: most events are reported by
# more than one outlet inside the same half hour, so most headlines are not
# time-unique and the retained test dates stay a minority of the calendar.
_BURST_SIZES = (1, 2, 3)
_BURST_WEIGHTS = (0.3, 0.4, 0.3)


def _trading_days(start: dt.date, count: int) -> list[dt.date]:
    days: list[dt.date] = []
    d = start
    while len(days) < count:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def generate_synthetic(
    seed: int,
    n_assets: int,
    n_days: int,
    headlines_per_day: int,
    signal_strength: float,
) -> tuple[list[HeadlineRecord], list[PriceBar]]:
    """Generate a deterministic corpus with a tunable headline/price link.

    Each asset-day gets a sentiment family (bullish or bearish); all of that
    day's headlines are drawn from the family's phrase pool. The next trading
    day's close-open sign matches the family with probability exactly
    ``signal_strength``: 1.0 gives perfectly predictable labels, 0.5 makes
    labels independent of the text, and 0.0 inverts the relationship.
    Headlines arrive in bursts sharing one half-hour bucket, so only a
    fraction of them are time-unique.
    """
    if min(n_assets, n_days, headlines_per_day) < 1:
        raise ValueError("n_assets, n_days and headlines_per_day must all be >= 1")
    if not 0.0 <= signal_strength <= 1.0:
        raise ValueError("signal_strength must lie in [0, 1]")

    rng_family = np.random.default_rng(derive_seed(seed, "synthetic-family"))
    rng_agree = np.random.default_rng(derive_seed(seed, "synthetic-agreement"))
    rng_ret = np.random.default_rng(derive_seed(seed, "synthetic-returns"))
    rng_time = np.random.default_rng(derive_seed(seed, "synthetic-times"))
    rng_text = np.random.default_rng(derive_seed(seed, "synthetic-text"))
    rng_price = np.random.default_rng(derive_seed(seed, "synthetic-prices"))

    assets = [f"SYN{i}" for i in range(n_assets)]
    days = _trading_days(dt.date(2015, 1, 5), n_days + 1)
    headline_days = days[:n_days]

    # Day d's family drives the sign of bar d+1; bar 0 is unconditioned
    # noise. Signs are an exactly balanced shuffled array per asset and the
    # family/sign agreement holds with exact frequency signal_strength, so
    # label balance and agreement rate carry no sampling noise.
    signs = np.empty((n_assets, n_days))
    agree = np.empty((n_assets, n_days), dtype=bool)
    for ai in range(n_assets):
        sign_row = np.array([1.0] * ((n_days + 1) // 2) + [-1.0] * (n_days // 2))
        rng_family.shuffle(sign_row)
        signs[ai] = sign_row
        n_agree = int(round(signal_strength * n_days))
        agree_row = np.array([True] * n_agree + [False] * (n_days - n_agree))
        rng_agree.shuffle(agree_row)
        agree[ai] = agree_row
    family_bullish = np.where(agree, signs > 0, signs < 0)
    magnitudes = rng_ret.uniform(0.001, 0.03, size=(n_assets, n_days + 1))

    prices: list[PriceBar] = []
    for ai, asset in enumerate(assets):
        open_price = float(rng_price.uniform(20.0, 200.0))
        for di, day in enumerate(days):
            if di == 0:
                direction = 1.0 if rng_price.random() < 0.5 else -1.0
            else:
                direction = signs[ai, di - 1]
            ret = direction * magnitudes[ai, di]
            close_price = open_price * (1.0 + ret)
            prices.append(PriceBar(asset=asset, date=day, open=open_price, close=close_price))
            gap = float(rng_price.uniform(-0.002, 0.002))
            open_price = close_price * (1.0 + gap)

    buckets = [(h, mm) for h in range(9, 16) for mm in (0, 30)]
    raw: list[tuple[dt.date, dt.time, str, str]] = []
    for ai, asset in enumerate(assets):
        name = asset.lower()
        for di, day in enumerate(headline_days):
            phrases = _BULLISH_PHRASES if family_bullish[ai, di] else _BEARISH_PHRASES
            remaining = headlines_per_day
            while remaining > 0:
                size = min(int(rng_time.choice(_BURST_SIZES, p=_BURST_WEIGHTS)), remaining)
                hour, base_minute = buckets[int(rng_time.integers(len(buckets)))]
                minutes = rng_time.choice(30, size=size, replace=False)
                for minute in sorted(int(x) for x in minutes):
                    phrase = phrases[int(rng_text.integers(len(phrases)))]
                    text = f"{name} {phrase}"
                    if rng_text.random() < 0.5:
                        text += f" {_NEUTRAL_TAILS[int(rng_text.integers(len(_NEUTRAL_TAILS)))]}"
                    raw.append((day, dt.time(hour, base_minute + minute), asset, text))
                remaining -= size

    raw.sort(key=lambda item: (item[0], item[1], item[2], item[3]))
    headlines = [
        HeadlineRecord(id=i, asset=asset, date=day, time=t, text=text, relevance=1.0)
        for i, (day, t, asset, text) in enumerate(raw)
    ]
    return headlines, prices
