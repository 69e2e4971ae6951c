"""Event ingestion, window aggregation and dataset construction.

Builds the basic (mean, median, max, min), alpha/beta-augmented and
zero-variance-augmented datasets from per-event price snapshots, plus the
digits datasets and a synthetic event generator.
"""

from __future__ import annotations

import configparser
import csv
import datetime as dt
import itertools
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .scaled_beta import (
    EstimationError,
    ScaledBetaParams,
    SummaryStats,
    beta_mean,
    beta_median_approx,
    estimate_from_stats,
)

log = logging.getLogger(__name__)

SNAPSHOT_HEADER = [
    "artist",
    "event_id",
    "snapshot_date",
    "mean_price",
    "median_price",
    "low_price",
    "high_price",
    "listing_count",
]
BASIC_FEATURES = ["mean", "median", "max", "min"]
ALPHA_BETA_FEATURES = BASIC_FEATURES + ["alpha", "beta"]
VARIANTS = ("basic", "alpha_beta", "alpha_beta_reg", "delta", "delta_reg")
SENTINEL_SHAPES = (0.0, 0.0)


class SchemaError(ValueError):
    """Input file does not follow the expected layout."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True)
class EventSnapshot:
    artist_label: str
    event_id: str
    snapshot_date: dt.date
    mean_price: float
    median_price: float
    low_price: float
    high_price: float
    listing_count: int = 0

    def validate(self) -> None:
        lo, hi = self.low_price, self.high_price
        if lo > hi:
            raise ValueError(f"low {lo} > high {hi}")
        if not lo <= self.median_price <= hi:
            raise ValueError(f"median {self.median_price} outside [{lo}, {hi}]")
        if not lo <= self.mean_price <= hi:
            raise ValueError(f"mean {self.mean_price} outside [{lo}, {hi}]")
        if self.listing_count < 0:
            raise ValueError("negative listing_count")


@dataclass(frozen=True)
class EventSeries:
    event_id: str
    artist_label: str
    snapshots: tuple[EventSnapshot, ...]

    def __post_init__(self):
        if not self.snapshots:
            raise ValueError(f"event {self.event_id} has no snapshots")
        dates = [s.snapshot_date for s in self.snapshots]
        if any(a >= b for a, b in zip(dates, dates[1:])):
            raise ValueError(f"event {self.event_id}: snapshot dates not strictly increasing")


@dataclass
class LoadResult:
    series: list[EventSeries]
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def by_artist(self) -> dict[str, list[EventSeries]]:
        return group_by_artist(self.series)


def group_by_artist(series: Iterable[EventSeries]) -> dict[str, list[EventSeries]]:
    out: dict[str, list[EventSeries]] = {}
    for s in series:
        out.setdefault(s.artist_label, []).append(s)
    return out


def load_event_csv(path) -> LoadResult:
    """Read a snapshot CSV, group rows into per-event series sorted by date.

    Rows that parse but violate the price ordering, or carry a duplicate date,
    are rejected and tallied with their line number; a bad header or a row
    with the wrong field count raises :class:`SchemaError`.
    """
    path = Path(path)
    rows: dict[str, list[EventSnapshot]] = {}
    rejected: list[tuple[int, str]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(path, 1, "missing header")
        if [h.strip() for h in header] != SNAPSHOT_HEADER:
            raise SchemaError(path, 1, f"expected header {','.join(SNAPSHOT_HEADER)}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(SNAPSHOT_HEADER):
                raise SchemaError(path, lineno, f"expected {len(SNAPSHOT_HEADER)} fields, got {len(rec)}")
            try:
                snap = EventSnapshot(
                    artist_label=rec[0].strip(),
                    event_id=rec[1].strip(),
                    snapshot_date=dt.date.fromisoformat(rec[2].strip()),
                    mean_price=float(rec[3]),
                    median_price=float(rec[4]),
                    low_price=float(rec[5]),
                    high_price=float(rec[6]),
                    listing_count=int(rec[7]),
                )
                snap.validate()
            except ValueError as exc:
                rejected.append((lineno, str(exc)))
                continue
            rows.setdefault(snap.event_id, []).append(snap)

    series = []
    for event_id in sorted(rows):
        snaps = sorted(rows[event_id], key=lambda s: s.snapshot_date)
        kept = [snaps[0]]
        for s in snaps[1:]:
            if s.snapshot_date == kept[-1].snapshot_date:
                rejected.append((-1, f"event {event_id}: duplicate date {s.snapshot_date}"))
                continue
            kept.append(s)
        artists = {s.artist_label for s in kept}
        if len(artists) != 1:
            rejected.append((-1, f"event {event_id}: multiple artists {sorted(artists)}"))
            continue
        series.append(EventSeries(event_id, kept[0].artist_label, tuple(kept)))
    if rejected:
        log.warning("%s: %d rows rejected", path, len(rejected))
    return LoadResult(series, rejected)


def write_event_csv(series: Iterable[EventSeries], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNAPSHOT_HEADER)
        for ev in series:
            for s in ev.snapshots:
                w.writerow([
                    s.artist_label, s.event_id, s.snapshot_date.isoformat(),
                    repr(float(s.mean_price)), repr(float(s.median_price)),
                    repr(float(s.low_price)), repr(float(s.high_price)), int(s.listing_count),
                ])


def aggregate_window(series: EventSeries, last_days: int | None = None) -> SummaryStats:
    """Average each summary field over the window of snapshots.

    ``last_days=None`` uses the full lifecycle; ``last_days=k`` keeps snapshots
    dated within k days of the final one (k=1 is the final day only).
    """
    snaps = series.snapshots
    if last_days is not None:
        if last_days < 1:
            raise ValueError("last_days must be >= 1")
        cutoff = snaps[-1].snapshot_date - dt.timedelta(days=last_days - 1)
        snaps = tuple(s for s in snaps if s.snapshot_date >= cutoff)
    if not snaps:
        raise ValueError(f"event {series.event_id}: empty window")
    k = len(snaps)
    return SummaryStats(
        min_price=sum(s.low_price for s in snaps) / k,
        max_price=sum(s.high_price for s in snaps) / k,
        mean_price=sum(s.mean_price for s in snaps) / k,
        median_price=sum(s.median_price for s in snaps) / k,
    )


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix, binary labels and bookkeeping for one dataset variant.

    ``stats`` keeps the per-row source statistics for the ticket variants so
    the alpha/beta columns can be derived later; ``flags`` marks rows whose
    shapes were imputed.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    variant: str
    n_informative: int
    n_zero_variance: int = 0
    row_ids: tuple[str, ...] = ()
    stats: tuple[SummaryStats, ...] = ()
    flags: tuple[bool, ...] = ()
    labels: tuple[str, str] = ("0", "1")
    notes: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("X must be 2-D with one row per label")
        if X.shape[1] != len(self.feature_names):
            raise ValueError("feature_names length does not match width")
        if X.shape[1] != self.n_informative + self.n_zero_variance:
            raise ValueError("width must equal n_informative + n_zero_variance")
        if not set(np.unique(y)) <= {0, 1}:
            raise ValueError("labels must be 0/1")
        if len(np.unique(y)) != 2:
            raise ValueError("both labels must be present")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        """Row subset without the both-labels check (used for test splits)."""
        idx = np.asarray(idx)
        obj = object.__new__(LabeledDataset)
        vals = dict(self.__dict__)
        vals["X"] = self.X[idx]
        vals["y"] = self.y[idx]
        if self.row_ids:
            vals["row_ids"] = tuple(self.row_ids[i] for i in idx)
        if self.stats:
            vals["stats"] = tuple(self.stats[i] for i in idx)
        if self.flags:
            vals["flags"] = tuple(self.flags[i] for i in idx)
        obj.__dict__.update(vals)
        return obj


def build_basic(
    events: Mapping[str, Sequence[EventSeries]],
    pair: tuple[str, str],
    last_days: int | None = None,
) -> LabeledDataset:
    """One row per event: [mean, median, max, min]; label 0 for pair[0]."""
    rows, labels, ids, stats = [], [], [], []
    dropped = 0
    for label, artist in enumerate(pair):
        evs = events.get(artist, [])
        if not evs:
            raise ValueError(f"artist {artist!r} has no events")
        for ev in evs:
            st = aggregate_window(ev, last_days)
            if st.is_degenerate:
                dropped += 1
                continue
            rows.append([st.mean_price, st.median_price, st.max_price, st.min_price])
            labels.append(label)
            ids.append(ev.event_id)
            stats.append(st)
    if dropped:
        log.info("build_basic %s: dropped %d zero-range events", pair, dropped)
    return LabeledDataset(
        X=np.array(rows, dtype=np.float64).reshape(len(rows), 4),
        y=np.array(labels),
        feature_names=tuple(BASIC_FEATURES),
        variant="basic",
        n_informative=4,
        row_ids=tuple(ids),
        stats=tuple(stats),
        labels=(str(pair[0]), str(pair[1])),
        notes={"dropped_zero_range": dropped},
    )


def build_alpha_beta(basic: LabeledDataset, policy: str = "sentinel") -> LabeledDataset:
    """Append estimated (alpha, beta) columns.

    ``policy='sentinel'`` writes (0, 0) for rows the estimator rejects, so row
    sets stay paired with the basic variant; ``policy='drop'`` removes them.
    """
    if policy not in ("sentinel", "drop"):
        raise ValueError(f"unknown imputation policy {policy!r}")
    if len(basic.stats) != basic.n_rows:
        raise ValueError("source dataset carries no per-row summary stats")
    shapes, flags = [], []
    for st in basic.stats:
        try:
            p = estimate_from_stats(st)
            shapes.append((p.alpha, p.beta))
            flags.append(False)
        except EstimationError:
            shapes.append(SENTINEL_SHAPES)
            flags.append(True)
    X = np.hstack([basic.X, np.array(shapes, dtype=np.float64).reshape(-1, 2)])
    n_imputed = sum(flags)
    ds = LabeledDataset(
        X=X,
        y=basic.y,
        feature_names=tuple(ALPHA_BETA_FEATURES),
        variant="alpha_beta",
        n_informative=6,
        row_ids=basic.row_ids,
        stats=basic.stats,
        flags=tuple(flags),
        labels=basic.labels,
        notes={**basic.notes, "imputed_shapes": n_imputed},
    )
    if policy == "drop" and n_imputed:
        keep = np.flatnonzero(~np.array(flags))
        ds = ds.subset(keep)
        ds = replace(ds, notes={**ds.notes, "dropped_imputed": n_imputed})
    return ds


def augment_zero_variance(ds: LabeledDataset, n_zv: int, fill: float = 1.0) -> LabeledDataset:
    """Append ``n_zv`` constant columns of value ``fill``."""
    if n_zv < 0:
        raise ValueError("n_zv must be non-negative")
    if n_zv == 0:
        return ds
    start = ds.n_zero_variance
    const = np.full((ds.n_rows, n_zv), float(fill))
    names = tuple(f"zv_{start + i}" for i in range(n_zv))
    variant = {"alpha_beta": "alpha_beta_reg", "delta": "delta_reg"}.get(ds.variant, ds.variant)
    return replace(
        ds,
        X=np.hstack([ds.X, const]),
        feature_names=ds.feature_names + names,
        variant=variant,
        n_zero_variance=ds.n_zero_variance + n_zv,
    )


# -- digits -----------------------------------------------------------------


@dataclass(frozen=True)
class DigitsSource:
    """Pixel matrix restricted to a seeded column subset, with class labels."""

    pixels: np.ndarray  # (rows, 64) integer pixel intensities
    classes: np.ndarray
    columns: tuple[int, ...]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f"px{c}" for c in self.columns)

    def pairs(self, ordered: bool = False) -> list[tuple[int, int]]:
        labels = sorted(int(c) for c in np.unique(self.classes))
        if ordered:
            return list(itertools.permutations(labels, 2))
        return list(itertools.combinations(labels, 2))

    def pair_dataset(self, a: int, b: int) -> LabeledDataset:
        mask = (self.classes == a) | (self.classes == b)
        X = self.pixels[mask][:, list(self.columns)].astype(np.float64)
        y = (self.classes[mask] == b).astype(np.int64)
        return LabeledDataset(
            X=X,
            y=y,
            feature_names=self.feature_names,
            variant="delta",
            n_informative=len(self.columns),
            row_ids=tuple(str(i) for i in np.flatnonzero(mask)),
            labels=(str(a), str(b)),
        )


def select_columns(subset_size: int, subset_seed: int, n_columns: int = 64) -> tuple[int, ...]:
    if not 1 <= subset_size <= n_columns:
        raise ValueError(f"subset_size must be in [1, {n_columns}], got {subset_size}")
    if subset_size == n_columns:
        return tuple(range(n_columns))
    rng = np.random.default_rng(subset_seed)
    return tuple(sorted(int(c) for c in rng.choice(n_columns, size=subset_size, replace=False)))


def load_digits(path, subset_size: int = 6, subset_seed: int = 42) -> DigitsSource:
    """Read the optical-digits CSV (64 pixels + class per line, optional header)."""
    path = Path(path)
    pixels, classes = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != 65:
                raise SchemaError(path, lineno, f"expected 65 fields, got {len(rec)}")
            try:
                vals = [int(v) for v in rec]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise SchemaError(path, lineno, "non-integer field") from None
            if not all(0 <= v <= 16 for v in vals[:64]) or not 0 <= vals[64] <= 9:
                raise SchemaError(path, lineno, "pixel outside 0..16 or class outside 0..9")
            pixels.append(vals[:64])
            classes.append(vals[64])
    if not pixels:
        raise SchemaError(path, 1, "no data rows")
    cols = select_columns(subset_size, subset_seed)
    return DigitsSource(np.array(pixels, dtype=np.int64), np.array(classes, dtype=np.int64), cols)


def write_bundled_digits(path) -> Path:
    """Write the UCI handwritten digits copy shipped with scikit-learn as CSV."""
    from sklearn.datasets import load_digits as _sk_digits

    d = _sk_digits()
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row, target in zip(d.data.astype(int), d.target):
            w.writerow(list(row) + [int(target)])
    return path


# -- synthetic ticket events ------------------------------------------------


@dataclass(frozen=True)
class ArtistProfile:
    """Prior ranges for one synthetic artist; shapes and support drawn uniformly."""

    name: str
    alpha_range: tuple[float, float]
    beta_range: tuple[float, float]
    min_price_range: tuple[float, float] = (20.0, 80.0)
    width_range: tuple[float, float] = (50.0, 300.0)
    events_per_artist: int = 40
    snapshots_range: tuple[int, int] = (3, 12)

    def __post_init__(self):
        for name in ("alpha_range", "beta_range", "min_price_range", "width_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"{self.name}: {name} must satisfy 0 < lo <= hi")
        if self.events_per_artist < 1:
            raise ValueError("events_per_artist must be >= 1")
        lo, hi = self.snapshots_range
        if not 1 <= lo <= hi:
            raise ValueError("snapshots_range must satisfy 1 <= lo <= hi")


@dataclass
class SyntheticCorpus:
    series: list[EventSeries]
    truth: dict[str, ScaledBetaParams]

    def by_artist(self) -> dict[str, list[EventSeries]]:
        return group_by_artist(self.series)


def _draw(rng: np.random.Generator, rng_range: tuple[float, float]) -> float:
    lo, hi = rng_range
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def synth_generate(
    profiles: Sequence[ArtistProfile],
    seed: int,
    noise: float = 0.0,
    start: dt.date = dt.date(2023, 5, 1),
) -> SyntheticCorpus:
    """Generate snapshot series whose window averages equal the analytic stats.

    Each event's full-window mean/median equal the scaled-Beta mean and the
    approximate median of its drawn ground-truth shapes. ``noise`` adds Gaussian
    jitter (sd in scaled units) to the scaled mean and median before emission.
    Snapshots wobble around the target by symmetric price shifts so their
    average reproduces it.
    """
    if len(profiles) < 2:
        raise ValueError("need at least two artist profiles")
    root = np.random.SeedSequence(seed)
    series, truth = [], {}
    for p_idx, (prof, child) in enumerate(zip(profiles, root.spawn(len(profiles)))):
        rng = np.random.default_rng(child)
        for e in range(prof.events_per_artist):
            alpha = _draw(rng, prof.alpha_range)
            beta = _draw(rng, prof.beta_range)
            lo = round(_draw(rng, prof.min_price_range), 2)
            width = round(_draw(rng, prof.width_range), 2)
            params = ScaledBetaParams(alpha, beta, lo, lo + width)
            hi = params.support_max
            width = params.width
            mean, median = beta_mean(params), beta_median_approx(params)
            if noise > 0:
                s = (mean - lo) / width + rng.normal(0.0, noise)
                q = (median - lo) / width + rng.normal(0.0, noise)
                s, q = (float(np.clip(v, 1e-3, 1 - 1e-3)) for v in (s, q))
                mean, median = lo + s * width, lo + q * width
            event_id = f"{prof.name}-{e:04d}"
            truth[event_id] = params
            k = int(rng.integers(prof.snapshots_range[0], prof.snapshots_range[1] + 1))
            half = rng.uniform(0.0, 0.05 * width, size=k // 2)
            shifts = np.concatenate([half, -half, np.zeros(k % 2)])
            day0 = start + dt.timedelta(days=int(rng.integers(0, 300)))
            snaps = tuple(
                EventSnapshot(
                    artist_label=prof.name,
                    event_id=event_id,
                    snapshot_date=day0 + dt.timedelta(days=t),
                    mean_price=mean + d,
                    median_price=median + d,
                    low_price=lo + d,
                    high_price=hi + d,
                    listing_count=int(rng.integers(5, 500)),
                )
                for t, d in enumerate(shifts)
            )
            series.append(EventSeries(event_id, prof.name, snaps))
    return SyntheticCorpus(series, truth)


def _parse_range(text: str, cast=float) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise ValueError(f"expected 'lo, hi', got {text!r}")
    return tuple(cast(p) for p in parts)


def load_profiles(path) -> list[ArtistProfile]:
    """Read artist profiles from an INI file, one section per artist.

    Keys: ``alpha``, ``beta``, ``min_price``, ``width`` (each ``lo, hi``),
    ``events`` and ``snapshots`` (``lo, hi``).
    """
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise FileNotFoundError(path)
    out = []
    for name in cp.sections():
        sec = cp[name]
        kwargs = {
            "alpha_range": _parse_range(sec["alpha"]),
            "beta_range": _parse_range(sec["beta"]),
        }
        if "min_price" in sec:
            kwargs["min_price_range"] = _parse_range(sec["min_price"])
        if "width" in sec:
            kwargs["width_range"] = _parse_range(sec["width"])
        if "events" in sec:
            kwargs["events_per_artist"] = int(sec["events"])
        if "snapshots" in sec:
            kwargs["snapshots_range"] = _parse_range(sec["snapshots"], int)
        unknown = set(sec) - {"alpha", "beta", "min_price", "width", "events", "snapshots"}
        if unknown:
            raise ValueError(f"[{name}]: unknown keys {sorted(unknown)}")
        out.append(ArtistProfile(name=name, **kwargs))
    return out


def matched_profile_pair(
    index: int,
    seed: int,
    events_per_artist: int = 40,
) -> tuple[ArtistProfile, ArtistProfile]:
    """Two profiles with identical support and mean-ratio priors.

    The second artist's alpha and beta ranges are the first's scaled by a
    common factor, so alpha/(alpha+beta) has the same prior for both while
    the shape concentration differs.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    a_lo = float(rng.uniform(1.2, 3.0))
    b_lo = float(rng.uniform(2.0, 6.0))
    spread = float(rng.uniform(1.5, 2.5))
    factor = float(rng.uniform(1.5, 3.0))
    base = ArtistProfile(
        name=f"p{index:03d}a",
        alpha_range=(a_lo, a_lo * spread),
        beta_range=(b_lo, b_lo * spread),
        events_per_artist=events_per_artist,
    )
    other = replace(
        base,
        name=f"p{index:03d}b",
        alpha_range=(a_lo * factor, a_lo * spread * factor),
        beta_range=(b_lo * factor, b_lo * spread * factor),
    )
    return base, other
