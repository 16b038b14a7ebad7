"""Supervised and unsupervised discretization of interval predictors.

Bins are right-closed: with cuts ``c_1 < ... < c_{k-1}`` bin 0 is
``(-inf, c_1]``, bin ``j`` is ``(c_j, c_{j+1}]`` and the last bin is
``(c_{k-1}, inf)``. An optional missing bin always comes last.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from imbcredit.errors import DataError

logger = logging.getLogger(__name__)

METHODS = ("distance", "quantile", "gini", "optimal")
SCHEMES_FORMAT = "imbcredit.schemes/1"


@dataclass(frozen=True)
class BinStats:
    count: int
    events: int
    woe: float

    @property
    def non_events(self) -> int:
        return self.count - self.events

    @property
    def event_rate(self) -> float:
        return self.events / self.count if self.count else float("nan")


def smoothed_shares(counts, events) -> tuple[np.ndarray, np.ndarray]:
    """Non-event shares p_j and event shares q_j.

    When any bin has zero events or zero non-events, 0.5 is added to every
    bin's event and non-event counts so all logs stay finite.
    """
    counts = np.asarray(counts, dtype=np.float64)
    ev = np.asarray(events, dtype=np.float64)
    ne = counts - ev
    if (ev == 0).any() or (ne == 0).any():
        ev = ev + 0.5
        ne = ne + 0.5
    return ne / ne.sum(), ev / ev.sum()


def weight_of_evidence(counts, events) -> np.ndarray:
    counts = np.asarray(counts)
    events = np.asarray(events)
    if events.sum() == 0 or (counts - events).sum() == 0:
        return np.full(len(counts), np.nan)
    p, q = smoothed_shares(counts, events)
    return np.log(p / q)


@dataclass(frozen=True)
class BinningScheme:
    variable: str
    method: str
    cuts: tuple[float, ...]
    bins: tuple[BinStats, ...]
    has_missing_bin: bool = False
    usable: bool = True

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cuts)
        object.__setattr__(self, "cuts", cuts)
        object.__setattr__(self, "bins", tuple(self.bins))
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError(f"{self.variable}: cuts must be strictly increasing")
        if len(self.bins) != self.n_value_bins + self.has_missing_bin:
            raise ValueError(f"{self.variable}: {len(self.bins)} bins do not match {len(cuts)} cuts")

    @classmethod
    def from_counts(cls, variable, method, cuts, counts, events,
                    has_missing_bin=False, usable=True) -> "BinningScheme":
        woe = weight_of_evidence(counts, events)
        bins = tuple(BinStats(int(n), int(e), float(w)) for n, e, w in zip(counts, events, woe))
        return cls(variable, method, tuple(cuts), bins, has_missing_bin, usable)

    @property
    def n_value_bins(self) -> int:
        return len(self.cuts) + 1

    @property
    def n_bins(self) -> int:
        return len(self.bins)

    @property
    def counts(self) -> np.ndarray:
        return np.array([b.count for b in self.bins], dtype=np.int64)

    @property
    def events(self) -> np.ndarray:
        return np.array([b.events for b in self.bins], dtype=np.int64)

    @property
    def woe(self) -> np.ndarray:
        return np.array([b.woe for b in self.bins])

    def bin_labels(self) -> list[str]:
        edges = [-math.inf, *self.cuts, math.inf]
        labels = [f"({lo:g}, {hi:g}]" for lo, hi in zip(edges[:-1], edges[1:])]
        labels[-1] = labels[-1][:-1] + ")"
        if self.has_missing_bin:
            labels.append("missing")
        return labels

    def assign(self, values) -> np.ndarray:
        """Vectorized :func:`assign_bin`."""
        v = np.asarray(values, dtype=np.float64)
        out = np.searchsorted(np.asarray(self.cuts), v, side="left")
        miss = np.isnan(v)
        if miss.any():
            if not self.has_missing_bin:
                raise DataError(
                    f"{self.variable}: missing value but the scheme has no missing bin"
                )
            out[miss] = self.n_value_bins
        return out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "bin": range(self.n_bins),
                "label": self.bin_labels(),
                "count": self.counts,
                "events": self.events,
                "event_rate": [b.event_rate for b in self.bins],
                "woe": self.woe,
            }
        )

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "method": self.method,
            "cuts": list(self.cuts),
            "has_missing_bin": self.has_missing_bin,
            "usable": self.usable,
            "bins": [{"count": b.count, "events": b.events, "woe": b.woe} for b in self.bins],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "BinningScheme":
        return cls(
            doc["variable"],
            doc["method"],
            tuple(doc["cuts"]),
            tuple(BinStats(int(b["count"]), int(b["events"]), float(b["woe"])) for b in doc["bins"]),
            bool(doc["has_missing_bin"]),
            bool(doc.get("usable", True)),
        )


def assign_bin(scheme: BinningScheme, value) -> int:
    """Index of the bin holding ``value``; NaN goes to the missing bin."""
    return int(scheme.assign(np.array([value], dtype=np.float64))[0])


# -- percentile ranks ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PercentileRanks:
    """Merged percentile ranks of one column.

    ``assignment`` maps every input row to a row of ``table`` (-1 for
    missing). ``table`` has one row per non-empty rank with the span of
    original rank numbers it covers.
    """

    assignment: np.ndarray
    table: pd.DataFrame
    constant: bool = False

    @property
    def cuts(self) -> np.ndarray:
        """Upper value of every rank but the last: right-closed cut points."""
        return self.table["max"].to_numpy()[:-1]


def percentile_rank(x, n_ranks: int = 100, y=None) -> PercentileRanks:
    """Group non-missing values into at most ``n_ranks`` equal-frequency ranks.

    Rank of a value is ``floor(r * n_ranks / (n + 1))`` where ``r`` is its
    1-based position with ties given the highest position, so equal values
    always share a rank. Ranks left empty by ties are folded into the next
    non-empty one, and the table records the folded span (e.g. ranks 1-8).
    """
    if n_ranks < 1:
        raise ValueError("n_ranks must be positive")
    x = np.asarray(x, dtype=np.float64)
    ok = ~np.isnan(x)
    v = x[ok]
    n = len(v)
    if n == 0:
        raise DataError("all values are missing")
    r = stats.rankdata(v, method="max")
    group = np.floor(r * n_ranks / (n + 1)).astype(np.int64)
    present, idx = np.unique(group, return_inverse=True)
    m = len(present)
    count = np.bincount(idx, minlength=m)
    table = pd.DataFrame(
        {
            "rank": present + 1,
            "first_rank": np.concatenate([[1], present[:-1] + 2]),
            "min": pd.Series(v).groupby(idx).min().to_numpy(),
            "max": pd.Series(v).groupby(idx).max().to_numpy(),
            "mean": np.bincount(idx, weights=v, minlength=m) / count,
            "count": count,
        }
    )
    if y is not None:
        yv = np.asarray(y)[ok]
        table["events"] = np.bincount(idx, weights=yv, minlength=m).astype(np.int64)
    assignment = np.full(len(x), -1, dtype=np.int64)
    assignment[ok] = idx
    constant = m == 1 and table["min"].iloc[0] == table["max"].iloc[0]
    if constant:
        logger.warning("constant column: a single rank is returned")
    return PercentileRanks(assignment, table, bool(constant))


# -- discretizers -------------------------------------------------------------

@dataclass
class _Distinct:
    """Column collapsed to its distinct values with per-value counts."""

    values: np.ndarray
    count: np.ndarray
    events: np.ndarray

    @classmethod
    def of(cls, v, y):
        u, inv = np.unique(v, return_inverse=True)
        return cls(u, np.bincount(inv, minlength=len(u)).astype(np.float64),
                   np.bincount(inv, weights=y, minlength=len(u)))

    def bin_totals(self, ends: Sequence[int]):
        """Counts and events for bins ending at distinct-value positions ``ends``."""
        c = np.add.reduceat(self.count, np.r_[0, np.asarray(ends[:-1]) + 1].astype(int))
        e = np.add.reduceat(self.events, np.r_[0, np.asarray(ends[:-1]) + 1].astype(int))
        return c, e


def _distance_bounds(d: _Distinct, max_bins: int):
    lo, hi = d.values[0], d.values[-1]
    edges = lo + (hi - lo) * np.arange(1, max_bins) / max_bins
    last = np.searchsorted(d.values, edges, side="right") - 1
    bounds = {}
    for pos, edge in zip(last, edges):
        # empty bins vanish: keep one edge per distinct boundary position
        if 0 <= pos < len(d.values) - 1 and pos not in bounds:
            bounds[int(pos)] = float(edge)
    return sorted(bounds.items())


def _quantile_bounds(d: _Distinct, v, max_bins: int):
    ranks = percentile_rank(v, max_bins)
    cuts = ranks.cuts
    pos = np.searchsorted(d.values, cuts, side="left")
    return [(int(p), float(c)) for p, c in zip(pos, cuts)]


def _gini_gain(n, e, nl, el):
    nr, er = n - nl, e - el

    def impurity_mass(k, ev):
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(k > 0, ev / k, 0.0)
        return k * 2.0 * p * (1.0 - p)

    return impurity_mass(n, e) - impurity_mass(nl, el) - impurity_mass(nr, er)


def chi2_2x2(nl, el, nr, er):
    """Pearson chi-square of the 2x2 table (left/right x event/non-event)."""
    nl, el, nr, er = (np.asarray(a, dtype=np.float64) for a in (nl, el, nr, er))
    n = nl + nr
    e = el + er
    a, b = el, nl - el
    c, d = er, nr - er
    denom = nl * nr * e * (n - e)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(denom > 0, n * (a * d - b * c) ** 2 / denom, 0.0)
    return stat


def _best_split(d: _Distinct, lo: int, hi: int, min_size: float, criterion: str):
    """Best cut inside distinct positions lo..hi (cut after position i)."""
    if hi <= lo:
        return None
    c = np.cumsum(d.count[lo:hi + 1])
    e = np.cumsum(d.events[lo:hi + 1])
    n, ev = c[-1], e[-1]
    nl, el = c[:-1], e[:-1]
    feasible = (nl >= min_size) & (n - nl >= min_size)
    if not feasible.any():
        return None
    if criterion == "gini":
        score = _gini_gain(n, ev, nl, el)
    else:
        score = chi2_2x2(nl, el, n - nl, ev - el)
    score = np.where(feasible, score, -np.inf)
    i = int(np.argmax(score))
    return lo + i, float(score[i])


def _recursive_bounds(d: _Distinct, max_bins: int, min_size: float, criterion: str,
                      alpha: float):
    """Best-first recursive partitioning over distinct values."""
    leaves = [(0, len(d.values) - 1)]
    cuts: list[int] = []

    def candidate(leaf):
        found = _best_split(d, *leaf, min_size, criterion)
        if found is None:
            return None
        pos, score = found
        if criterion == "gini":
            scale = max(d.count[leaf[0]:leaf[1] + 1].sum(), 1.0)
            if score <= 1e-12 * scale:
                return None
        elif stats.chi2.sf(score, 1) > alpha:
            return None
        return pos, score

    pending = {leaf: candidate(leaf) for leaf in leaves}
    while len(leaves) < max_bins:
        options = [(c[1], leaf, c[0]) for leaf, c in pending.items() if c is not None]
        if not options:
            break
        _, leaf, pos = max(options, key=lambda t: (t[0], -t[1][0]))
        del pending[leaf]
        leaves.remove(leaf)
        for child in ((leaf[0], pos), (pos + 1, leaf[1])):
            leaves.append(child)
            pending[child] = candidate(child)
        cuts.append(pos)
    return [(p, float(d.values[p])) for p in sorted(cuts)]


def _enforce_min_size(d: _Distinct, bounds, min_size: float):
    """Fold bins smaller than ``min_size`` into the neighbour with the closer event rate."""
    bounds = list(bounds)
    while bounds:
        ends = [p for p, _ in bounds] + [len(d.values) - 1]
        c, e = d.bin_totals(ends)
        j = int(np.argmin(c))
        if c[j] >= min_size:
            break
        rate = e / c
        if j == 0:
            drop = 0
        elif j == len(c) - 1:
            drop = j - 1
        else:
            left_gap = abs(rate[j] - rate[j - 1])
            right_gap = abs(rate[j] - rate[j + 1])
            drop = j - 1 if left_gap <= right_gap else j
        del bounds[drop]
    return bounds


def discretize(x, y, method: str = "quantile", max_bins: int = 20, *,
               min_bin_fraction: float = 0.005, alpha: float = 0.05,
               variable: str = "x") -> BinningScheme:
    """Bin the non-missing values of ``x`` against binary target ``y``.

    ``distance`` cuts ``[min, max]`` into equal widths, ``quantile`` uses
    :func:`percentile_rank` with ``max_bins`` ranks, ``gini`` grows a
    best-first tree on weighted Gini impurity and ``optimal`` grows one on
    the 2x2 chi-square statistic, refusing splits with p-value above
    ``alpha``. Bins holding fewer than ``min_bin_fraction`` of the rows are
    folded into a neighbour. Missing values are ignored here; see
    :func:`add_missing_bin`.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if max_bins < 2:
        raise ValueError("max_bins must be at least 2")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if not np.isin(y, (0, 1)).all():
        raise DataError("target must be binary")
    ok = ~np.isnan(x)
    v, yv = x[ok], y[ok].astype(np.float64)
    if len(v) == 0:
        raise DataError(f"{variable}: all values are missing")
    d = _Distinct.of(v, yv)
    if len(d.values) == 1:
        logger.warning("%s: constant column, scheme flagged unusable", variable)
        return BinningScheme.from_counts(variable, method, (), [len(v)], [int(yv.sum())],
                                         usable=False)
    min_size = min_bin_fraction * len(v)
    if method == "distance":
        bounds = _distance_bounds(d, max_bins)
    elif method == "quantile":
        bounds = _quantile_bounds(d, v, max_bins)
    else:
        bounds = _recursive_bounds(d, max_bins, min_size, method, alpha)
    bounds = _enforce_min_size(d, bounds, min_size)
    ends = [p for p, _ in bounds] + [len(d.values) - 1]
    c, e = d.bin_totals(ends)
    scheme = BinningScheme.from_counts(
        variable, method, [cut for _, cut in bounds], c.astype(np.int64),
        np.rint(e).astype(np.int64),
    )
    return scheme


def two_proportion_z(n1, e1, n2, e2) -> float:
    """Pooled two-sample z statistic for a difference in event rates."""
    n = n1 + n2
    p = (e1 + e2) / n
    se = math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2)) if 0 < p < 1 else 0.0
    if se == 0.0:
        return 0.0
    return (e1 / n1 - e2 / n2) / se


def merge_weak_bins(s: BinningScheme, alpha: float = 0.05) -> BinningScheme:
    """Merge adjacent bins whose event rates do not differ significantly.

    The adjacent pair with the smallest |z| is merged first; merging stops
    once every adjacent pair is significant at ``alpha`` (two-sided) or
    two value bins remain. The missing bin is never touched.
    """
    k = s.n_value_bins
    counts = list(s.counts[:k])
    events = list(s.events[:k])
    cuts = list(s.cuts)
    while len(counts) > 2:
        z = [abs(two_proportion_z(counts[j], events[j], counts[j + 1], events[j + 1]))
             for j in range(len(counts) - 1)]
        j = int(np.argmin(z))
        if 2 * stats.norm.sf(z[j]) < alpha:
            break
        counts[j:j + 2] = [counts[j] + counts[j + 1]]
        events[j:j + 2] = [events[j] + events[j + 1]]
        del cuts[j]
    if len(counts) == k:
        return s
    if s.has_missing_bin:
        counts.append(s.bins[-1].count)
        events.append(s.bins[-1].events)
    return BinningScheme.from_counts(s.variable, s.method, cuts, counts, events,
                                     s.has_missing_bin, s.usable)


def add_missing_bin(s: BinningScheme, x, y) -> BinningScheme:
    """Append a bin holding the rows where ``x`` is missing (no-op if none are)."""
    x = np.asarray(x, dtype=np.float64)
    miss = np.isnan(x)
    if not miss.any() or s.has_missing_bin:
        return s
    counts = [*s.counts, int(miss.sum())]
    events = [*s.events, int(np.asarray(y)[miss].sum())]
    return BinningScheme.from_counts(s.variable, s.method, s.cuts, counts, events,
                                     True, s.usable)


def fit_scheme(x, y, method="quantile", max_bins=20, *, merge_alpha: float | None = 0.05,
               min_bin_fraction=0.005, alpha=0.05, variable="x") -> BinningScheme:
    """discretize, then merge weak bins (unless ``merge_alpha`` is None), then add a missing bin."""
    s = discretize(x, y, method, max_bins, min_bin_fraction=min_bin_fraction,
                   alpha=alpha, variable=variable)
    if merge_alpha is not None and s.usable and s.n_value_bins > 2:
        s = merge_weak_bins(s, merge_alpha)
    return add_missing_bin(s, x, y)


# -- one-hot encoding ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DummyMatrix:
    columns: list[str]
    matrix: np.ndarray
    reference: dict[str, str] = field(default_factory=dict)
    groups: dict[str, list[int]] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.matrix, columns=self.columns)


def one_hot(schemes: Iterable[BinningScheme], d, drop_reference: bool = True) -> DummyMatrix:
    """Indicator column per (variable, bin) for a dataset or data frame ``d``.

    With ``drop_reference`` the first bin of every variable is left out
    (and recorded in ``reference``) so the columns stay linearly
    independent of an intercept.
    """
    frame = d if isinstance(d, pd.DataFrame) else d.predictors
    rows = len(frame)
    blocks, names, reference, groups = [], [], {}, {}
    for s in schemes:
        if s.variable not in frame.columns:
            raise DataError(f"dataset has no column {s.variable!r}")
        idx = s.assign(frame[s.variable].to_numpy())
        block = np.zeros((rows, s.n_bins), dtype=np.float64)
        block[np.arange(rows), idx] = 1.0
        labels = s.bin_labels()
        start = 1 if drop_reference else 0
        if drop_reference:
            reference[s.variable] = labels[0]
        col0 = len(names)
        names.extend(f"{s.variable}[{lab}]" for lab in labels[start:])
        groups[s.variable] = list(range(col0, len(names)))
        blocks.append(block[:, start:])
    matrix = np.hstack(blocks) if blocks else np.zeros((rows, 0))
    return DummyMatrix(names, matrix, reference, groups)


# -- serialization ------------------------------------------------------------

def schemes_to_json(schemes: Iterable[BinningScheme], **meta) -> str:
    doc = {"format": SCHEMES_FORMAT, **meta,
           "schemes": [s.to_dict() for s in schemes]}
    return json.dumps(doc, indent=2)


def schemes_from_json(text: str) -> tuple[list[BinningScheme], dict]:
    doc = json.loads(text)
    if doc.get("format") != SCHEMES_FORMAT:
        raise DataError(f"not a schemes document (format={doc.get('format')!r})")
    meta = {k: v for k, v in doc.items() if k not in ("format", "schemes")}
    return [BinningScheme.from_dict(s) for s in doc["schemes"]], meta
