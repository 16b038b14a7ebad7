"""Loading, validating and partitioning binary-outcome tabular data."""
from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
import pandas as pd

from imbcredit.errors import DataError

logger = logging.getLogger(__name__)

DEFAULT_SENTINELS = ("", "NA")


@dataclass(frozen=True)
class Schema:
    target: str
    predictors: tuple[str, ...]
    id_column: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(self.predictors))
        if self.target in self.predictors:
            raise DataError(f"target {self.target!r} is also listed as a predictor")
        if len(set(self.predictors)) != len(self.predictors):
            raise DataError("predictor list contains duplicates")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Interval predictors (NaN = missing) plus a 0/1 target.

    ``row_ids`` are the positions of the rows in the source file, so any
    subset can be traced back to the rows it came from.
    """

    predictors: pd.DataFrame
    target: np.ndarray
    source: str = "<memory>"
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.target)
        if y.ndim != 1 or len(y) != len(self.predictors):
            raise DataError(
                f"target has {len(y)} rows but predictors have {len(self.predictors)}"
            )
        if len(y) and not np.isin(y, (0, 1)).all():
            raise DataError("target must contain only 0 and 1")
        y = y.astype(np.int8)
        y.setflags(write=False)
        object.__setattr__(self, "target", y)
        ids = np.arange(len(y)) if self.row_ids is None else np.asarray(self.row_ids)
        ids.setflags(write=False)
        object.__setattr__(self, "row_ids", ids)
        frame = self.predictors.reset_index(drop=True).astype(np.float64)
        object.__setattr__(self, "predictors", frame)

    @classmethod
    def from_arrays(cls, columns, target, source="<memory>") -> "Dataset":
        return cls(pd.DataFrame(dict(columns)), np.asarray(target), source=source)

    @property
    def rows(self) -> int:
        return len(self.target)

    @property
    def columns(self) -> list[str]:
        return list(self.predictors.columns)

    @property
    def events(self) -> int:
        return int(self.target.sum())

    @property
    def event_rate(self) -> float:
        return self.events / self.rows if self.rows else float("nan")

    def column(self, name: str) -> np.ndarray:
        return self.predictors[name].to_numpy()

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            self.predictors.iloc[index],
            self.target[index],
            source=self.source,
            row_ids=self.row_ids[index],
        )

    def select(self, names: Sequence[str]) -> "Dataset":
        missing = [n for n in names if n not in self.predictors.columns]
        if missing:
            raise DataError(f"unknown predictors: {missing}")
        return Dataset(self.predictors[list(names)], self.target, self.source, self.row_ids)

    def require_both_classes(self, what: str = "dataset") -> None:
        if self.events == 0 or self.events == self.rows:
            raise DataError(f"{what} must contain both events and non-events")


def frequency_table(d: Dataset) -> pd.DataFrame:
    """Frequency and percent of each target value, events first."""
    n1 = d.events
    n0 = d.rows - n1
    return pd.DataFrame(
        {
            "target": [1, 0],
            "frequency": [n1, n0],
            "percent": [100.0 * n1 / d.rows, 100.0 * n0 / d.rows],
        }
    )


def read_header(path) -> list[str]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh), None)
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}") from None
    if header is None:
        raise DataError(f"{path}: empty file")
    seen = set()
    dups = sorted({h for h in header if h in seen or seen.add(h)})
    if dups:
        raise DataError(f"{path}: duplicate column names {dups}")
    return header


def load_frame(path, columns: Sequence[str],
               sentinels: Sequence[str] = DEFAULT_SENTINELS) -> pd.DataFrame:
    """Read ``columns`` as float64; sentinel cells become NaN.

    Any other cell that does not parse as a number raises
    :class:`DataError` naming the file line and column.
    """
    header = read_header(path)
    absent = [c for c in columns if c not in header]
    if absent:
        raise DataError(f"{path}: columns not found in header: {absent}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False,
                      usecols=list(columns), encoding="utf-8")
    sentinel_set = set(sentinels)
    out = {}
    for name in columns:
        cells = raw[name].str.strip()
        is_missing = cells.isin(sentinel_set)
        values = pd.to_numeric(cells.mask(is_missing), errors="coerce")
        bad = values.isna() & ~is_missing
        if bad.any():
            i = int(np.flatnonzero(bad.to_numpy())[0])
            raise DataError(
                f"{path}: line {i + 2}, column {name!r}: "
                f"cannot parse {raw[name].iloc[i]!r} as a number"
            )
        out[name] = values.to_numpy(dtype=np.float64)
    return pd.DataFrame(out, columns=list(columns))


def load_csv(path, schema: Schema, sentinels: Sequence[str] = DEFAULT_SENTINELS) -> Dataset:
    """Load a comma-separated UTF-8 file with a header row into a :class:`Dataset`.

    Columns outside ``schema`` are ignored. The target must be 0 or 1 on
    every row.
    """
    frame = load_frame(path, [schema.target, *schema.predictors], sentinels)
    y = frame.pop(schema.target).to_numpy()
    bad = ~np.isin(y, (0.0, 1.0))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DataError(
            f"{path}: line {i + 2}, target {schema.target!r} must be 0 or 1, got {y[i]!r}"
        )
    d = Dataset(frame, y.astype(np.int8), source=str(path))
    logger.info("loaded %s: %d rows, %d events (%.2f%%)", path, d.rows, d.events,
                100 * d.event_rate)
    return d


class MissingPolicy(str, enum.Enum):
    DROP_ROWS = "drop_rows"
    MISSING_AS_BIN = "missing_as_bin"


def apply_missing_policy(d: Dataset, policy, variables: Sequence[str] | None = None) -> Dataset:
    """Drop rows with any missing value in ``variables``, or pass through.

    ``missing_as_bin`` leaves the data alone; the binning stage gives
    missing values their own bin.
    """
    policy = MissingPolicy(policy)
    variables = d.columns if variables is None else list(variables)
    unknown = [v for v in variables if v not in d.predictors.columns]
    if unknown:
        raise DataError(f"unknown predictors: {unknown}")
    if policy is MissingPolicy.MISSING_AS_BIN:
        return d
    keep = ~d.predictors[variables].isna().any(axis=1).to_numpy()
    if keep.all():
        return d
    out = d.take(np.flatnonzero(keep))
    if out.events == 0 or out.events == out.rows:
        raise DataError("dropping rows with missing values removes an entire class")
    removed = d.rows - out.rows
    logger.info("drop_rows removed %d rows (%.2f%%); event rate now %.2f%%",
                removed, 100 * removed / d.rows, 100 * out.event_rate)
    return out


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    fold_count: int = 10
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise DataError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.fold_count < 1:
            raise DataError(f"fold_count must be positive, got {self.fold_count}")


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_indices(y: np.ndarray, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Training and test positions, each sorted in source order."""
    y = np.asarray(y)
    n = len(y)
    if n < 2:
        raise DataError("need at least 2 rows to split")
    n_train = int(np.floor(spec.train_fraction * n))
    n_train = min(max(n_train, 1), n - 1)
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        pos = np.flatnonzero(y == 1)
        neg = np.flatnonzero(y == 0)
        n_pos = min(_round_half_up(n_train * len(pos) / n), len(pos))
        n_neg = n_train - n_pos
        if n_neg > len(neg):
            n_neg = len(neg)
            n_pos = n_train - n_neg
        train = np.concatenate([rng.permutation(pos)[:n_pos], rng.permutation(neg)[:n_neg]])
    else:
        train = rng.permutation(n)[:n_train]
    mask = np.zeros(n, dtype=bool)
    mask[train] = True
    return np.flatnonzero(mask), np.flatnonzero(~mask)


def split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded train/test partition; the training part gets ``floor(f * rows)`` rows."""
    tr, te = split_indices(d.target, spec)
    train, test = d.take(tr), d.take(te)
    if train.events == 0:
        raise DataError("training part received no events")
    for name, part in (("training", train), ("test", test)):
        if part.events in (0, part.rows):
            logger.warning("%s part contains a single class (%d rows)", name, part.rows)
    return train, test


def fold_indices(y: np.ndarray, fold_count: int, stratified: bool = True,
                 seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """(train, validate) position pairs for k-fold cross-validation."""
    y = np.asarray(y)
    if fold_count < 2:
        raise DataError(f"fold_count must be at least 2, got {fold_count}")
    if len(y) < fold_count:
        raise DataError(f"{len(y)} rows cannot fill {fold_count} folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=np.int64)
    if stratified:
        pos = np.flatnonzero(y == 1)
        neg = np.flatnonzero(y == 0)
        if len(pos) < fold_count:
            raise DataError(
                f"stratified {fold_count}-fold split needs at least {fold_count} events, have {len(pos)}"
            )
        # Larger event chunks go to the first folds and larger non-event
        # chunks to the last, which keeps fold sizes and rates balanced.
        for j, chunk in enumerate(np.array_split(rng.permutation(pos), fold_count)):
            assignment[chunk] = j
        for j, chunk in enumerate(np.array_split(rng.permutation(neg), fold_count)):
            assignment[chunk] = fold_count - 1 - j
    else:
        for j, chunk in enumerate(np.array_split(rng.permutation(len(y)), fold_count)):
            assignment[chunk] = j
    return [
        (np.flatnonzero(assignment != j), np.flatnonzero(assignment == j))
        for j in range(fold_count)
    ]


@dataclass(frozen=True, eq=False)
class Fold:
    train: Dataset
    validate: Dataset
    train_index: np.ndarray = field(repr=False)
    validate_index: np.ndarray = field(repr=False)

    def __iter__(self) -> Iterator[Dataset]:
        yield self.train
        yield self.validate


def make_folds(d: Dataset, spec: SplitSpec) -> list[Fold]:
    """Seeded k-fold partition of ``d`` into (train, validate) pairs."""
    return [
        Fold(d.take(tr), d.take(va), tr, va)
        for tr, va in fold_indices(d.target, spec.fold_count, spec.stratified, spec.seed)
    ]


@dataclass(frozen=True, eq=False)
class MissingnessSummary:
    counts: pd.DataFrame
    co_missing: pd.DataFrame

    @property
    def variables_with_missing(self) -> list[str]:
        c = self.counts
        return list(c.loc[c["missing"] > 0, "variable"])

    def to_frame(self) -> pd.DataFrame:
        return self.counts.merge(
            self.co_missing.add_prefix("with_").rename_axis("variable").reset_index(),
            on="variable",
        )

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


def missingness_summary(d: Dataset) -> MissingnessSummary:
    """Per-variable missing counts and the pairwise co-missing count matrix.

    Purely descriptive: no test of the missingness mechanism is made.
    """
    miss = d.predictors.isna().to_numpy().astype(np.int64)
    co = miss.T @ miss
    counts = pd.DataFrame(
        {
            "variable": d.columns,
            "missing": miss.sum(axis=0),
            "fraction": miss.sum(axis=0) / max(d.rows, 1),
        }
    )
    co_missing = pd.DataFrame(co, index=d.columns, columns=d.columns)
    return MissingnessSummary(counts, co_missing)
