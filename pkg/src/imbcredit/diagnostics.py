"""Variable screening: empirical logits, information value and VIF."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from imbcredit.binning import BinningScheme, percentile_rank, smoothed_shares
from imbcredit.errors import DataError

logger = logging.getLogger(__name__)

IV_THRESHOLDS = (0.02, 0.1, 0.3)
STRENGTH_LABELS = ("useless", "weak", "medium", "strong")


def empirical_logit(events, count) -> np.ndarray:
    """ln((Y + 0.5) / (N - Y + 0.5))."""
    events = np.asarray(events, dtype=np.float64)
    count = np.asarray(count, dtype=np.float64)
    return np.log((events + 0.5) / (count - events + 0.5))


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r2: float


def fit_line(x, y) -> LineFit:
    """Ordinary least squares y = a + b x with its coefficient of determination.

    A constant response is fitted exactly, so r2 is 1 by convention.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = xc @ xc
    syy = yc @ yc
    slope = (xc @ yc) / sxx if sxx > 0 else 0.0
    intercept = y.mean() - slope * x.mean()
    if syy == 0:
        return LineFit(slope, intercept, 1.0)
    resid = yc - slope * xc
    return LineFit(slope, intercept, float(max(0.0, 1.0 - (resid @ resid) / syy)))


@dataclass(frozen=True, eq=False)
class EmpiricalLogitTable:
    variable: str
    table: pd.DataFrame

    def series_by_mean(self) -> pd.DataFrame:
        """(mean, elogit) points with their least-squares line."""
        t = self.table
        line = fit_line(t["mean"], t["elogit"])
        return pd.DataFrame({"mean": t["mean"], "elogit": t["elogit"],
                             "fitted": line.intercept + line.slope * t["mean"]})

    def series_by_rank(self) -> pd.DataFrame:
        t = self.table
        line = fit_line(t["rank"], t["elogit"])
        return pd.DataFrame({"rank": t["rank"], "elogit": t["elogit"],
                             "fitted": line.intercept + line.slope * t["rank"]})


def empirical_logit_table(x, y, n_ranks: int = 100, variable: str = "x") -> EmpiricalLogitTable:
    """Empirical logit of the target within each merged percentile rank of ``x``."""
    y = np.asarray(y)
    if not np.isin(y, (0, 1)).all():
        raise DataError("target must be binary")
    ranks = percentile_rank(x, n_ranks, y=y)
    t = ranks.table.copy()
    t["elogit"] = empirical_logit(t["events"], t["count"])
    return EmpiricalLogitTable(variable, t)


@dataclass(frozen=True)
class LinearityScore:
    r2_value: float
    r2_rank: float
    recommendation: str


def linearity_score(t: EmpiricalLogitTable, margin: float = 0.1) -> LinearityScore:
    """Compare how linear the empirical logit is in the rank mean vs the rank index.

    Recommends ``"discretize"`` when the rank fit beats the value fit by more
    than ``margin`` in r2.
    """
    if len(t.table) < 3:
        raise ValueError(f"{t.variable}: need at least 3 ranks, have {len(t.table)}")
    r2_value = fit_line(t.table["mean"], t.table["elogit"]).r2
    r2_rank = fit_line(t.table["rank"], t.table["elogit"]).r2
    rec = "discretize" if r2_rank - r2_value > margin else "interval"
    return LinearityScore(r2_value, r2_rank, rec)


@dataclass(frozen=True)
class IVReport:
    variable: str
    iv: float
    strength: str
    bins: int


def iv_strength(iv: float, thresholds: Sequence[float] = IV_THRESHOLDS) -> str:
    lo, mid, hi = thresholds
    if iv < lo:
        return "useless"
    if iv < mid:
        return "weak"
    if iv < hi:
        return "medium"
    return "strong"


def iv_from_counts(counts, events) -> float:
    counts = np.asarray(counts)
    events = np.asarray(events)
    if events.sum() == 0 or (counts - events).sum() == 0:
        raise DataError("information value needs both events and non-events")
    p, q = smoothed_shares(counts, events)
    return float(np.sum((p - q) * np.log(p / q)))


def information_value(s: BinningScheme, thresholds: Sequence[float] = IV_THRESHOLDS) -> IVReport:
    """Sum over bins (missing bin included) of (p_j - q_j) ln(p_j / q_j).

    p_j is the bin's share of non-events, q_j its share of events.
    """
    if s.n_bins < 2:
        raise ValueError(f"{s.variable}: information value needs at least 2 bins")
    iv = iv_from_counts(s.counts, s.events)
    return IVReport(s.variable, iv, iv_strength(iv, thresholds), s.n_bins)


def select_variables(reports: Iterable[IVReport], threshold: float = 0.1) -> list[str]:
    """Names with IV strictly above ``threshold``, highest IV first."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    keep = sorted((r for r in reports if r.iv > threshold), key=lambda r: (-r.iv, r.variable))
    if not keep:
        logger.warning("no variable has information value above %g", threshold)
    return [r.variable for r in keep]


def iv_table(reports: Iterable[IVReport]) -> pd.DataFrame:
    rows = sorted(reports, key=lambda r: (-r.iv, r.variable))
    return pd.DataFrame(
        {"variable": [r.variable for r in rows], "bins": [r.bins for r in rows],
         "iv": [r.iv for r in rows], "strength": [r.strength for r in rows]}
    )


@dataclass(frozen=True, eq=False)
class VIFReport:
    values: pd.Series
    collinear: list[str] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return self.values.rename("vif").rename_axis("variable").reset_index()


def vif(design, names: Sequence[str] | None = None) -> VIFReport:
    """Variance inflation factor of every column.

    Each column is regressed by least squares on the others plus an
    intercept; VIF = 1 / (1 - R^2). Exactly collinear columns get ``inf``.
    """
    if isinstance(design, pd.DataFrame):
        names = list(design.columns) if names is None else list(names)
        X = design.to_numpy(dtype=np.float64)
    else:
        X = np.asarray(design, dtype=np.float64)
        names = [f"x{j}" for j in range(X.shape[1])] if names is None else list(names)
    n, p = X.shape
    if p < 2:
        raise ValueError("VIF needs at least 2 columns")
    if n <= p:
        raise ValueError("VIF needs more rows than columns")
    out = np.empty(p)
    collinear = []
    for k in range(p):
        target = X[:, k]
        others = np.column_stack([np.ones(n), np.delete(X, k, axis=1)])
        coef, *_ = np.linalg.lstsq(others, target, rcond=None)
        resid = target - others @ coef
        tc = target - target.mean()
        sst = tc @ tc
        unexplained = (resid @ resid) / sst if sst > 0 else 0.0
        if unexplained < 1e-12:
            out[k] = np.inf
            collinear.append(names[k])
        else:
            out[k] = 1.0 / min(unexplained, 1.0)
    if collinear:
        logger.warning("exactly collinear columns: %s", collinear)
    return VIFReport(pd.Series(out, index=names), collinear)
