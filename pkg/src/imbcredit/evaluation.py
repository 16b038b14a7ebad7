"""ROC analysis, cutoff selection, confusion metrics and k-fold aggregation."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from imbcredit.errors import DataError, ImbCreditError

logger = logging.getLogger(__name__)


def _check_binary(scores, y):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    if s.shape != y.shape:
        raise DataError(f"{len(s)} scores for {len(y)} labels")
    n1 = int((y == 1).sum())
    if n1 == 0 or n1 == len(y):
        raise DataError("both classes must be present")
    return s, y, n1, len(y) - n1


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr})


def roc(scores, y) -> RocCurve:
    """ROC points from every distinct score threshold, AUC by the trapezoid rule.

    Rows with equal scores move the curve in a single (possibly diagonal) step.
    The first point (0, 0) carries threshold +inf.
    """
    s, y, n1, n0 = _check_binary(scores, y)
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos = (y[order] == 1).astype(np.int64)
    last_of_group = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s) - 1]
    tp = np.r_[0, np.cumsum(pos)[last_of_group]]
    fp = np.r_[0, np.cumsum(1 - pos)[last_of_group]]
    tpr = tp / n1
    fpr = fp / n0
    # exact: sum over steps of dFP * (TP_prev + TP_cur) / 2, normalised once
    auc = float(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])) / (2.0 * n1 * n0))
    thresholds = np.r_[np.inf, s_sorted[last_of_group]]
    return RocCurve(fpr, tpr, thresholds, auc)


def auc(scores, y) -> float:
    return roc(scores, y).auc


def cutoff_candidates(scores) -> np.ndarray:
    """Midpoints between adjacent distinct scores plus one cutoff below and one at the top."""
    u = np.unique(np.asarray(scores, dtype=np.float64))
    mids = (u[:-1] + u[1:]) / 2
    # adjacent floats: the midpoint can round onto the upper score
    mids = np.where(mids < u[1:], mids, u[:-1])
    lower = 0.0 if u[0] > 0 else u[0] - 1.0
    return np.r_[lower, mids, u[-1]]


def _counts_at(s, y, cutoffs):
    """TP and TN for every cutoff under the rule 'event iff score > cutoff'."""
    pos = np.sort(s[y == 1])
    neg = np.sort(s[y == 0])
    tp = len(pos) - np.searchsorted(pos, cutoffs, side="right")
    tn = np.searchsorted(neg, cutoffs, side="right")
    return tp, tn


def choose_cutoff(scores, y) -> float:
    """Cutoff where sensitivity and specificity are closest; ties go to the smaller cutoff."""
    s, y, n1, n0 = _check_binary(scores, y)
    cand = cutoff_candidates(s)
    tp, tn = _counts_at(s, y, cand)
    gap = np.abs(tp.astype(np.int64) * n0 - tn.astype(np.int64) * n1)
    return float(cand[int(np.argmin(gap))])


@dataclass(frozen=True)
class ConfusionReport:
    cutoff: float
    tp: int
    fp: int
    tn: int
    fn: int
    type1: float
    type2: float
    accuracy: float
    f1: float
    flags: tuple[str, ...] = ()

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def sensitivity(self) -> float:
        return 1.0 - self.type2

    @property
    def specificity(self) -> float:
        return 1.0 - self.type1

    def as_row(self) -> dict:
        return {"cutoff": self.cutoff, "tp": self.tp, "fp": self.fp, "tn": self.tn,
                "fn": self.fn, "type1": self.type1, "type2": self.type2,
                "accuracy": self.accuracy, "f1": self.f1, "flags": ";".join(self.flags)}


def confusion(scores, y, cutoff: float) -> ConfusionReport:
    """2x2 table and rates when an event is predicted iff score > cutoff.

    Type I error is FP / (FP + TN), type II error FN / (FN + TP). Rates with
    an empty denominator are reported as 0 and flagged.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    if not np.isfinite(cutoff):
        raise ValueError("cutoff must be finite")
    pred = s > cutoff
    ev = y == 1
    tp = int((pred & ev).sum())
    fp = int((pred & ~ev).sum())
    tn = int((~pred & ~ev).sum())
    fn = int((~pred & ev).sum())
    flags = []

    def rate(num, den, name):
        if den == 0:
            flags.append(f"{name}:undefined")
            return 0.0
        return num / den

    type1 = rate(fp, fp + tn, "type1")
    type2 = rate(fn, fn + tp, "type2")
    accuracy = rate(tp + tn, len(s), "accuracy")
    if tp + fp == 0:
        flags.append("no_predicted_events")
    f1 = rate(2 * tp, 2 * tp + fp + fn, "f1")
    return ConfusionReport(float(cutoff), tp, fp, tn, fn, type1, type2, accuracy, f1,
                           tuple(flags))


@dataclass(frozen=True, eq=False)
class CVSummary:
    aucs: list[float]
    rocs: list[RocCurve] = field(default_factory=list)
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.aucs)) if self.aucs else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.aucs, ddof=1)) if len(self.aucs) > 1 else float("nan")

    @property
    def incomplete(self) -> bool:
        return bool(self.failures)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"fold": range(1, len(self.aucs) + 1), "auc": self.aucs})


def cross_validate(pipeline: Callable, folds: Sequence, y=None) -> CVSummary:
    """Fit-and-score every fold and collect validation AUCs.

    ``folds`` holds :class:`~imbcredit.ingest.Fold` objects, in which case
    ``pipeline(train, validate)`` receives datasets, or (train, validate)
    position pairs, in which case it receives the positions and ``y`` must
    be given. A fold whose pipeline raises is excluded and recorded.
    """
    if len(folds) < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    aucs, rocs, failures = [], [], []
    for j, f in enumerate(folds):
        if hasattr(f, "validate"):
            args, y_val = (f.train, f.validate), f.validate.target
        else:
            if y is None:
                raise ValueError("y is required when folds are index pairs")
            args, y_val = (f[0], f[1]), np.asarray(y)[f[1]]
        try:
            scores = pipeline(*args)
            curve = roc(scores, y_val)
        except (ImbCreditError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            failures.append((j, str(exc)))
            warnings.warn(f"fold {j + 1} excluded: {exc}", RuntimeWarning, stacklevel=2)
            continue
        aucs.append(curve.auc)
        rocs.append(curve)
    return CVSummary(aucs, rocs, failures)
