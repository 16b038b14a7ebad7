"""Standard and class-dependent cost-sensitive logistic regression.

The weighted log-likelihood multiplies every event term by ``w1`` and every
non-event term by ``w0``::

    LL_w(beta) = w1 * sum_{y=1} ln(pi_i) + w0 * sum_{y=0} ln(1 - pi_i)

with ``pi_i = 1 / (1 + exp(-(beta_0 + x_i . beta)))``. The weights come from
an assumed population event rate ``tau`` and the sample rate ``ybar``:
``w1 = tau / ybar`` and ``w0 = (1 - tau) / (1 - ybar)``.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.special import expit

from imbcredit.errors import DataError, NumericalError

logger = logging.getLogger(__name__)

PI_CLAMP = 1e-12
TAU_FLOOR = 0.01
SEPARATION_CAP = 30.0
FIT_FORMAT = "imbcredit.fit/1"


class SeparationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ClassWeights:
    w1: float
    w0: float
    tau: float
    ybar: float

    def row_weights(self, y) -> np.ndarray:
        return np.where(np.asarray(y) == 1, self.w1, self.w0)


def class_weights(tau: float, ybar: float) -> ClassWeights:
    """Class weights implied by population rate ``tau`` and sample rate ``ybar``."""
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if not 0 < ybar < 1:
        raise ValueError(f"ybar must lie in (0, 1), got {ybar}")
    return ClassWeights(tau / ybar, (1 - tau) / (1 - ybar), float(tau), float(ybar))


def unit_weights(ybar: float = 0.5) -> ClassWeights:
    return ClassWeights(1.0, 1.0, float(ybar), float(ybar))


def _with_intercept(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(len(X)), X])


def _row_weights(y, w: ClassWeights | None) -> np.ndarray:
    if w is None:
        return np.ones(len(y))
    return w.row_weights(y)


def weighted_log_likelihood(beta, X, y, w: ClassWeights | None = None) -> float:
    """Weighted log-likelihood; ``w=None`` or unit weights give the ordinary one.

    Probabilities are clamped to ``[1e-12, 1 - 1e-12]`` before taking logs.
    """
    X1 = _with_intercept(X)
    y = np.asarray(y)
    pi = np.clip(expit(X1 @ np.asarray(beta, dtype=np.float64)), PI_CLAMP, 1 - PI_CLAMP)
    ev = y == 1
    w1, w0 = (1.0, 1.0) if w is None else (w.w1, w.w0)
    return float(w1 * np.log(pi[ev]).sum() + w0 * np.log1p(-pi[~ev]).sum())


def gradient(beta, X, y, w: ClassWeights | None = None) -> np.ndarray:
    """X'(r * (y - pi)) with r the per-row class weight."""
    X1 = _with_intercept(X)
    y = np.asarray(y, dtype=np.float64)
    pi = expit(X1 @ np.asarray(beta, dtype=np.float64))
    return X1.T @ (_row_weights(y, w) * (y - pi))


def hessian(beta, X, y, w: ClassWeights | None = None) -> np.ndarray:
    """-X' D X with D = diag(r * pi * (1 - pi))."""
    X1 = _with_intercept(X)
    pi = expit(X1 @ np.asarray(beta, dtype=np.float64))
    d = _row_weights(y, w) * pi * (1 - pi)
    return -(X1.T * d) @ X1


def _exact_ll(eta, y, r) -> float:
    # ln(pi) = -log(1 + e^-eta), ln(1 - pi) = -log(1 + e^eta); no clamping
    return float(-(r * np.where(y == 1, np.logaddexp(0, -eta), np.logaddexp(0, eta))).sum())


@dataclass(frozen=True)
class OptimizerSettings:
    max_iter: int = 100
    ftol: float = 1e-8
    gtol: float = 1e-6
    max_halvings: int = 40


@dataclass(frozen=True, eq=False)
class ModelFit:
    names: list[str]
    coefficients: np.ndarray
    weights: ClassWeights
    log_likelihood: float
    iterations: int
    converged: bool
    grad_norm: float
    trace: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    def coef(self) -> pd.Series:
        return pd.Series(self.coefficients, index=self.names)

    def to_dict(self) -> dict:
        return {
            "format": FIT_FORMAT,
            "coefficients": {n: float(b) for n, b in zip(self.names, self.coefficients)},
            "weights": asdict(self.weights),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
            "trace": list(self.trace),
            "warnings": list(self.warnings),
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelFit":
        if doc.get("format") != FIT_FORMAT:
            raise DataError(f"not a model fit document (format={doc.get('format')!r})")
        known = {"format", "coefficients", "weights", "log_likelihood", "iterations",
                 "converged", "grad_norm", "trace", "warnings"}
        coefs = doc["coefficients"]
        return cls(
            list(coefs), np.array(list(coefs.values()), dtype=np.float64),
            ClassWeights(**doc["weights"]), doc["log_likelihood"], doc["iterations"],
            doc["converged"], doc["grad_norm"], list(doc.get("trace", [])),
            list(doc.get("warnings", [])), {k: v for k, v in doc.items() if k not in known},
        )

    @classmethod
    def from_json(cls, text: str) -> "ModelFit":
        return cls.from_dict(json.loads(text))


def _newton_direction(H, g):
    """Solve H d = g for a positive semi-definite H, adding ridge jitter if needed."""
    try:
        c = np.linalg.cholesky(H)
        return np.linalg.solve(c.T, np.linalg.solve(c, g)), False
    except np.linalg.LinAlgError:
        pass
    scale = max(np.trace(H) / len(H), 1e-300)
    for k in range(-10, 1):
        try:
            c = np.linalg.cholesky(H + (10.0 ** k) * scale * np.eye(len(H)))
        except np.linalg.LinAlgError:
            continue
        return np.linalg.solve(c.T, np.linalg.solve(c, g)), True
    raise NumericalError("Hessian is singular even after ridge jitter")


def _polish(Z, yf, r, gamma, eta, ll, g, scale, settings, rounds: int = 5):
    """Plain Newton steps once the log-likelihood has flattened out.

    Near the optimum the gain of a step drops below the rounding noise of
    the log-likelihood, so the line search can no longer tell steps apart
    while the gradient (in raw column units) may still be far from zero.
    A step is kept only if it shrinks the gradient and loses no more than
    that noise.
    """
    for _ in range(rounds):
        if np.linalg.norm(g * scale) < settings.gtol:
            break
        pi = expit(eta)
        try:
            step, _ = _newton_direction((Z.T * (r * pi * (1 - pi))) @ Z, g)
        except NumericalError:
            break
        cand = gamma + step
        cand_eta = Z @ cand
        cand_ll = _exact_ll(cand_eta, yf, r)
        cand_g = Z.T @ (r * (yf - expit(cand_eta)))
        noise = 1e-12 * max(1.0, abs(ll))
        if not (cand_ll >= ll - noise
                and np.linalg.norm(cand_g * scale) < np.linalg.norm(g * scale)):
            break
        gamma, eta, ll, g = cand, cand_eta, max(ll, cand_ll), cand_g
    return gamma, eta, ll, g


def fit(X, y, weights: ClassWeights | None = None,
        settings: OptimizerSettings | None = None,
        names: Sequence[str] | None = None) -> ModelFit:
    """Maximize the (weighted) log-likelihood by Newton's method (IRLS).

    Steps that lower the log-likelihood are halved until they do not.
    Iteration stops when the log-likelihood changes by less than ``ftol``
    or the gradient norm falls below ``gtol``. Internally the solve works
    on a column-scaled design, which leaves Newton iterates unchanged but
    keeps raw-unit predictors well conditioned.
    """
    settings = settings or OptimizerSettings()
    X1 = _with_intercept(X)
    y = np.asarray(y)
    n, p = X1.shape
    if len(y) != n:
        raise DataError(f"design has {n} rows but target has {len(y)}")
    n1 = int((y == 1).sum())
    if n1 == 0 or n1 == n:
        raise DataError("both classes must be present to fit")
    if names is None:
        names = [f"x{j}" for j in range(1, p)]
    names = ["Intercept", *names]
    if len(names) != p:
        raise DataError(f"{len(names) - 1} names for {p - 1} design columns")
    w = weights if weights is not None else unit_weights(n1 / n)
    r = w.row_weights(y)
    yf = y.astype(np.float64)

    scale = np.sqrt((X1 ** 2).mean(axis=0))
    scale[scale == 0] = 1.0
    Z = X1 / scale
    gamma = np.zeros(p)
    gamma[0] = np.log(w.w1 * n1 / (w.w0 * (n - n1)))
    eta = Z @ gamma
    ll = _exact_ll(eta, y, r)
    trace = [ll]
    notes: list[str] = []
    converged = False
    it = 0
    g = Z.T @ (r * (yf - expit(eta)))
    while it < settings.max_iter:
        if np.linalg.norm(g * scale) < settings.gtol:
            converged = True
            break
        it += 1
        pi = expit(eta)
        H = (Z.T * (r * pi * (1 - pi))) @ Z
        step, jittered = _newton_direction(H, g)
        if jittered and "ridge jitter applied to a singular Hessian" not in notes:
            notes.append("ridge jitter applied to a singular Hessian")
            warnings.warn("singular Hessian: ridge jitter applied", RuntimeWarning, stacklevel=2)
        t = 1.0
        for _ in range(settings.max_halvings):
            cand = gamma + t * step
            cand_eta = Z @ cand
            cand_ll = _exact_ll(cand_eta, y, r)
            if cand_ll >= ll:
                break
            t *= 0.5
        else:
            # no ascent along the Newton direction: numerically at the optimum
            converged = bool(g @ step < settings.ftol)
            break
        delta = cand_ll - ll
        gamma, eta, ll = cand, cand_eta, cand_ll
        trace.append(ll)
        g = Z.T @ (r * (yf - expit(eta)))
        if abs(delta) < settings.ftol:
            converged = True
            gamma, eta, ll, g = _polish(Z, yf, r, gamma, eta, ll, g, scale, settings)
            break
    beta = gamma / scale
    grad_norm = float(np.linalg.norm(g * scale))
    if not converged:
        notes.append(f"no convergence after {it} iterations")
        logger.warning("fit did not converge after %d iterations (|g|=%.3g)", it, grad_norm)
    big = [nm for nm, b in zip(names[1:], beta[1:]) if abs(b) > SEPARATION_CAP]
    if big:
        notes.append(f"possible quasi-complete separation: |coef| > {SEPARATION_CAP:g} for {big}")
        warnings.warn(f"possible quasi-complete separation in {big}", SeparationWarning,
                      stacklevel=2)
    reported = weighted_log_likelihood(beta, X1[:, 1:], y, w)
    return ModelFit(names, beta, w, reported, it, converged, grad_norm, trace, notes)


def predict_proba(model: ModelFit, X) -> np.ndarray:
    X1 = _with_intercept(X)
    if X1.shape[1] != len(model.coefficients):
        raise DataError(
            f"design has {X1.shape[1] - 1} columns, model expects {len(model.coefficients) - 1}"
        )
    return expit(X1 @ model.coefficients)


def default_tau_grid(ybar: float, stop: float = 0.5, num: int = 20) -> np.ndarray:
    return np.linspace(max(ybar, TAU_FLOOR), stop, num)


@dataclass(frozen=True, eq=False)
class TauSweep:
    table: pd.DataFrame
    best_tau: float
    best_weights: ClassWeights
    fold_aucs: dict = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        return bool((self.table["folds_failed"] > 0).any())

    def weight_series(self) -> pd.DataFrame:
        return self.table[["tau", "w1", "w0"]]

    def auc_series(self) -> pd.DataFrame:
        return self.table[["w1", "mean_auc"]]


def sweep_tau(X, y, grid, folds, *, ybar: float | None = None,
              settings: OptimizerSettings | None = None) -> TauSweep:
    """Cross-validated AUC of the weighted fit for every tau in ``grid``.

    ``folds`` is a sequence of (train positions, validation positions) pairs
    or :class:`~imbcredit.ingest.Fold` objects. ``ybar`` defaults to the
    event rate of ``y``, so ``tau = ybar`` gives unit weights in every fold.
    The best tau maximizes mean AUC; ties go to the smaller tau.
    """
    from imbcredit.evaluation import cross_validate

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    ybar = float(y.mean()) if ybar is None else ybar
    grid = np.asarray(grid, dtype=np.float64) if grid is not None else default_tau_grid(ybar)
    if len(grid) == 0:
        raise ValueError("empty tau grid")
    if (grid < TAU_FLOOR).any() or (grid >= 1).any():
        raise ValueError(f"tau values must lie in [{TAU_FLOOR}, 1)")
    pairs = [(f.train_index, f.validate_index) if hasattr(f, "train_index") else f
             for f in folds]

    rows, fold_aucs = [], {}
    for tau in grid:
        w = class_weights(float(tau), ybar)

        def pipeline(tr, va, w=w):
            m = fit(X[tr], y[tr], w, settings)
            return predict_proba(m, X[va])

        cv = cross_validate(pipeline, pairs, y)
        fold_aucs[float(tau)] = list(cv.aucs)
        rows.append({"tau": float(tau), "w1": w.w1, "w0": w.w0, "mean_auc": cv.mean,
                     "std_auc": cv.std, "folds_ok": len(cv.aucs),
                     "folds_failed": len(cv.failures)})
    table = pd.DataFrame(rows)
    means = np.nan_to_num(table["mean_auc"].to_numpy(), nan=-np.inf)
    if not np.isfinite(means).any():
        raise NumericalError("every fold failed for every tau")
    best = int(np.argmax(means))  # first max = smaller tau
    tau = float(table["tau"].iloc[best])
    return TauSweep(table, tau, class_weights(tau, ybar), fold_aucs)
