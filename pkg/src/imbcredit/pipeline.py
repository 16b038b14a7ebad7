"""End-to-end stages: explore, bin, sweep, train, cv, evaluate, score.

Every stage reads its inputs from the data file and from artifacts earlier
stages left in the output directory, never from in-memory state, and
records what it wrote in ``manifest.json``.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from imbcredit import binning, diagnostics, evaluation, ingest, model
from imbcredit.config import PipelineConfig
from imbcredit.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

MODELS = {
    # id: (family, variable set, cost-sensitive)
    1: ("interval", "all", False),
    2: ("interval", "selected", False),
    3: ("interval", "selected", True),
    4: ("discretized", "selected", False),
    5: ("discretized", "selected", True),
}
FAMILY_OF_SWEEP_MODEL = {3: "interval", 5: "discretized"}


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class Design:
    """Model matrix for one family on one slice of the data."""

    X: np.ndarray
    y: np.ndarray
    names: list[str]
    variables: list[str]
    data: ingest.Dataset


@dataclass
class StageResult:
    stage: str
    artifacts: list[Path] = field(default_factory=list)
    values: dict = field(default_factory=dict)


class Pipeline:
    def __init__(self, config: PipelineConfig, output_dir: Path | str | None = None):
        self.config = config
        self.out = Path(output_dir) if output_dir is not None else config.output_path
        self._data: ingest.Dataset | None = None
        self._parts: tuple[ingest.Dataset, ingest.Dataset] | None = None

    # -- data ------------------------------------------------------------------

    def load(self) -> ingest.Dataset:
        if self._data is None:
            cfg = self.config
            header = ingest.read_header(cfg.data_path)
            absent = [c for c in (cfg.target, *cfg.predictors) if c not in header]
            if absent:
                raise ConfigError(f"configured columns not in {cfg.data_path}: {absent}")
            self._data = ingest.load_csv(cfg.data_path, cfg.schema, cfg.sentinels)
            self._data.require_both_classes("loaded data")
        return self._data

    def parts(self) -> tuple[ingest.Dataset, ingest.Dataset]:
        """Seeded train/test partition of the full data, before any missing policy."""
        if self._parts is None:
            self._parts = ingest.split(self.load(), self.config.split.spec())
        return self._parts

    def family_data(self, family: str, part: ingest.Dataset) -> ingest.Dataset:
        policy = (self.config.interval_missing_policy if family == "interval"
                  else self.config.discretized_missing_policy)
        return ingest.apply_missing_policy(part, policy, self.config.predictors)

    # -- artifacts -------------------------------------------------------------

    def path(self, name: str) -> Path:
        return self.out / name

    def _write_csv(self, result: StageResult, name: str, frame: pd.DataFrame) -> None:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(p, index=False)
        result.artifacts.append(p)

    def _write_text(self, result: StageResult, name: str, text: str) -> None:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        result.artifacts.append(p)

    def _finish(self, result: StageResult, started: float) -> StageResult:
        manifest_path = self.path("manifest.json")
        manifest = {"config": None, "seed": None, "artifacts": {}, "timings": {}}
        if manifest_path.exists():
            manifest.update(json.loads(manifest_path.read_text()))
        manifest["config"] = self.config.to_dict()
        manifest["seed"] = self.config.split.seed
        for p in result.artifacts:
            manifest["artifacts"][p.relative_to(self.out).as_posix()] = sha256(p)
        manifest["artifacts"] = dict(sorted(manifest["artifacts"].items()))
        manifest["timings"][result.stage] = round(time.perf_counter() - started, 3)
        self.out.mkdir(parents=True, exist_ok=True)
        manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
        return result

    def _read_json(self, name: str, produced_by: str) -> dict:
        p = self.path(name)
        if not p.exists():
            raise ConfigError(f"missing {p}; run the '{produced_by}' stage first")
        return json.loads(p.read_text(encoding="utf-8"))

    def load_schemes(self) -> tuple[dict[str, binning.BinningScheme], dict]:
        p = self.path("schemes.json")
        if not p.exists():
            raise ConfigError(f"missing {p}; run the 'bin' stage first")
        schemes, meta = binning.schemes_from_json(p.read_text(encoding="utf-8"))
        return {s.variable: s for s in schemes}, meta

    # -- stages ----------------------------------------------------------------

    def explore(self) -> StageResult:
        """Frequency table, missingness summary and empirical-logit tables per predictor."""
        started = time.perf_counter()
        cfg = self.config
        d = self.load()
        res = StageResult("explore")
        self._write_csv(res, "frequency.csv", ingest.frequency_table(d))
        self._write_csv(res, "missingness.csv", ingest.missingness_summary(d).to_frame())
        rows = []
        for var in cfg.predictors:
            x = d.column(var)
            if np.isnan(x).all():
                rows.append({"variable": var, "ranks": 0, "r2_value": np.nan,
                             "r2_rank": np.nan, "recommendation": "unusable"})
                continue
            t = diagnostics.empirical_logit_table(x, d.target, cfg.binning.n_ranks, var)
            slug = _slug(var)
            self._write_csv(res, f"elogit/{slug}.csv", t.table)
            self._write_csv(res, f"elogit/{slug}_by_mean.csv", t.series_by_mean())
            self._write_csv(res, f"elogit/{slug}_by_rank.csv", t.series_by_rank())
            if len(t.table) >= 3:
                score = diagnostics.linearity_score(t, cfg.linearity_margin)
                rows.append({"variable": var, "ranks": len(t.table), "r2_value": score.r2_value,
                             "r2_rank": score.r2_rank, "recommendation": score.recommendation})
            else:
                rows.append({"variable": var, "ranks": len(t.table), "r2_value": np.nan,
                             "r2_rank": np.nan, "recommendation": "too_few_ranks"})
        linearity = pd.DataFrame(rows)
        self._write_csv(res, "linearity.csv", linearity)
        res.values["linearity"] = linearity
        return self._finish(res, started)

    def _fit_schemes(self, train: ingest.Dataset, method: str) -> list[binning.BinningScheme]:
        b = self.config.binning
        return [
            binning.fit_scheme(train.column(v), train.target, method, b.max_bins,
                               merge_alpha=b.merge_alpha, min_bin_fraction=b.min_bin_fraction,
                               alpha=b.split_alpha, variable=v)
            for v in self.config.predictors
        ]

    def _method_test_auc(self, method: str) -> float:
        train, test = (self.family_data("discretized", p) for p in self.parts())
        schemes = [s for s in self._fit_schemes(train, method) if s.usable]
        X_tr = binning.one_hot(schemes, train).matrix
        X_te = binning.one_hot(schemes, test).matrix
        m = model.fit(X_tr, train.target, settings=self.config.optimizer.settings())
        return evaluation.auc(model.predict_proba(m, X_te), test.target)

    def bin(self, method: str | None = None) -> StageResult:
        """Fit one scheme per predictor on the training part and screen by IV.

        ``method='all'`` additionally compares the four methods by test AUC
        and keeps the configured method's schemes.
        """
        started = time.perf_counter()
        cfg = self.config
        res = StageResult("bin")
        if method == "all":
            rows = [{"method": m, "test_auc": self._method_test_auc(m)} for m in binning.METHODS]
            comparison = pd.DataFrame(rows)
            self._write_csv(res, "method_comparison.csv", comparison)
            res.values["comparison"] = comparison
            method = None
        method = method or cfg.binning.method
        if method not in binning.METHODS:
            raise ConfigError(f"unknown binning method {method!r}")
        train, _ = self.parts()
        train = self.family_data("discretized", train)
        schemes = self._fit_schemes(train, method)
        reports, unusable = [], []
        for s in schemes:
            if not s.usable or s.n_bins < 2:
                unusable.append(s.variable)
                logger.warning("%s: single-bin scheme excluded from selection", s.variable)
                continue
            reports.append(diagnostics.information_value(s, cfg.iv_strength_thresholds))
            self._write_csv(res, f"bins/{_slug(s.variable)}.csv", s.to_frame())
        selected = diagnostics.select_variables(reports, cfg.iv_threshold)
        table = diagnostics.iv_table(reports)
        table["selected"] = table["variable"].isin(selected)
        self._write_csv(res, "iv.csv", table)
        self._write_text(res, "schemes.json", binning.schemes_to_json(
            schemes, method=method, iv_threshold=cfg.iv_threshold, selected=selected,
            unusable=unusable))
        res.values.update(iv=table, selected=selected, unusable=unusable, schemes=schemes)
        return self._finish(res, started)

    def design(self, family: str, variables: list[str], part: ingest.Dataset) -> Design:
        d = self.family_data(family, part)
        if family == "interval":
            X = d.predictors[variables].to_numpy()
            if np.isnan(X).any():
                raise DataError("interval models need interval_missing_policy: drop_rows")
            return Design(X, d.target, list(variables), list(variables), d)
        schemes, _ = self.load_schemes()
        dm = binning.one_hot([schemes[v] for v in variables], d, drop_reference=True)
        return Design(dm.matrix, d.target, dm.columns, list(variables), d)

    def model_variables(self, model_id: int) -> list[str]:
        _, varset, _ = MODELS[model_id]
        if varset == "all":
            return list(self.config.predictors)
        _, meta = self.load_schemes()
        if not meta.get("selected"):
            raise DataError("no variable passed the information-value screen")
        return list(meta["selected"])

    def tau_grid(self, ybar: float) -> np.ndarray:
        t = self.config.tau
        if t.grid is not None:
            return np.asarray(t.grid, dtype=np.float64)
        return model.default_tau_grid(ybar, t.stop, t.num)

    def sweep(self, model_id: int = 3) -> StageResult:
        """Tau sweep for the family of model 3 (interval) or model 5 (discretized)."""
        if model_id not in FAMILY_OF_SWEEP_MODEL:
            raise ConfigError("sweep runs for model 3 (interval) or model 5 (discretized)")
        started = time.perf_counter()
        family = FAMILY_OF_SWEEP_MODEL[model_id]
        res = StageResult(f"sweep_{family}")
        train, _ = self.parts()
        des = self.design(family, self.model_variables(model_id), train)
        folds = ingest.fold_indices(des.y, self.config.split.fold_count,
                                    self.config.split.stratified, self.config.split.seed)
        ybar = float(des.y.mean())
        sw = model.sweep_tau(des.X, des.y, self.tau_grid(ybar), folds, ybar=ybar,
                             settings=self.config.optimizer.settings())
        self._write_csv(res, f"tau_sweep_{family}.csv", sw.table)
        self._write_text(res, f"sweep_{family}.json", json.dumps({
            "family": family, "best_tau": sw.best_tau, "w1": sw.best_weights.w1,
            "w0": sw.best_weights.w0, "ybar": ybar, "flagged": sw.flagged,
            "auc_range": float(sw.table["mean_auc"].max() - sw.table["mean_auc"].min()),
        }, indent=2))
        res.values["sweep"] = sw
        return self._finish(res, started)

    def model_weights(self, model_id: int, ybar: float) -> model.ClassWeights:
        family, _, weighted = MODELS[model_id]
        if not weighted:
            return model.unit_weights(ybar)
        doc = self._read_json(f"sweep_{family}.json", f"sweep --model {model_id}")
        return model.class_weights(doc["best_tau"], ybar)

    def _check_model(self, model_id: int) -> None:
        if model_id not in MODELS:
            raise ConfigError(f"model must be one of {sorted(MODELS)}, got {model_id}")

    def cv(self, model_id: int) -> StageResult:
        """k-fold cross-validated AUC of one model on the training part."""
        self._check_model(model_id)
        started = time.perf_counter()
        res = StageResult(f"cv_model{model_id}")
        self._cv(model_id, res)
        return self._finish(res, started)

    def _cv(self, model_id, res):
        family = MODELS[model_id][0]
        train, _ = self.parts()
        des = self.design(family, self.model_variables(model_id), train)
        w = self.model_weights(model_id, float(des.y.mean()))
        settings = self.config.optimizer.settings()
        folds = ingest.fold_indices(des.y, self.config.split.fold_count,
                                    self.config.split.stratified, self.config.split.seed)

        def pipeline(tr, va):
            m = model.fit(des.X[tr], des.y[tr], w, settings)
            return model.predict_proba(m, des.X[va])

        summary = evaluation.cross_validate(pipeline, folds, des.y)
        frame = summary.to_frame()
        frame.loc[len(frame)] = ["mean", summary.mean]
        frame.loc[len(frame)] = ["std", summary.std]
        self._write_csv(res, f"cv_model{model_id}.csv", frame)
        for j, curve in enumerate(summary.rocs, start=1):
            self._write_csv(res, f"roc/model{model_id}_fold{j:02d}.csv", curve.to_frame())
        res.values["cv"] = summary
        return summary

    def train(self, model_id: int) -> StageResult:
        """Fit on the training part, cross-validate, and evaluate on the test part."""
        self._check_model(model_id)
        started = time.perf_counter()
        res = StageResult(f"train_model{model_id}")
        family = MODELS[model_id][0]
        train, _ = self.parts()
        variables = self.model_variables(model_id)
        des = self.design(family, variables, train)
        w = self.model_weights(model_id, float(des.y.mean()))
        fitted = model.fit(des.X, des.y, w, self.config.optimizer.settings(), names=des.names)
        fitted.extra.update(model=model_id, family=family, variables=variables)
        self._write_text(res, f"fit_model{model_id}.json", fitted.to_json())
        self._write_csv(res, f"coefficients_model{model_id}.csv",
                        fitted.coef().rename("estimate").rename_axis("parameter").reset_index())
        if family == "interval":
            self._write_vif(res, model_id, des)
        self._cv(model_id, res)
        self._evaluate(model_id, res)
        res.values["fit"] = model.ModelFit.from_json(self.path(f"fit_model{model_id}.json").read_text())
        return self._finish(res, started)

    def _write_vif(self, res, model_id, des: Design):
        frame = pd.DataFrame(des.X, columns=des.names)
        report = diagnostics.vif(frame)
        self._write_csv(res, f"vif_model{model_id}.csv", report.to_frame())
        res.values["vif"] = report
        response = self.config.vif_response
        if response is not None and response in des.names and len(des.names) > 2:
            partial = diagnostics.vif(frame.drop(columns=[response]))
            self._write_csv(res, f"vif_model{model_id}_for_{_slug(response)}.csv",
                            partial.to_frame())
            res.values["vif_for_response"] = partial

    def evaluate(self, model_id: int) -> StageResult:
        """Test-set ROC and confusion metrics of a stored fit."""
        self._check_model(model_id)
        started = time.perf_counter()
        res = StageResult(f"evaluate_model{model_id}")
        self._evaluate(model_id, res)
        return self._finish(res, started)

    def _evaluate(self, model_id, res):
        fit_name = f"fit_model{model_id}.json"
        doc = self._read_json(fit_name, f"train --model {model_id}")
        fitted = model.ModelFit.from_dict(doc)
        _, test = self.parts()
        des = self.design(doc["family"], doc["variables"], test)
        scores = model.predict_proba(fitted, des.X)
        cutoff = evaluation.choose_cutoff(scores, des.y)
        report = evaluation.confusion(scores, des.y, cutoff)
        curve = evaluation.roc(scores, des.y)
        row = {"model": model_id, "test_auc": curve.auc, **report.as_row()}
        self._write_csv(res, f"confusion_model{model_id}.csv", pd.DataFrame([row]))
        self._write_csv(res, f"roc/model{model_id}_test.csv", curve.to_frame())
        doc["cutoff"] = cutoff
        self._write_text(res, fit_name, json.dumps(doc, indent=2))
        res.values.update(confusion=report, test_roc=curve, cutoff=cutoff)
        return report

    def score(self, fit_path, data_path, out_name: str | None = None) -> StageResult:
        """Probability and predicted class (at the stored cutoff) for every row of a CSV."""
        started = time.perf_counter()
        fit_path = Path(fit_path)
        try:
            doc = json.loads(fit_path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"fit file not found: {fit_path}") from None
        fitted = model.ModelFit.from_dict(doc)
        variables = doc["variables"]
        cols = list(variables)
        id_col = self.config.id_column
        header = ingest.read_header(data_path)
        frame = ingest.load_frame(data_path, cols, self.config.sentinels)
        if doc["family"] == "interval":
            if frame.isna().any().any():
                bad = frame.columns[frame.isna().any()].tolist()
                raise DataError(f"missing values in interval predictors {bad}")
            X = frame.to_numpy()
        else:
            schemes, _ = binning.schemes_from_json(
                (fit_path.parent / "schemes.json").read_text(encoding="utf-8"))
            by_name = {s.variable: s for s in schemes}
            X = binning.one_hot([by_name[v] for v in variables], frame).matrix
        p = model.predict_proba(fitted, X)
        cutoff = doc.get("cutoff")
        if id_col is not None and id_col in header:
            ids = pd.read_csv(data_path, usecols=[id_col], dtype=str,
                              keep_default_na=False)[id_col]
        else:
            ids = pd.Series(np.arange(len(p)))
        scored = pd.DataFrame({"row_id": ids, "probability": p})
        scored["predicted"] = (p > cutoff).astype(int) if cutoff is not None else pd.NA
        res = StageResult("score")
        self._write_csv(res, out_name or f"scored_model{doc['model']}.csv", scored)
        res.values["scored"] = scored
        return self._finish(res, started)

    def run(self) -> StageResult:
        """All stages for models 1-5 plus a one-table summary."""
        started = time.perf_counter()
        res = StageResult("run")
        self.explore()
        self.bin()
        self.sweep(3)
        self.sweep(5)
        rows = []
        for k in MODELS:
            r = self.train(k)
            cv, cm = r.values["cv"], r.values["confusion"]
            rows.append({"model": k, "cv_mean_auc": cv.mean, "cv_std_auc": cv.std,
                         "type1": cm.type1, "type2": cm.type2, "accuracy": cm.accuracy,
                         "f1": cm.f1, "cutoff": cm.cutoff})
        summary = pd.DataFrame(rows)
        self._write_csv(res, "model_summary.csv", summary)
        res.values["summary"] = summary
        return self._finish(res, started)
