"""Pipeline configuration: one YAML file holding every experimental choice."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from imbcredit.binning import METHODS
from imbcredit.errors import ConfigError
from imbcredit.ingest import DEFAULT_SENTINELS, MissingPolicy, Schema, SplitSpec
from imbcredit.model import TAU_FLOOR, OptimizerSettings


@dataclass
class SplitConfig:
    train_fraction: float = 0.7
    fold_count: int = 10
    stratified: bool = True
    seed: int = 0

    def spec(self) -> SplitSpec:
        return SplitSpec(self.train_fraction, self.fold_count, self.stratified, self.seed)


@dataclass
class BinningConfig:
    method: str = "quantile"
    max_bins: int = 20
    merge_alpha: float | None = 0.05
    split_alpha: float = 0.05
    min_bin_fraction: float = 0.005
    n_ranks: int = 100


@dataclass
class TauConfig:
    grid: list[float] | None = None
    stop: float = 0.5
    num: int = 20


@dataclass
class OptimizerConfig:
    max_iter: int = 100
    ftol: float = 1e-8
    gtol: float = 1e-6

    def settings(self) -> OptimizerSettings:
        return OptimizerSettings(self.max_iter, self.ftol, self.gtol)


@dataclass
class PipelineConfig:
    data: str
    target: str
    predictors: list[str]
    id_column: str | None = None
    sentinels: list[str] = field(default_factory=lambda: list(DEFAULT_SENTINELS))
    interval_missing_policy: str = "drop_rows"
    discretized_missing_policy: str = "missing_as_bin"
    split: SplitConfig = field(default_factory=SplitConfig)
    binning: BinningConfig = field(default_factory=BinningConfig)
    iv_threshold: float = 0.1
    iv_strength_thresholds: list[float] = field(default_factory=lambda: [0.02, 0.1, 0.3])
    linearity_margin: float = 0.1
    vif_response: str | None = None
    tau: TauConfig = field(default_factory=TauConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    output_dir: str = "out"
    base_dir: str = field(default=".", repr=False, compare=False)

    def __post_init__(self):
        self.validate()

    @property
    def schema(self) -> Schema:
        return Schema(self.target, tuple(self.predictors), self.id_column)

    @property
    def data_path(self) -> Path:
        return Path(self.base_dir) / self.data

    @property
    def output_path(self) -> Path:
        return Path(self.base_dir) / self.output_dir

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(bool(self.predictors), "predictors must not be empty")
        need(len(set(self.predictors)) == len(self.predictors), "duplicate predictors")
        need(self.target not in self.predictors, "target listed among predictors")
        for name in ("interval_missing_policy", "discretized_missing_policy"):
            need(getattr(self, name) in {p.value for p in MissingPolicy},
                 f"{name} must be drop_rows or missing_as_bin")
        s = self.split
        need(0 < s.train_fraction < 1, "split.train_fraction must lie in (0, 1)")
        need(s.fold_count >= 2, "split.fold_count must be at least 2")
        b = self.binning
        need(b.method in METHODS, f"binning.method must be one of {METHODS}")
        need(b.max_bins >= 2, "binning.max_bins must be at least 2")
        need(b.merge_alpha is None or 0 < b.merge_alpha < 1, "binning.merge_alpha must lie in (0, 1)")
        need(0 < b.split_alpha < 1, "binning.split_alpha must lie in (0, 1)")
        need(0 <= b.min_bin_fraction < 0.5, "binning.min_bin_fraction must lie in [0, 0.5)")
        need(b.n_ranks >= 3, "binning.n_ranks must be at least 3")
        need(self.iv_threshold >= 0, "iv_threshold must be non-negative")
        t = self.iv_strength_thresholds
        need(len(t) == 3 and t[0] < t[1] < t[2], "iv_strength_thresholds must be 3 increasing values")
        need(self.vif_response is None or self.vif_response in self.predictors,
             "vif_response must be one of the predictors")
        if self.tau.grid is not None:
            need(len(self.tau.grid) > 0, "tau.grid must not be empty")
            need(all(TAU_FLOOR <= v < 1 for v in self.tau.grid),
                 f"tau.grid values must lie in [{TAU_FLOOR}, 1)")
        need(TAU_FLOOR < self.tau.stop < 1, "tau.stop must lie in (0.01, 1)")
        need(self.tau.num >= 1, "tau.num must be positive")
        o = self.optimizer
        need(o.max_iter >= 1 and o.ftol > 0 and o.gtol > 0, "optimizer settings must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | os.PathLike = ".") -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a mapping")
        nested = {"split": SplitConfig, "binning": BinningConfig, "tau": TauConfig,
                  "optimizer": OptimizerConfig}
        allowed = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(doc) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in doc.items():
            if key in nested:
                sub = nested[key]
                value = value or {}
                bad = set(value) - {f.name for f in fields(sub)}
                if bad:
                    raise ConfigError(f"unknown keys in {key}: {sorted(bad)}")
                value = sub(**value)
            kwargs[key] = value
        for req in ("data", "target", "predictors"):
            if req not in kwargs:
                raise ConfigError(f"config is missing required key {req!r}")
        return cls(**kwargs, base_dir=str(base_dir))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return PipelineConfig.from_dict(doc, base_dir=path.parent)
