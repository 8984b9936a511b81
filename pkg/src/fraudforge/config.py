"""JSON experiment configuration with embedded defaults.

Every field has a default, so ``{}`` is a valid config: it runs the shipped
blob fixture through the full grid. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .classifiers import CLASSIFIERS
from .oversample import METHODS
from .oversample.gan import GanConfig
from .oversample.tvae import TvaeConfig


@dataclass
class SmoteParams:
    k_neighbors: int = 5


@dataclass
class LrParams:
    epochs: int = 500
    lr: float = 0.5


@dataclass
class SvmParams:
    C: float = 1.0
    epochs: int = 300
    lr: float = 0.5


@dataclass
class RfParams:
    n_trees: int = 100
    max_depth: int = 12
    max_features: Optional[int] = -1  # -1: floor(sqrt(p)); null: all features
    min_samples_leaf: int = 1


@dataclass
class GbtParams:
    n_rounds: int = 200
    learning_rate: float = 0.1
    max_depth: int = 4
    l2: float = 1.0
    min_samples_leaf: int = 1
    min_child_weight: float = 1.0


@dataclass
class ExperimentConfig:
    # null: generate the built-in blob fixture
    dataset: Optional[str] = None
    # "kaggle" enforces Time,V1..V28,Amount,Class; "any" accepts <features>,Class
    schema: str = "kaggle"
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    split_seed: int = 0
    train_fraction: float = 0.8
    deduplicate: bool = False
    # column names, "all", or null: Amount+Time for the kaggle schema, all columns otherwise
    normalize: Union[list[str], str, None] = None
    methods: list[str] = field(default_factory=lambda: ["original", "smote", "gan_transformer", "tvae"])
    classifiers: list[str] = field(default_factory=lambda: list(CLASSIFIERS))
    n_synthetic: int = 5000
    threshold: float = 0.5
    out_dir: str = "runs/default"
    external_synthetic: Optional[str] = None
    workers: int = 1
    smote: SmoteParams = field(default_factory=SmoteParams)
    gan: GanConfig = field(default_factory=GanConfig)
    tvae: TvaeConfig = field(default_factory=TvaeConfig)
    lr: LrParams = field(default_factory=LrParams)
    svm: SvmParams = field(default_factory=SvmParams)
    rf: RfParams = field(default_factory=RfParams)
    gbt: GbtParams = field(default_factory=GbtParams)

    def validate(self) -> "ExperimentConfig":
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if not self.methods or not self.classifiers:
            raise ValueError("methods and classifiers must be non-empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        bad = [c for c in self.classifiers if c not in CLASSIFIERS]
        if bad:
            raise ValueError(f"unknown classifiers {bad}; choose from {CLASSIFIERS}")
        if "external" in self.methods and not self.external_synthetic:
            raise ValueError("method 'external' needs external_synthetic")
        if self.n_synthetic < 0:
            raise ValueError("n_synthetic must be >= 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.schema not in ("kaggle", "any"):
            raise ValueError("schema must be 'kaggle' or 'any'")
        return self

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))


_NESTED = {
    "smote": SmoteParams,
    "gan": GanConfig,
    "tvae": TvaeConfig,
    "lr": LrParams,
    "svm": SvmParams,
    "rf": RfParams,
    "gbt": GbtParams,
}


def _build(cls, data: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValueError(f"unknown config keys in {where}: {unknown}")
    kwargs = {}
    for k, v in data.items():
        if k in _NESTED and cls is ExperimentConfig:
            v = _build(_NESTED[k], v or {}, k)
        elif k == "betas":
            v = tuple(v)
        kwargs[k] = v
    return cls(**kwargs)


def config_from_dict(data: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, dict(data), "config")
    if base_dir is not None:
        for attr in ("dataset", "external_synthetic", "out_dir"):
            value = getattr(cfg, attr)
            if value and not Path(value).is_absolute():
                setattr(cfg, attr, str((base_dir / value).resolve()))
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    """Read a JSON config; relative paths resolve against the file's directory."""
    path = Path(path)
    data = json.loads(path.read_text())
    return config_from_dict(data, path.parent)
