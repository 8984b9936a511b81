"""End-to-end experiment steps behind the ``forge`` subcommands.

Output directory layout::

    out/
      config.json                      effective config (defaults filled in)
      train.csv test.csv scaler.json counts.json
      oversample/<method>/seed<N>/     synthetic.csv, trace.csv, checkpoint/
      reports/<method>__<clf>__seed<N>.json
      tables/<metric>.csv              classifiers x methods, median over seeds
      plots/<metric>.csv               long form: method,classifier,value
      summary.md grid.json
"""

from __future__ import annotations

import json
import logging
import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .checkpoint import save_checkpoint
from .classifiers import CLASSIFIERS, DISPLAY_NAMES, gbt_train, lr_train, rf_train, svm_train
from .config import ExperimentConfig
from .data import (
    DEFAULT_SCALED,
    KAGGLE_FEATURES,
    Dataset,
    class_counts,
    deduplicate,
    load_csv,
    load_synthetic_csv,
    minmax_fit,
    minmax_transform,
    row_digest,
    row_hashes,
    stratified_split,
    write_csv,
    write_synthetic_csv,
)
from .errors import ForgeError
from .fixtures import blob_fixture
from .metrics import MetricsReport, report
from .oversample import augment_dataset
from .oversample.gan import gan_sample, gan_train
from .oversample.smote import SmoteConfig, smote_generate
from .oversample.tvae import tvae_sample, tvae_train

log = logging.getLogger(__name__)

METRICS = ("auc", "precision", "recall", "f1", "accuracy")
REFERENCE_COUNTS = {"raw_negative": 284_315, "raw_positive": 492, "clean_negative": 272_000, "clean_positive": 394}


class LeakageError(ForgeError, RuntimeError):
    """Synthetic or altered rows detected in the evaluation split."""


def _out(cfg: ExperimentConfig) -> Path:
    p = Path(cfg.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def stream_seed(seed: int, *tags: str) -> list[int]:
    """Entropy for an independent RNG stream keyed by seed and string tags."""
    return [int(seed)] + [zlib.crc32(t.encode()) for t in tags]


# -- preprocess ---------------------------------------------------------------
def feature_schema(cfg: ExperimentConfig):
    return KAGGLE_FEATURES if cfg.schema == "kaggle" else None


def load_raw(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset is None:
        return blob_fixture()
    return load_csv(cfg.dataset, feature_schema(cfg))


def scaled_columns(cfg: ExperimentConfig, d: Dataset) -> list[str]:
    if cfg.normalize == "all":
        return list(d.feature_names)
    if cfg.normalize is None:
        if cfg.dataset is not None and cfg.schema == "kaggle":
            return [c for c in DEFAULT_SCALED]
        return list(d.feature_names)
    return list(cfg.normalize)


def cmd_preprocess(cfg: ExperimentConfig) -> dict:
    """Clean, split 80:20 (stratified), fit min-max on train, write artifacts."""
    out = _out(cfg)
    raw = load_raw(cfg)
    raw_neg, raw_pos = class_counts(raw)
    unique = deduplicate(raw)
    uniq_neg, uniq_pos = class_counts(unique)
    data = unique if cfg.deduplicate else raw

    split = stratified_split(data, cfg.train_fraction, cfg.split_seed)
    train, test = data.subset(split.train_idx), data.subset(split.test_idx)
    scaler = minmax_fit(train, scaled_columns(cfg, data))
    train, test = minmax_transform(train, scaler), minmax_transform(test, scaler)

    write_csv(train, out / "train.csv")
    write_csv(test, out / "test.csv")
    (out / "scaler.json").write_text(scaler.to_json() + "\n")
    tr_neg, tr_pos = class_counts(train)
    te_neg, te_pos = class_counts(test)
    counts = {
        "raw": {"negative": raw_neg, "positive": raw_pos},
        "deduplicated": {"negative": uniq_neg, "positive": uniq_pos},
        "deduplicate_applied": cfg.deduplicate,
        "train": {"negative": tr_neg, "positive": tr_pos},
        "test": {"negative": te_neg, "positive": te_pos},
        "split_seed": cfg.split_seed,
        "train_fraction": cfg.train_fraction,
        "test_digest": row_digest(test),
    }
    if cfg.dataset is not None and cfg.schema == "kaggle":
        counts["reference_counts"] = REFERENCE_COUNTS
        counts["delta_vs_reference_clean"] = {
            "negative": uniq_neg - REFERENCE_COUNTS["clean_negative"],
            "positive": uniq_pos - REFERENCE_COUNTS["clean_positive"],
        }
    _write_json(out / "counts.json", counts)
    _write_json(out / "config.json", cfg.to_dict())
    return counts


def _load_split(cfg: ExperimentConfig) -> tuple[Dataset, Dataset, dict]:
    out = Path(cfg.out_dir)
    if not (out / "train.csv").exists():
        raise FileNotFoundError(f"{out / 'train.csv'} missing; run `forge preprocess` first")
    names = feature_schema(cfg)
    train = load_csv(out / "train.csv", names)
    test = load_csv(out / "test.csv", names)
    counts = json.loads((out / "counts.json").read_text())
    return train, test, counts


def ensure_preprocessed(cfg: ExperimentConfig) -> None:
    if not (Path(cfg.out_dir) / "train.csv").exists():
        log.info("no preprocessed split in %s; running preprocess", cfg.out_dir)
        cmd_preprocess(cfg)


# -- oversample ---------------------------------------------------------------
@dataclass
class Synthesis:
    rows: np.ndarray
    model: object = None
    trace: object = None


def synthesize(method: str, train: Dataset, cfg: ExperimentConfig, seed: int) -> Synthesis:
    minority = train.minority()
    n = cfg.n_synthetic
    if method == "original":
        return Synthesis(np.empty((0, train.n_features)))
    if method == "smote":
        entropy = stream_seed(seed, "smote")
        sc = SmoteConfig(cfg.smote.k_neighbors, n, seed=int(np.random.SeedSequence(entropy).generate_state(1)[0]))
        return Synthesis(smote_generate(minority, sc))
    if method == "gan_transformer":
        rng = np.random.default_rng(stream_seed(seed, "gan_transformer"))
        model, trace = gan_train(minority, cfg.gan, rng)
        return Synthesis(gan_sample(model, n, rng), model, trace)
    if method == "tvae":
        rng = np.random.default_rng(stream_seed(seed, "tvae"))
        model, trace = tvae_train(minority, cfg.tvae, rng)
        return Synthesis(tvae_sample(model, n, rng), model, trace)
    if method == "external":
        return Synthesis(load_synthetic_csv(cfg.external_synthetic, train.feature_names))
    raise ValueError(f"unknown method {method!r}")


def _synth_dir(cfg: ExperimentConfig, method: str, seed: int) -> Path:
    return Path(cfg.out_dir) / "oversample" / method / f"seed{seed}"


def persist_synthesis(cfg: ExperimentConfig, method: str, seed: int, names: list[str], syn: Synthesis) -> Path:
    d = _synth_dir(cfg, method, seed)
    d.mkdir(parents=True, exist_ok=True)
    write_synthetic_csv(syn.rows, names, d / "synthetic.csv")
    if syn.trace is not None:
        (d / "trace.csv").write_text(syn.trace.to_csv())
    if syn.model is not None:
        save_checkpoint(syn.model, d / "checkpoint")
    return d


def cmd_oversample(cfg: ExperimentConfig, method: str, seed: Optional[int] = None) -> Path:
    """Train one oversampler and write synthetic.csv (+ checkpoint, trace.csv)."""
    seed = cfg.seeds[0] if seed is None else seed
    ensure_preprocessed(cfg)
    train, _, _ = _load_split(cfg)
    return persist_synthesis(cfg, method, seed, train.feature_names, synthesize(method, train, cfg, seed))


def synthetic_rows(cfg: ExperimentConfig, method: str, train: Dataset, seed: int) -> np.ndarray:
    """Rows from a previous ``oversample`` run if present, else generate and save them."""
    if method == "original":
        return np.empty((0, train.n_features))
    path = _synth_dir(cfg, method, seed) / "synthetic.csv"
    if not path.exists():
        persist_synthesis(cfg, method, seed, train.feature_names, synthesize(method, train, cfg, seed))
    # read back so cached and fresh runs see the same (CSV-rounded) values
    return load_synthetic_csv(path, train.feature_names)


# -- train / evaluate -----------------------------------------------------------
def train_classifier(name: str, d: Dataset, cfg: ExperimentConfig, seed: int):
    if name == "lr":
        return lr_train(d, cfg.lr.epochs, cfg.lr.lr, seed)
    if name == "svm":
        return svm_train(d, cfg.svm.C, cfg.svm.epochs, cfg.svm.lr, seed)
    if name == "rf":
        p = cfg.rf
        return rf_train(d, p.n_trees, p.max_depth, p.max_features, seed, p.min_samples_leaf)
    if name == "gbt":
        p = cfg.gbt
        return gbt_train(d, p.n_rounds, p.learning_rate, p.max_depth, p.l2, seed, p.min_samples_leaf, p.min_child_weight)
    raise ValueError(f"unknown classifier {name!r}")


def check_no_leakage(test: Dataset, synthetic: np.ndarray, counts: dict) -> None:
    if test.synthetic_mask.any():
        raise LeakageError("test split contains rows flagged synthetic")
    if row_digest(test) != counts["test_digest"]:
        raise LeakageError("test split differs from the one written by preprocess")
    if len(synthetic) and row_hashes(synthetic) & row_hashes(test.features):
        raise LeakageError("a synthetic row is identical to a test row")


def _report_path(cfg: ExperimentConfig, method: str, clf: str, seed: int) -> Path:
    return Path(cfg.out_dir) / "reports" / f"{method}__{clf}__seed{seed}.json"


def evaluate_cell(
    cfg: ExperimentConfig,
    method: str,
    clf: str,
    seed: int,
    train: Dataset,
    test: Dataset,
    counts: dict,
    synthetic: np.ndarray,
) -> MetricsReport:
    check_no_leakage(test, synthetic, counts)
    augmented = augment_dataset(train, synthetic)
    model = train_classifier(clf, augmented, cfg, seed)
    rep = report(method, clf, seed, model.score(test.features), test.labels, cfg.threshold)
    path = _report_path(cfg, method, clf, seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rep.to_json())
    return rep


def cmd_train_eval(cfg: ExperimentConfig, method: str, clf: str, seed: Optional[int] = None) -> MetricsReport:
    seed = cfg.seeds[0] if seed is None else seed
    ensure_preprocessed(cfg)
    train, test, counts = _load_split(cfg)
    syn = synthetic_rows(cfg, method, train, seed)
    return evaluate_cell(cfg, method, clf, seed, train, test, counts, syn)


# -- grid -------------------------------------------------------------------------
@dataclass
class GridResult:
    reports: list[MetricsReport]
    failures: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def cell(self, method: str, clf: str, seed: int) -> MetricsReport:
        for r in self.reports:
            if (r.method, r.classifier, r.seed) == (method, clf, seed):
                return r
        raise KeyError((method, clf, seed))

    def median(self, metric: str, method: str, clf: str) -> float:
        vals = [getattr(r, metric) for r in self.reports if r.method == method and r.classifier == clf]
        return float(np.median(vals)) if vals else float("nan")


def worker_count(cfg: ExperimentConfig) -> int:
    n = max(1, cfg.workers)
    cap = os.environ.get("FORGE_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def _ordered(cfg: ExperimentConfig) -> list[str]:
    return [c for c in CLASSIFIERS if c in cfg.classifiers]


def write_tables(cfg: ExperimentConfig, grid: GridResult) -> None:
    out = Path(cfg.out_dir)
    clfs = _ordered(cfg)
    for metric in METRICS:
        lines = ["classifier," + ",".join(cfg.methods)]
        plot = ["method,classifier,value"]
        for c in clfs:
            vals = [grid.median(metric, m, c) for m in cfg.methods]
            lines.append(c + "," + ",".join(f"{v:.4f}" for v in vals))
        for m in cfg.methods:
            for c in clfs:
                plot.append(f"{m},{c},{grid.median(metric, m, c):.6f}")
        (out / "tables").mkdir(parents=True, exist_ok=True)
        (out / "plots").mkdir(parents=True, exist_ok=True)
        (out / "tables" / f"{metric}.csv").write_text("\n".join(lines) + "\n")
        (out / "plots" / f"{metric}.csv").write_text("\n".join(plot) + "\n")

    titles = {"auc": "AUC", "precision": "Precision", "recall": "Recall", "f1": "F1", "accuracy": "Accuracy"}
    md = [f"# Comparison grid (median over seeds {cfg.seeds}, threshold {cfg.threshold})", ""]
    for metric in METRICS:
        md.append(f"## {titles[metric]}")
        md.append("")
        md.append("| Model | " + " | ".join(cfg.methods) + " |")
        md.append("|---" * (len(cfg.methods) + 1) + "|")
        for c in clfs:
            vals = " | ".join(f"{grid.median(metric, m, c):.4f}" for m in cfg.methods)
            md.append(f"| {DISPLAY_NAMES[c]} | {vals} |")
        md.append("")
    if grid.failures:
        md.append("## Failed cells")
        md.append("")
        for f in grid.failures:
            md.append(f"- {f['method']} x {f['classifier']} seed {f['seed']}: {f['error']}")
        md.append("")
    (out / "summary.md").write_text("\n".join(md))


def cmd_compare(cfg: ExperimentConfig) -> GridResult:
    """Run the method x classifier x seed grid and write tables + plot data.

    A failing cell (or a failing oversampler, which fails all its cells) is
    recorded and the rest of the grid still runs.
    """
    start = time.perf_counter()
    ensure_preprocessed(cfg)
    train, test, counts = _load_split(cfg)
    workers = worker_count(cfg)

    synth_jobs = [(m, s) for s in cfg.seeds for m in cfg.methods]

    def run_synth(job):
        m, s = job
        try:
            return job, synthetic_rows(cfg, m, train, s), None
        except Exception as exc:  # noqa: BLE001 - recorded per cell
            return job, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=workers) as pool:
        synth = {job: (rows, err) for job, rows, err in pool.map(run_synth, synth_jobs)}

    cells = [(m, c, s) for s in cfg.seeds for m in cfg.methods for c in _ordered(cfg)]

    def run_cell(cell):
        m, c, s = cell
        rows, err = synth[(m, s)]
        if err is not None:
            return cell, None, err
        try:
            return cell, evaluate_cell(cfg, m, c, s, train, test, counts, rows), None
        except Exception as exc:  # noqa: BLE001
            return cell, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_cell, cells))

    reports, failures = [], []
    for (m, c, s), rep, err in sorted(results, key=lambda r: r[0]):
        if err is None:
            reports.append(rep)
        else:
            failures.append({"method": m, "classifier": c, "seed": s, "error": err})
    grid = GridResult(
        reports,
        failures,
        {
            "version": __version__,
            "seeds": list(cfg.seeds),
            "methods": list(cfg.methods),
            "classifiers": _ordered(cfg),
            "counts": counts,
            "n_cells": len(cells),
            "wall_time_s": round(time.perf_counter() - start, 3),
        },
    )
    write_tables(cfg, grid)
    _write_json(
        Path(cfg.out_dir) / "grid.json",
        {
            "metadata": grid.metadata,
            "failures": failures,
            "reports": [
                str(_report_path(cfg, r.method, r.classifier, r.seed).relative_to(cfg.out_dir)) for r in reports
            ],
        },
    )
    _write_json(Path(cfg.out_dir) / "config.json", cfg.to_dict())
    return grid
