"""Model checkpoints: a JSON manifest plus one little-endian float32 blob.

A checkpoint is a directory holding ``manifest.json`` and ``params.bin``.
The manifest lists every parameter as ``{name, shape, offset}`` (offset in
bytes into the blob); tree ensembles store their node tables in the manifest
and have an empty blob.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .classifiers.linear import LinearSvmModel, LogisticModel
from .classifiers.trees import DecisionTree, GbtModel, RandomForestModel
from .errors import CorruptManifest, ShapeMismatch, VersionMismatch
from .oversample import gan, tvae

FORMAT = "fraudforge-checkpoint"
VERSION = 1
MANIFEST = "manifest.json"
BLOB = "params.bin"
_LE_F32 = np.dtype("<f4")


def _named_arrays(model) -> tuple[str, dict, list[tuple[str, np.ndarray]]]:
    if isinstance(model, (gan.GanTransformerModel, tvae.TvaeModel)):
        arrays = [(n, p.data) for n, p in model.named_parameters()]
        return model.kind, model.metadata(), arrays
    if isinstance(model, LogisticModel):
        return "lr", {}, [("weights", model.weights), ("bias", np.array([model.bias]))]
    if isinstance(model, LinearSvmModel):
        return "svm", {"C": model.C}, [("weights", model.weights), ("bias", np.array([model.bias]))]
    if isinstance(model, RandomForestModel):
        meta = {
            "seed": model.seed,
            "max_features": model.max_features,
            "n_features": model.n_features,
            "trees": [t.to_table() for t in model.trees],
        }
        return "rf", meta, []
    if isinstance(model, GbtModel):
        meta = {
            "learning_rate": model.learning_rate,
            "base_score": model.base_score,
            "l2": model.l2,
            "n_features": model.n_features,
            "trees": [t.to_table() for t in model.trees],
        }
        return "gbt", meta, []
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def save_checkpoint(model, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    kind, meta, arrays = _named_arrays(model)
    entries, chunks, offset = [], [], 0
    for name, arr in arrays:
        raw = np.ascontiguousarray(arr, dtype=_LE_F32).tobytes()
        entries.append({"name": name, "shape": list(np.shape(arr)), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind,
        "meta": meta,
        "params": entries,
        "blob_bytes": offset,
    }
    (path / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    (path / BLOB).write_bytes(b"".join(chunks))
    return path


def _read(path: Path) -> tuple[dict, bytes]:
    try:
        manifest = json.loads((path / MANIFEST).read_text())
    except (OSError, ValueError) as exc:
        raise CorruptManifest(f"{path}: unreadable manifest ({exc})") from None
    if not isinstance(manifest, dict) or manifest.get("format") != FORMAT:
        raise CorruptManifest(f"{path}: not a {FORMAT} manifest")
    if manifest.get("version") != VERSION:
        raise VersionMismatch(f"{path}: version {manifest.get('version')} != {VERSION}")
    for key in ("kind", "meta", "params", "blob_bytes"):
        if key not in manifest:
            raise CorruptManifest(f"{path}: manifest lacks {key!r}")
    try:
        blob = (path / BLOB).read_bytes()
    except OSError as exc:
        raise CorruptManifest(f"{path}: missing blob ({exc})") from None
    if len(blob) != manifest["blob_bytes"]:
        raise CorruptManifest(f"{path}: blob has {len(blob)} bytes, manifest says {manifest['blob_bytes']}")
    return manifest, blob


def _arrays(manifest: dict, blob: bytes) -> dict[str, np.ndarray]:
    out = {}
    for e in manifest["params"]:
        shape = tuple(e["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = e["offset"]
        end = start + 4 * count
        if start < 0 or end > len(blob):
            raise CorruptManifest(f"parameter {e['name']} runs past the blob")
        out[e["name"]] = np.frombuffer(blob[start:end], dtype=_LE_F32).reshape(shape).astype(np.float32)
    return out


def load_checkpoint(path):
    path = Path(path)
    manifest, blob = _read(path)
    kind, meta = manifest["kind"], manifest["meta"]
    arrays = _arrays(manifest, blob)
    if kind in ("gan_transformer", "tvae"):
        builder = gan.build_model if kind == "gan_transformer" else tvae.build_model
        model = builder(int(meta["n_features"]), meta)
        params = dict(model.named_parameters())
        if set(params) != set(arrays):
            raise ShapeMismatch(f"{path}: parameter names differ from a {kind} model")
        for name, p in params.items():
            if p.data.shape != arrays[name].shape:
                raise ShapeMismatch(f"{name}: checkpoint {arrays[name].shape} vs model {p.data.shape}")
            p.data = arrays[name].copy()
        return model
    if kind in ("lr", "svm"):
        w, b = arrays["weights"], arrays["bias"]
        if w.ndim != 1 or b.shape != (1,):
            raise ShapeMismatch(f"{path}: bad linear model shapes")
        if kind == "lr":
            return LogisticModel(w.copy(), float(b[0]))
        return LinearSvmModel(w.copy(), float(b[0]), float(meta["C"]))
    if kind == "rf":
        trees = [DecisionTree.from_table(t) for t in meta["trees"]]
        return RandomForestModel(trees, meta["seed"], meta["max_features"], meta["n_features"])
    if kind == "gbt":
        trees = [DecisionTree.from_table(t) for t in meta["trees"]]
        return GbtModel(trees, meta["learning_rate"], meta["base_score"], meta["l2"], meta["n_features"])
    raise CorruptManifest(f"{path}: unknown model kind {kind!r}")
