"""Minority-class synthesizers and training-set augmentation."""

import numpy as np

from ..data import Dataset
from ..errors import WidthMismatch
from .gan import GanConfig, GanTransformerModel, TrainTrace, gan_sample, gan_train
from .smote import SmoteConfig, smote_generate
from .tvae import TvaeConfig, TvaeModel, tvae_sample, tvae_train

METHODS = ("original", "smote", "gan_transformer", "tvae", "external")


def augment_dataset(d: Dataset, synthetic: np.ndarray, label: int = 1) -> Dataset:
    """Append synthetic rows (flagged, labelled ``label``) to a copy of ``d``."""
    synthetic = np.asarray(synthetic, dtype=np.float64)
    if synthetic.size == 0:
        synthetic = synthetic.reshape(0, d.n_features)
    if synthetic.ndim != 2 or synthetic.shape[1] != d.n_features:
        raise WidthMismatch(f"synthetic rows have shape {synthetic.shape}, need width {d.n_features}")
    m = len(synthetic)
    return Dataset(
        np.vstack([d.features, synthetic]),
        np.concatenate([d.labels, np.full(m, label, dtype=np.int64)]),
        list(d.feature_names),
        np.concatenate([d.synthetic_mask, np.ones(m, dtype=bool)]),
    )
