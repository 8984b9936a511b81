"""Tabular VAE baseline: MLP encoder/decoder trained on the ELBO."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from .. import tensor as T
from ..errors import DivergenceDetected, EmptyMinority
from ..tensor import Tensor
from .gan import TrainTrace, _batches, _cfg_dict


@dataclass
class TvaeConfig:
    latent_dim: int = 16
    hidden: int = 64
    epochs: int = 300
    batch_size: int = 64
    lr: float = 1e-3
    beta: float = 1.0
    sample_batch: int = 1024


def kl_standard_normal(mu: np.ndarray, logvar: np.ndarray) -> float:
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over the last axis, averaged over rows."""
    mu = np.atleast_2d(mu)
    logvar = np.atleast_2d(logvar)
    return float(np.mean(0.5 * np.sum(mu**2 + np.exp(logvar) - 1.0 - logvar, axis=-1)))


class TvaeModel(nn.Module):
    kind = "tvae"

    def __init__(self, n_features: int, cfg: TvaeConfig, rng: np.random.Generator, shift=None, scale=None):
        self.cfg = cfg
        self.n_features = n_features
        self.enc_hidden = nn.Linear(n_features, cfg.hidden, rng)
        self.enc_mu = nn.Linear(cfg.hidden, cfg.latent_dim, rng)
        self.enc_logvar = nn.Linear(cfg.hidden, cfg.latent_dim, rng)
        self.decoder = nn.MLP([cfg.latent_dim, cfg.hidden, n_features], rng, act="relu")
        self.shift = np.zeros(n_features) if shift is None else np.asarray(shift, dtype=np.float64)
        self.scale = np.ones(n_features) if scale is None else np.asarray(scale, dtype=np.float64)

    @property
    def latent_dim(self) -> int:
        return self.cfg.latent_dim

    def encode(self, x: Tensor) -> tuple[Tensor, Tensor]:
        h = T.relu(self.enc_hidden(x))
        return self.enc_mu(h), self.enc_logvar(h)

    def metadata(self) -> dict:
        return {
            "n_features": self.n_features,
            "shift": self.shift.tolist(),
            "scale": self.scale.tolist(),
            "config": _cfg_dict(self.cfg),
        }


def build_model(n_features: int, meta: dict) -> TvaeModel:
    cfg = TvaeConfig(**meta["config"])
    return TvaeModel(n_features, cfg, np.random.default_rng(0), np.array(meta["shift"]), np.array(meta["scale"]))


def elbo_terms(model: TvaeModel, x: Tensor, eps: np.ndarray) -> tuple[Tensor, Tensor]:
    """(reconstruction, KL), both per-row sums averaged over the batch.

    Reconstruction is the squared error summed over features; the
    reparameterised latent is ``mu + exp(logvar / 2) * eps``.
    """
    mu, logvar = model.encode(x)
    z = mu + T.exp(logvar * 0.5) * eps
    recon = T.mse(model.decoder(z), x) * float(model.n_features)
    kl_rows = (mu * mu + T.exp(logvar) - logvar - 1.0).sum(axis=-1) * 0.5
    return recon, kl_rows.mean()


def tvae_train(x_minority: np.ndarray, cfg: TvaeConfig, rng: np.random.Generator) -> tuple[TvaeModel, TrainTrace]:
    x = np.asarray(x_minority, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise EmptyMinority("TVAE training needs at least one minority row")
    n, p = x.shape
    shift = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    model = TvaeModel(p, cfg, rng, shift, scale)
    data = ((x - shift) / scale).astype(np.float32)
    opt = nn.Adam(model.parameters(), lr=cfg.lr)
    trace = TrainTrace(("loss", "reconstruction", "kl"))
    for epoch in range(cfg.epochs):
        tot = rec = kl = 0.0
        batches = _batches(n, cfg.batch_size, rng)
        for idx in batches:
            xb = Tensor(data[idx])
            eps = rng.standard_normal((len(idx), cfg.latent_dim)).astype(np.float32)
            r, k = elbo_terms(model, xb, eps)
            loss = r + k * cfg.beta
            opt.zero_grad()
            loss.backward()
            opt.step()
            tot += loss.item()
            rec += r.item()
            kl += k.item()
        m = len(batches)
        trace.append(tot / m, rec / m, kl / m)
        if not np.all(np.isfinite(trace.rows[-1])):
            raise DivergenceDetected(f"non-finite TVAE loss at epoch {epoch + 1}", trace)
    return model, trace


def tvae_sample(model: TvaeModel, n: int, rng: np.random.Generator) -> np.ndarray:
    if n <= 0:
        return np.empty((0, model.n_features))
    out = []
    with T.no_grad():
        for start in range(0, n, model.cfg.sample_batch):
            m = min(model.cfg.sample_batch, n - start)
            z = Tensor(rng.standard_normal((m, model.latent_dim)))
            out.append(model.decoder(z).data)
    return np.concatenate(out).astype(np.float64) * model.scale + model.shift
