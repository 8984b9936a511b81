"""GAN with a Transformer-encoder generator for tabular minority rows.

Generator: latent noise is projected to one token per feature, a learned
per-feature embedding is added, the tokens pass through post-norm encoder
blocks and a squeeze-and-excitation gate, and a linear head maps the
flattened tokens back to one value per feature.

Discriminator: MLP ``n -> 128 -> 64 -> 1``. A reconstruction decoder
(``64 -> 64 -> n``) rebuilds the generator's output from the discriminator's
penultimate features; its MSE is added to both players' losses.

Samples come from an exponential moving average of the generator weights.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import nn
from .. import tensor as T
from ..errors import DivergenceDetected, EmptyMinority
from ..tensor import Tensor


@dataclass
class GanConfig:
    latent_dim: int = 32
    model_dim: int = 64
    num_heads: int = 4
    num_blocks: int = 2
    ffn_hidden: int = 128
    se_reduction: int = 4
    epochs: int = 300
    batch_size: int = 64
    lr_generator: float = 5e-5
    lr_discriminator: float = 2e-4
    ema_decay: float = 0.99
    betas: tuple[float, float] = (0.5, 0.999)
    recon_weight: float = 0.1
    # None: use a sigmoid head iff every training value lies in [0, 1]
    output_sigmoid: Optional[bool] = None
    sample_batch: int = 512


@dataclass
class TrainTrace:
    columns: tuple[str, ...]
    rows: list[tuple[float, ...]] = field(default_factory=list)

    def append(self, *values: float) -> None:
        self.rows.append(tuple(float(v) for v in values))

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self) -> str:
        lines = [",".join(("epoch",) + self.columns)]
        for i, r in enumerate(self.rows, start=1):
            lines.append(",".join([str(i)] + [repr(v) for v in r]))
        return "\n".join(lines) + "\n"


class Generator(nn.Module):
    def __init__(self, n_features: int, cfg: GanConfig, rng: np.random.Generator, sigmoid: bool):
        self.n_features = n_features
        self.latent_dim = cfg.latent_dim
        self.model_dim = cfg.model_dim
        self.sigmoid = sigmoid
        self.noise_proj = nn.Linear(cfg.latent_dim, n_features * cfg.model_dim, rng)
        self.feature_embeddings = Tensor(
            rng.normal(0.0, 0.02, size=(n_features, cfg.model_dim)), requires_grad=True
        )
        self.encoder_blocks = [
            nn.TransformerEncoderBlock(cfg.model_dim, cfg.num_heads, cfg.ffn_hidden, rng)
            for _ in range(cfg.num_blocks)
        ]
        self.se_gate = nn.SEBlock(cfg.model_dim, rng, cfg.se_reduction)
        self.output_head = nn.Linear(n_features * cfg.model_dim, n_features, rng)

    def forward(self, z: Tensor) -> Tensor:
        b = z.shape[0]
        tokens = self.noise_proj(z).reshape(b, self.n_features, self.model_dim)
        h = tokens + self.feature_embeddings
        for block in self.encoder_blocks:
            h = block(h)
        h = self.se_gate(h)
        out = self.output_head(h.reshape(b, self.n_features * self.model_dim))
        return T.sigmoid(out) if self.sigmoid else out


class Discriminator(nn.Module):
    def __init__(self, n_features: int, rng: np.random.Generator):
        self.fc1 = nn.Linear(n_features, 128, rng)
        self.fc2 = nn.Linear(128, 64, rng)
        self.fc3 = nn.Linear(64, 1, rng)

    def features(self, x: Tensor) -> Tensor:
        return T.leaky_relu(self.fc2(T.leaky_relu(self.fc1(x))))

    def forward_with_features(self, x: Tensor) -> tuple[Tensor, Tensor]:
        h = self.features(x)
        return h, self.fc3(h)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc3(self.features(x))


class GanTransformerModel(nn.Module):
    kind = "gan_transformer"

    def __init__(
        self,
        n_features: int,
        cfg: GanConfig,
        rng: np.random.Generator,
        sigmoid: bool = False,
        shift: Optional[np.ndarray] = None,
        scale: Optional[np.ndarray] = None,
    ):
        self.cfg = cfg
        self.generator = Generator(n_features, cfg, rng, sigmoid)
        self.generator_ema = copy.deepcopy(self.generator)
        self.discriminator = Discriminator(n_features, rng)
        self.recon_decoder = nn.MLP([64, 64, n_features], rng, act="relu")
        # affine map from model space back to data space
        self.shift = np.zeros(n_features) if shift is None else np.asarray(shift, dtype=np.float64)
        self.scale = np.ones(n_features) if scale is None else np.asarray(scale, dtype=np.float64)

    @property
    def n_features(self) -> int:
        return self.generator.n_features

    @property
    def latent_dim(self) -> int:
        return self.generator.latent_dim

    def to_model_space(self, x: np.ndarray) -> np.ndarray:
        return (x - self.shift) / self.scale

    def to_data_space(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=np.float64) * self.scale + self.shift

    def metadata(self) -> dict:
        return {
            "n_features": self.n_features,
            "sigmoid": self.generator.sigmoid,
            "shift": self.shift.tolist(),
            "scale": self.scale.tolist(),
            "config": _cfg_dict(self.cfg),
        }


def _cfg_dict(cfg) -> dict:
    out = dict(vars(cfg))
    for k, v in out.items():
        if isinstance(v, tuple):
            out[k] = list(v)
    return out


def build_model(n_features: int, meta: dict) -> GanTransformerModel:
    """Recreate an (untrained) model skeleton from checkpoint metadata."""
    cfg_d = dict(meta["config"])
    cfg_d["betas"] = tuple(cfg_d["betas"])
    cfg = GanConfig(**cfg_d)
    return GanTransformerModel(
        n_features,
        cfg,
        np.random.default_rng(0),
        sigmoid=meta["sigmoid"],
        shift=np.array(meta["shift"]),
        scale=np.array(meta["scale"]),
    )


def _batches(n: int, batch: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Drop-last minibatches; a minority smaller than one batch is resampled
    with replacement into a single full batch."""
    if n < batch:
        return [rng.integers(0, n, size=batch)]
    perm = rng.permutation(n)
    return [perm[i : i + batch] for i in range(0, n - batch + 1, batch)]


def discriminator_loss(model: GanTransformerModel, real: Tensor, fake: Tensor, recon_weight: float):
    """Returns (total, adversarial, reconstruction). ``fake`` should be detached."""
    d = model.discriminator
    real_logit = d(real)
    feat, fake_logit = d.forward_with_features(fake)
    adv = (
        T.bce_with_logits(real_logit, np.ones(real_logit.shape))
        + T.bce_with_logits(fake_logit, np.zeros(fake_logit.shape))
    ) * 0.5
    rec = T.mse(model.recon_decoder(feat), fake.detach())
    return adv + rec * recon_weight, adv, rec


def generator_loss(model: GanTransformerModel, z: Tensor, recon_weight: float, recon_target=None):
    """Non-saturating adversarial loss plus the reconstruction term.

    The reconstruction target is the generator output with gradients
    stopped; ``recon_target`` pins it to a fixed array instead (used by
    gradient checks, where finite differences would otherwise move it).
    """
    fake = model.generator(z)
    feat, logit = model.discriminator.forward_with_features(fake)
    adv = T.bce_with_logits(logit, np.ones(logit.shape))
    target = fake.detach() if recon_target is None else recon_target
    rec = T.mse(model.recon_decoder(feat), target)
    return adv + rec * recon_weight, adv, rec


def gan_train(
    x_minority: np.ndarray, cfg: GanConfig, rng: np.random.Generator
) -> tuple[GanTransformerModel, TrainTrace]:
    x = np.asarray(x_minority, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise EmptyMinority("GAN training needs at least one minority row")
    n, p = x.shape
    sigmoid = cfg.output_sigmoid
    if sigmoid is None:
        sigmoid = bool(x.min() >= 0.0 and x.max() <= 1.0)
    if sigmoid:
        shift, scale = np.zeros(p), np.ones(p)
    else:
        shift = x.mean(axis=0)
        scale = x.std(axis=0)
        scale[scale == 0] = 1.0
    model = GanTransformerModel(p, cfg, rng, sigmoid=sigmoid, shift=shift, scale=scale)
    data = model.to_model_space(x).astype(np.float32)

    g_params = model.generator.parameters()
    d_params = model.discriminator.parameters() + model.recon_decoder.parameters()
    ema_params = model.generator_ema.parameters()
    opt_g = nn.Adam(g_params, lr=cfg.lr_generator, betas=cfg.betas)
    opt_d = nn.Adam(d_params, lr=cfg.lr_discriminator, betas=cfg.betas)
    decay = np.float32(cfg.ema_decay)
    trace = TrainTrace(("generator_loss", "discriminator_loss", "reconstruction_loss"))

    for epoch in range(cfg.epochs):
        g_sum = d_sum = r_sum = 0.0
        batches = _batches(n, cfg.batch_size, rng)
        for idx in batches:
            real = Tensor(data[idx])
            b = len(idx)
            with T.no_grad():
                fake = model.generator(Tensor(rng.standard_normal((b, cfg.latent_dim))))
            opt_d.zero_grad()
            d_total, d_adv, d_rec = discriminator_loss(model, real, fake, cfg.recon_weight)
            d_total.backward()
            opt_d.step()

            z = Tensor(rng.standard_normal((b, cfg.latent_dim)))
            g_total, g_adv, g_rec = generator_loss(model, z, cfg.recon_weight)
            opt_g.zero_grad()
            g_total.backward()
            opt_g.step()
            opt_d.zero_grad()
            for e, q in zip(ema_params, g_params):
                e.data *= decay
                e.data += (1 - decay) * q.data

            g_sum += g_adv.item()
            d_sum += d_adv.item()
            r_sum += 0.5 * (d_rec.item() + g_rec.item())
        k = len(batches)
        trace.append(g_sum / k, d_sum / k, r_sum / k)
        if not np.all(np.isfinite(trace.rows[-1])):
            raise DivergenceDetected(f"non-finite GAN loss at epoch {epoch + 1}", trace)
    return model, trace


def gan_sample(model: GanTransformerModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` rows in data space."""
    if n <= 0:
        return np.empty((0, model.n_features))
    chunk = max(1, model.cfg.sample_batch)
    out = []
    with T.no_grad():
        for start in range(0, n, chunk):
            m = min(chunk, n - start)
            z = Tensor(rng.standard_normal((m, model.latent_dim)))
            out.append(model.generator_ema(z).data)
    return model.to_data_space(np.concatenate(out))
