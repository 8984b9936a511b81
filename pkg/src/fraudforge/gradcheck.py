"""Central-difference gradient checking, the oracle for the autodiff core."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from . import nn
from . import tensor as T
from .tensor import Tensor


def finite_difference_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    eps: float = 1e-3,
    coords: Optional[Sequence[int]] = None,
    atol: float = 0.0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` must map ``x`` (possibly through closures over other tensors) to a
    scalar tensor. ``x.data`` is perturbed in place and restored.
    Per component the error is ``|a - n| / (|a| + 1e-8)``. ``coords``
    restricts the check to some flat indices of ``x`` (large parameters);
    components with ``|a - n| <= atol`` count as exact, for gradients that
    are zero by symmetry where only rounding noise remains.
    """
    x.requires_grad = True
    x.grad = None
    out = f(x)
    out.backward()
    analytic = np.array(x.grad, dtype=np.float64).reshape(-1)
    x.grad = None

    flat = x.data.reshape(-1)
    idx = np.arange(flat.size) if coords is None else np.asarray(coords, dtype=np.int64)
    if idx.size == 0:
        return 0.0
    numeric = np.empty(idx.size)
    for j, i in enumerate(idx):
        orig = flat[i]
        flat[i] = orig + eps
        up = float(f(x).data)
        flat[i] = orig - eps
        down = float(f(x).data)
        flat[i] = orig
        numeric[j] = (up - down) / (2 * eps)
    a = analytic[idx]
    diff = np.abs(a - numeric)
    rel = np.where(diff <= atol, 0.0, diff / (np.abs(a) + 1e-8))
    return float(rel.max())


def check_module(
    module: nn.Module,
    forward: Callable[[Tensor], Tensor],
    x: Tensor,
    rng: np.random.Generator,
    eps: float = 1e-3,
    max_coords: Optional[int] = None,
    atol: float = 0.0,
) -> dict[str, float]:
    """Check d(sum(forward(x) * r))/d(x and every parameter) for random ``r``.

    The random projection ``r`` avoids losses with structurally zero
    gradients (a layer norm output sums to a constant, for instance).
    """
    with T.no_grad():
        r = rng.standard_normal(forward(x).shape)

    def loss(_):
        out = forward(x)
        return (out * Tensor(r, dtype=out.data.dtype)).sum()

    def pick(t: Tensor):
        if max_coords is None or t.size <= max_coords:
            return None
        return rng.choice(t.size, size=max_coords, replace=False)

    errors = {"input": finite_difference_check(loss, x, eps, pick(x), atol)}
    for name, p in module.named_parameters():
        module.zero_grad()
        errors[name] = finite_difference_check(loss, p, eps, pick(p), atol)
    module.zero_grad()
    return errors


def block_checks(seed: int, eps: float = 1e-4, atol: float = 1e-10) -> dict[str, dict[str, float]]:
    """Relative gradient error per block and tensor (input or parameter).

    Runs in float64. The default step is 1e-4 rather than 1e-3: the O(eps^2)
    truncation error of a 1e-3 step is ~1e-10, which already exceeds 1e-3
    relative on components whose true gradient is ~1e-5. ``atol`` is the
    float64 rounding floor of a central difference (~1e-16 * |f| / eps); it
    only matters for the attention key bias, whose gradient is exactly zero
    because softmax ignores a shift shared by all keys.
    """
    from .classifiers.linear import lr_loss
    from .oversample.gan import GanConfig, GanTransformerModel, discriminator_loss, generator_loss

    rng = np.random.default_rng(seed)
    worst = {}
    with T.precision(np.float64):
        lin = nn.Linear(5, 3, rng)
        worst["linear"] = check_module(lin, lin, Tensor(rng.standard_normal((4, 5))), rng, eps, atol=atol)

        ln = nn.LayerNorm(6)
        ln.gain.data = rng.uniform(0.5, 1.5, 6)
        ln.shift.data = rng.standard_normal(6)
        worst["layer_norm"] = check_module(ln, ln, Tensor(rng.standard_normal((2, 3, 6))), rng, eps, atol=atol)

        attn = nn.MultiHeadSelfAttention(8, 2, rng)
        worst["attention"] = check_module(attn, attn, Tensor(rng.standard_normal((2, 3, 8))), rng, eps, atol=atol)

        block = nn.TransformerEncoderBlock(8, 2, 16, rng)
        worst["encoder_block"] = check_module(block, block, Tensor(rng.standard_normal((2, 3, 8))), rng, eps, atol=atol)

        se = nn.SEBlock(8, rng, reduction=4)
        worst["se_block"] = check_module(se, se, Tensor(rng.standard_normal((4, 8))), rng, eps, atol=atol)

        pred = Tensor(rng.standard_normal((6, 1)) * 3)
        target = rng.uniform(0, 1, (6, 1))
        worst["bce_with_logits"] = {"pred": finite_difference_check(lambda p: T.bce_with_logits(p, target), pred, eps)}
        worst["mse"] = {"pred": finite_difference_check(lambda p: T.mse(p, target), pred, eps)}

        x = Tensor(rng.standard_normal((10, 4)))
        y = (rng.random(10) < 0.5).astype(np.float64)
        w = Tensor(rng.standard_normal((4, 1)) * 0.5)
        b = Tensor(rng.standard_normal(1) * 0.1)
        worst["lr_loss"] = {
            "w": finite_difference_check(lambda w_: lr_loss(w_, b, x, y), w, eps),
            "b": finite_difference_check(lambda b_: lr_loss(w, b_, x, y), b, eps),
        }

    return worst


def gan_step_check(seed: int, eps: float = 1e-5, atol: float = 0.0) -> dict[str, float]:
    """Gradient check of both players' losses on a tiny 2-feature GAN.

    ReLU and leaky-ReLU kinks sit close enough to some pre-activations that a
    1e-3 step can straddle one, so this composite check uses a smaller step
    (float64 keeps the differences accurate) at a generic point: biases are
    drawn at random instead of the zero init, which would park many
    pre-activations right at a kink. The reconstruction target is held at
    its baseline value, matching the stop-gradient in the loss.
    """
    from .oversample.gan import GanConfig, GanTransformerModel, discriminator_loss, generator_loss

    rng = np.random.default_rng(seed)
    out = {}
    with T.precision(np.float64):
        cfg = GanConfig(latent_dim=3, model_dim=4, num_heads=2, num_blocks=1, ffn_hidden=8, se_reduction=2)
        model = GanTransformerModel(2, cfg, rng, sigmoid=False, shift=np.zeros(2), scale=np.ones(2))
        for name, p in model.named_parameters():
            if name.endswith("bias"):
                p.data = rng.normal(0.0, 0.5, p.shape)
        real = Tensor(rng.standard_normal((4, 2)))
        z = Tensor(rng.standard_normal((4, 3)))
        with T.no_grad():
            fake = model.generator(z)
        target = fake.data.copy()
        for name, p in model.generator.named_parameters("generator."):
            model.zero_grad()
            out[name] = finite_difference_check(
                lambda _: generator_loss(model, z, cfg.recon_weight, recon_target=target)[0], p, eps, atol=atol
            )
        d_params = list(model.discriminator.named_parameters("discriminator."))
        d_params += list(model.recon_decoder.named_parameters("recon_decoder."))
        for name, p in d_params:
            model.zero_grad()
            coords = None if p.size <= 32 else rng.choice(p.size, size=32, replace=False)
            out[name] = finite_difference_check(
                lambda _: discriminator_loss(model, real, fake, cfg.recon_weight)[0], p, eps, coords, atol
            )
        model.zero_grad()
    return out
