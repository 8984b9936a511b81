"""Layers and the Adam optimizer on top of :mod:`fraudforge.tensor`."""

from __future__ import annotations

import math
from typing import Iterator, Sequence

import numpy as np

from . import tensor as T
from .errors import MissingGrad, ShapeMismatch
from .tensor import Tensor


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Module:
    """Parameter container. Parameters are discovered from attributes in
    definition order, which keeps checkpoints and optimizer state stable."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.in_dim, self.out_dim = in_dim, out_dim
        self.weight = Tensor(glorot_uniform(in_dim, out_dim, rng), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeMismatch(f"Linear expects last dim {self.in_dim}, got {x.shape}")
        return x @ self.weight + self.bias


class LayerNorm(Module):
    eps = 1e-5

    def __init__(self, dim: int):
        self.dim = dim
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.shift = Tensor(np.zeros(dim), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.dim:
            raise ShapeMismatch(f"LayerNorm expects last dim {self.dim}, got {x.shape}")
        centered = x - x.mean(axis=-1, keepdims=True)
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered * T.power(var + self.eps, -0.5) * self.gain + self.shift


class MLP(Module):
    """Stack of Linear layers with one hidden activation between each pair."""

    def __init__(self, dims: Sequence[int], rng: np.random.Generator, act: str = "relu"):
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.act = act

    def forward(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = T.activation(self.act, x)
        return x


class MultiHeadSelfAttention(Module):
    """Unmasked scaled dot-product attention over the token axis."""

    def __init__(self, dim: int, num_heads: int, rng: np.random.Generator):
        if dim % num_heads:
            raise ShapeMismatch(f"model dim {dim} not divisible by {num_heads} heads")
        self.dim, self.num_heads = dim, num_heads
        self.head_dim = dim // num_heads
        self.w_q = Linear(dim, dim, rng)
        self.w_k = Linear(dim, dim, rng)
        self.w_v = Linear(dim, dim, rng)
        self.w_o = Linear(dim, dim, rng)

    def _split(self, x: Tensor) -> Tensor:
        b, n, _ = x.shape
        return x.reshape(b, n, self.num_heads, self.head_dim).transpose(0, 2, 1, 3)

    def attention_weights(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Return (weights[b, heads, tokens, tokens], values[b, heads, tokens, head_dim])."""
        if x.ndim != 3 or x.shape[-1] != self.dim:
            raise ShapeMismatch(f"attention expects [batch, tokens, {self.dim}], got {x.shape}")
        q = self._split(self.w_q(x))
        k = self._split(self.w_k(x))
        v = self._split(self.w_v(x))
        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(self.head_dim))
        return T.softmax(scores, axis=-1), v

    def forward(self, x: Tensor) -> Tensor:
        b, n, _ = x.shape
        weights, v = self.attention_weights(x)
        heads = (weights @ v).transpose(0, 2, 1, 3).reshape(b, n, self.dim)
        return self.w_o(heads)


class TransformerEncoderBlock(Module):
    """Post-norm encoder layer: norm(x + attn(x)), then norm(x + ffn(x))."""

    def __init__(self, dim: int, num_heads: int, ffn_hidden: int, rng: np.random.Generator):
        self.attention = MultiHeadSelfAttention(dim, num_heads, rng)
        self.ffn_in = Linear(dim, ffn_hidden, rng)
        self.ffn_out = Linear(ffn_hidden, dim, rng)
        self.norm1 = LayerNorm(dim)
        self.norm2 = LayerNorm(dim)

    def forward(self, x: Tensor) -> Tensor:
        x = self.norm1(x + self.attention(x))
        return self.norm2(x + self.ffn_out(T.gelu(self.ffn_in(x))))


class SEBlock(Module):
    """Squeeze-and-excitation gate over the last axis.

    Rows are already channel descriptors, so the squeeze step is the
    identity; the excitation MLP produces a per-channel sigmoid gate.
    """

    def __init__(self, dim: int, rng: np.random.Generator, reduction: int = 4):
        if dim % reduction:
            raise ShapeMismatch(f"SE dim {dim} not divisible by reduction {reduction}")
        self.reduction = reduction
        self.fc_reduce = Linear(dim, dim // reduction, rng)
        self.fc_expand = Linear(dim // reduction, dim, rng)

    def gate(self, x: Tensor) -> Tensor:
        return T.sigmoid(self.fc_expand(T.relu(self.fc_reduce(x))))

    def forward(self, x: Tensor) -> Tensor:
        return x * self.gate(x)


class Adam:
    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        missing = [i for i, p in enumerate(self.params) if p.grad is None]
        if missing:
            raise MissingGrad(f"{len(missing)} parameter(s) have no gradient")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            step = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data -= step.astype(p.data.dtype)
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
