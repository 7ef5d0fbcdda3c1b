"""Small reverse-mode NN engine: hand-chained layers, MSE loss, SGD.

Layer functions follow a forward/backward pair convention: ``*_forward``
returns ``(out, cache)`` and ``*_backward(dout, cache)`` returns the input
gradient, writing parameter gradients into the owning :class:`Param`.
Layers work in whatever float dtype they are fed.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels


class Param:
    """A trainable array with its gradient and momentum buffers."""

    def __init__(self, value):
        self.value = np.ascontiguousarray(value)
        self.grad = np.zeros_like(self.value)
        self.velocity = None

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0

    def __repr__(self):
        return f"Param(shape={self.shape}, dtype={self.value.dtype})"


@dataclass
class LinearParams:
    weight: Param  # (out, in)
    bias: Param  # (out,)

    def params(self):
        return [self.weight, self.bias]


@dataclass
class ConvParams:
    kernels: Param  # (out_ch, in_ch, k, k)
    bias: Param  # (out_ch,)

    def params(self):
        return [self.kernels, self.bias]


def init_linear(n_in: int, n_out: int, rng: np.random.Generator, dtype=np.float32) -> LinearParams:
    """Uniform(-1/sqrt(n_in), 1/sqrt(n_in)) weights and biases."""
    bound = 1.0 / np.sqrt(n_in)
    w = rng.uniform(-bound, bound, size=(n_out, n_in)).astype(dtype)
    b = rng.uniform(-bound, bound, size=n_out).astype(dtype)
    return LinearParams(Param(w), Param(b))


def init_conv(in_ch: int, out_ch: int, k: int, rng: np.random.Generator, dtype=np.float32) -> ConvParams:
    bound = 1.0 / np.sqrt(in_ch * k * k)
    w = rng.uniform(-bound, bound, size=(out_ch, in_ch, k, k)).astype(dtype)
    b = rng.uniform(-bound, bound, size=out_ch).astype(dtype)
    return ConvParams(Param(w), Param(b))


def linear_forward(x, p: LinearParams):
    w = p.weight.value
    if x.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ValueError(f"linear layer expects (batch, {w.shape[1]}), got {x.shape}")
    return x @ w.T + p.bias.value, x


def linear_backward(dout, cache, p: LinearParams):
    x = cache
    p.weight.grad += dout.T @ x
    p.bias.grad += dout.sum(axis=0)
    return dout @ p.weight.value


def conv2d_forward(x, p: ConvParams):
    """Valid cross-correlation, stride 1, no padding."""
    w = p.kernels.value
    k = w.shape[2]
    if x.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ValueError(f"conv layer expects (batch, {w.shape[1]}, h, w), got {x.shape}")
    if x.shape[2] < k or x.shape[3] < k:
        raise ValueError(f"input {x.shape[2]}x{x.shape[3]} smaller than {k}x{k} kernel")
    x = np.ascontiguousarray(x)
    return _kernels.conv2d_forward(x, w, p.bias.value), x


def conv2d_backward(dout, cache, p: ConvParams):
    x = cache
    dx, dw, db = _kernels.conv2d_backward(np.ascontiguousarray(dout), x, p.kernels.value)
    p.kernels.grad += dw
    p.bias.grad += db
    return dx


def maxpool2x2_forward(x):
    if x.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
        raise ValueError(f"2x2 max-pool needs even spatial dims, got {x.shape}")
    out, arg = _kernels.maxpool2x2_forward(np.ascontiguousarray(x))
    return out, arg


def maxpool2x2_backward(dout, cache):
    return _kernels.maxpool2x2_backward(np.ascontiguousarray(dout), cache)


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, cache):
    return dout * cache


def mse_loss(pred, target):
    """Mean over every element; returns ``(loss, dpred)``."""
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff, dtype=np.float64))
    return loss, (2.0 / diff.size) * diff


def zero_grads(params):
    for p in params:
        p.zero_grad()


def sgd_step(params, lr: float, momentum: float = 0.0):
    """Heavy-ball SGD: ``v = momentum * v + g; w -= lr * v``."""
    for p in params:
        g = p.grad
        if momentum:
            if p.velocity is None:
                p.velocity = g.copy()
            else:
                p.velocity *= p.value.dtype.type(momentum)
                p.velocity += g
            g = p.velocity
        p.value -= p.value.dtype.type(lr) * g


def reset_momentum(params):
    for p in params:
        p.velocity = None


# -- checkpoints ---------------------------------------------------------

CHECKPOINT_MAGIC = b"NNWT"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Malformed or incompatible weight checkpoint."""


def dumps_weights(arrays) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<4sII", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(arrays)))
    for a in arrays:
        a = np.asarray(a)
        buf.write(struct.pack(f"<I{a.ndim}I", a.ndim, *a.shape))
        buf.write(a.astype("<f4").tobytes())
    return buf.getvalue()


def loads_weights(data: bytes) -> list[np.ndarray]:
    def take(fmt):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(data):
            raise CheckpointError(f"checkpoint truncated at byte {offset}, need {size} more")
        values = struct.unpack_from(fmt, data, offset)
        offset += size
        return values

    offset = 0
    magic, version, count = take("<4sII")
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    arrays = []
    for _ in range(count):
        (rank,) = take("<I")
        dims = take(f"<{rank}I")
        size = int(np.prod(dims, dtype=np.int64)) * 4
        if offset + size > len(data):
            raise CheckpointError(f"checkpoint truncated: tensor needs {size} bytes, {len(data) - offset} left")
        arrays.append(np.frombuffer(data, dtype="<f4", count=size // 4, offset=offset)
                      .reshape(dims).astype(np.float32))
        offset += size
    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes after last tensor")
    return arrays


def save_weights(params, path) -> None:
    Path(path).write_bytes(dumps_weights([p.value for p in params]))


def load_weights(path) -> list[np.ndarray]:
    return loads_weights(Path(path).read_bytes())


def assign_weights(params, arrays) -> None:
    if len(arrays) != len(params):
        raise CheckpointError(f"checkpoint has {len(arrays)} tensors, model expects {len(params)}")
    for i, (p, a) in enumerate(zip(params, arrays)):
        if a.shape != p.shape:
            raise CheckpointError(f"tensor {i}: checkpoint shape {a.shape} != model shape {p.shape}")
    for p, a in zip(params, arrays):
        p.value = a.astype(p.value.dtype, copy=True)
        p.grad = np.zeros_like(p.value)
        p.velocity = None
