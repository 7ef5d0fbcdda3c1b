"""The two fixed architectures: a LeNet-style CNN and an MLP over DCT coefficients.

Both end in a plain linear layer; scores are trained against one-hot targets
with MSE and classified by argmax, no softmax.
"""
from __future__ import annotations

import numpy as np

from . import nn


class Model:
    kind: str
    layer_names: tuple

    def params(self) -> list[nn.Param]:
        out = []
        for name in self.layer_names:
            out.extend(getattr(self, name).params())
        return out

    def zero_grad(self):
        nn.zero_grads(self.params())

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dout, cache):
        raise NotImplementedError

    def scores(self, x):
        return self.forward(x)[0]

    def predict(self, x) -> np.ndarray:
        """Class per sample; ``np.argmax`` resolves ties to the lowest index."""
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.ndim == 3:
            x = x[:, None]
        return self.scores(x).argmax(axis=1)

    @property
    def dtype(self):
        return self.params()[0].value.dtype

    def state(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.params()]

    def load_state(self, arrays):
        nn.assign_weights(self.params(), arrays)

    def num_params(self) -> int:
        return sum(p.value.size for p in self.params())


def _check_input(x, expected):
    if x.ndim != 4 or x.shape[1:] != expected:
        raise ValueError(f"expected input of shape (batch, {', '.join(map(str, expected))}), got {x.shape}")


class LeNet(Model):
    kind = "lenet"
    layer_names = ("conv1", "conv2", "fc1", "fc2", "fc3")

    def __init__(self, seed: int = 1, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.conv1 = nn.init_conv(1, 6, 5, rng, dtype)
        self.conv2 = nn.init_conv(6, 16, 5, rng, dtype)
        self.fc1 = nn.init_linear(16 * 5 * 5, 120, rng, dtype)
        self.fc2 = nn.init_linear(120, 84, rng, dtype)
        self.fc3 = nn.init_linear(84, 10, rng, dtype)

    def forward(self, x):
        _check_input(x, (1, 32, 32))
        h, c1 = nn.conv2d_forward(x, self.conv1)        # 28x28
        h, r1 = nn.relu_forward(h)
        h, p1 = nn.maxpool2x2_forward(h)                # 14x14
        h, c2 = nn.conv2d_forward(h, self.conv2)        # 10x10
        h, r2 = nn.relu_forward(h)
        h, p2 = nn.maxpool2x2_forward(h)                # 5x5
        flat = h.reshape(len(h), -1)
        assert flat.shape[1] == 400
        h, f1 = nn.linear_forward(flat, self.fc1)
        h, r3 = nn.relu_forward(h)
        h, f2 = nn.linear_forward(h, self.fc2)
        h, r4 = nn.relu_forward(h)
        out, f3 = nn.linear_forward(h, self.fc3)
        return out, (c1, r1, p1, c2, r2, p2, f1, r3, f2, r4, f3)

    def backward(self, dout, cache):
        c1, r1, p1, c2, r2, p2, f1, r3, f2, r4, f3 = cache
        d = nn.linear_backward(dout, f3, self.fc3)
        d = nn.relu_backward(d, r4)
        d = nn.linear_backward(d, f2, self.fc2)
        d = nn.relu_backward(d, r3)
        d = nn.linear_backward(d, f1, self.fc1)
        d = d.reshape(len(d), 16, 5, 5)
        d = nn.maxpool2x2_backward(d, p2)
        d = nn.relu_backward(d, r2)
        d = nn.conv2d_backward(d, c2, self.conv2)
        d = nn.maxpool2x2_backward(d, p1)
        d = nn.relu_backward(d, r1)
        return nn.conv2d_backward(d, c1, self.conv1)


class DctMlp(Model):
    kind = "dct_mlp"
    layer_names = ("fc1", "fc2", "fc3")

    def __init__(self, seed: int = 1, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.fc1 = nn.init_linear(32 * 32, 350, rng, dtype)
        self.fc2 = nn.init_linear(350, 104, rng, dtype)
        self.fc3 = nn.init_linear(104, 10, rng, dtype)

    def forward(self, x):
        _check_input(x, (1, 32, 32))
        h, f1 = nn.linear_forward(x.reshape(len(x), -1), self.fc1)
        h, r1 = nn.relu_forward(h)
        h, f2 = nn.linear_forward(h, self.fc2)
        h, r2 = nn.relu_forward(h)
        out, f3 = nn.linear_forward(h, self.fc3)
        return out, (x.shape, f1, r1, f2, r2, f3)

    def backward(self, dout, cache):
        shape, f1, r1, f2, r2, f3 = cache
        d = nn.linear_backward(dout, f3, self.fc3)
        d = nn.relu_backward(d, r2)
        d = nn.linear_backward(d, f2, self.fc2)
        d = nn.relu_backward(d, r1)
        return nn.linear_backward(d, f1, self.fc1).reshape(shape)


MODELS = {"lenet": LeNet, "dct_mlp": DctMlp}


def build_model(kind: str, seed: int = 1, dtype=np.float32) -> Model:
    try:
        return MODELS[kind](seed=seed, dtype=dtype)
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(MODELS)}") from None


def model_from_weights(arrays, dtype=np.float32) -> Model:
    """Rebuild the architecture matching a checkpoint's tensor shapes."""
    for kind, cls in MODELS.items():
        model = cls(seed=0, dtype=dtype)
        if [p.shape for p in model.params()] == [a.shape for a in arrays]:
            model.load_state(arrays)
            return model
    raise nn.CheckpointError("checkpoint tensors match neither lenet nor dct_mlp")


def dump_first_layer_kernels(model: LeNet) -> list[np.ndarray]:
    """First-layer kernels as 5x5 images min-max scaled to [0, 1].

    A constant kernel has no range to stretch and maps to uniform 0.5.
    """
    images = []
    for kernel in model.conv1.kernels.value[:, 0].astype(np.float64):
        lo, hi = kernel.min(), kernel.max()
        if hi == lo:
            images.append(np.full_like(kernel, 0.5))
        else:
            images.append((kernel - lo) / (hi - lo))
    return images
