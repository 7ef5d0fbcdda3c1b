"""Pure-numpy reference kernels.

Every function here has a loop-level twin in ``_numba``; both must agree to
floating-point rounding.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def matmul(a, b):
    return np.ascontiguousarray(a @ b)


def matvec(a, x):
    return a @ x


def dct_direct(patch):
    n = patch.shape[0]
    idx = np.arange(n)
    # cos_table[m, p] = cos(pi * (2m + 1) * p / 2n)
    cos_table = np.cos(np.pi * np.outer(2 * idx + 1, idx) / (2 * n))
    alpha = np.full(n, np.sqrt(2.0 / n))
    alpha[0] = np.sqrt(1.0 / n)
    terms = (patch[:, :, None, None]
             * cos_table[:, None, :, None]
             * cos_table[None, :, None, :])
    return alpha[:, None] * alpha[None, :] * terms.sum(axis=(0, 1))


def separable_batch(t, x):
    """Apply ``t @ x[i] @ t.T`` to every grid of a (count, n, n) stack."""
    return np.matmul(np.matmul(t, x), t.T)


def conv2d_forward(x, w, b):
    k = w.shape[2]
    win = sliding_window_view(x, (k, k), axis=(2, 3))  # (B, C, Ho, Wo, k, k)
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (B, Ho, Wo, O)
    out = out.transpose(0, 3, 1, 2) + b[None, :, None, None]
    return np.ascontiguousarray(out)


def conv2d_backward(dout, x, w):
    k = w.shape[2]
    win = sliding_window_view(x, (k, k), axis=(2, 3))
    dw = np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))
    db = dout.sum(axis=(0, 2, 3))
    padded = np.pad(dout, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
    dwin = sliding_window_view(padded, (k, k), axis=(2, 3))  # (B, O, H, W, k, k)
    flipped = w[:, :, ::-1, ::-1]
    dx = np.tensordot(dwin, flipped, axes=([1, 4, 5], [0, 2, 3]))  # (B, H, W, C)
    return np.ascontiguousarray(dx.transpose(0, 3, 1, 2)), dw, db


def maxpool2x2_forward(x):
    bsz, ch, h, w = x.shape
    blocks = (x.reshape(bsz, ch, h // 2, 2, w // 2, 2)
              .transpose(0, 1, 2, 4, 3, 5)
              .reshape(bsz, ch, h // 2, w // 2, 4))
    # argmax returns the first maximum, i.e. row-major tie-breaking
    arg = blocks.argmax(axis=-1).astype(np.int8)
    out = np.take_along_axis(blocks, arg[..., None].astype(np.intp), axis=-1)[..., 0]
    return out, arg


def maxpool2x2_backward(dout, arg):
    bsz, ch, ho, wo = dout.shape
    onehot = arg[..., None] == np.arange(4, dtype=np.int8)
    blocks = onehot * dout[..., None]
    dx = (blocks.reshape(bsz, ch, ho, wo, 2, 2)
          .transpose(0, 1, 2, 4, 3, 5)
          .reshape(bsz, ch, 2 * ho, 2 * wo))
    return np.ascontiguousarray(dx)
