"""Loop kernels compiled with numba. Signatures mirror ``_numpy``."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def matmul(a, b):
    n, kdim = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=a.dtype)
    # i-k-j order keeps the inner loop on contiguous rows of b and out
    for i in range(n):
        for k in range(kdim):
            aik = a[i, k]
            for j in range(m):
                out[i, j] += aik * b[k, j]
    return out


@njit(cache=True)
def matvec(a, x):
    n, m = a.shape
    out = np.empty(n, dtype=a.dtype)
    for i in range(n):
        acc = 0.0
        for j in range(m):
            acc += a[i, j] * x[j]
        out[i] = acc
    return out


@njit(cache=True)
def dct_direct(patch):
    n = patch.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for p in range(n):
        ap = math.sqrt(1.0 / n) if p == 0 else math.sqrt(2.0 / n)
        for q in range(n):
            aq = math.sqrt(1.0 / n) if q == 0 else math.sqrt(2.0 / n)
            acc = 0.0
            for m in range(n):
                cm = math.cos(math.pi * (2 * m + 1) * p / (2 * n))
                for k in range(n):
                    acc += patch[m, k] * cm * math.cos(math.pi * (2 * k + 1) * q / (2 * n))
            out[p, q] = ap * aq * acc
    return out


@njit(cache=True)
def separable_batch(t, x):
    count, n, _ = x.shape
    tt = np.ascontiguousarray(t.T)
    out = np.empty((count, n, n), dtype=x.dtype)
    for s in range(count):
        out[s] = matmul(matmul(t, x[s]), tt)
    return out


@njit(cache=True)
def _im2col(x, k):
    # rows index (c, i, j), columns index (n, r, s)
    bsz, cin, h, wd = x.shape
    ho = h - k + 1
    wo = wd - k + 1
    cols = np.empty((cin * k * k, bsz * ho * wo), dtype=x.dtype)
    for c in range(cin):
        for i in range(k):
            for j in range(k):
                row = (c * k + i) * k + j
                for n in range(bsz):
                    base = n * ho * wo
                    for r in range(ho):
                        for s in range(wo):
                            cols[row, base + r * wo + s] = x[n, c, r + i, s + j]
    return cols


@njit(cache=True)
def conv2d_forward(x, w, b):
    bsz, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    ho = h - k + 1
    wo = wd - k + 1
    cols = _im2col(x, k)
    prod = np.dot(np.ascontiguousarray(w).reshape(cout, cin * k * k), cols)
    out = np.empty((bsz, cout, ho, wo), dtype=x.dtype)
    for n in range(bsz):
        base = n * ho * wo
        for o in range(cout):
            for r in range(ho):
                for s in range(wo):
                    out[n, o, r, s] = prod[o, base + r * wo + s] + b[o]
    return out


@njit(cache=True)
def conv2d_backward(dout, x, w):
    bsz, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    ho = h - k + 1
    wo = wd - k + 1
    dmat = np.empty((cout, bsz * ho * wo), dtype=dout.dtype)
    db = np.zeros(cout, dtype=w.dtype)
    for n in range(bsz):
        base = n * ho * wo
        for o in range(cout):
            for r in range(ho):
                for s in range(wo):
                    g = dout[n, o, r, s]
                    dmat[o, base + r * wo + s] = g
                    db[o] += g
    cols = _im2col(x, k)
    dw = np.dot(dmat, cols.T.copy()).reshape(cout, cin, k, k)
    dcols = np.dot(np.ascontiguousarray(w).reshape(cout, cin * k * k).T.copy(), dmat)
    dx = np.zeros_like(x)
    for c in range(cin):
        for i in range(k):
            for j in range(k):
                row = (c * k + i) * k + j
                for n in range(bsz):
                    base = n * ho * wo
                    for r in range(ho):
                        for s in range(wo):
                            dx[n, c, r + i, s + j] += dcols[row, base + r * wo + s]
    return dx, dw, db


@njit(cache=True)
def maxpool2x2_forward(x):
    bsz, ch, h, w = x.shape
    out = np.empty((bsz, ch, h // 2, w // 2), dtype=x.dtype)
    arg = np.empty((bsz, ch, h // 2, w // 2), dtype=np.int8)
    for n in range(bsz):
        for c in range(ch):
            for r in range(h // 2):
                for s in range(w // 2):
                    best = x[n, c, 2 * r, 2 * s]
                    pos = 0
                    for t in range(1, 4):
                        v = x[n, c, 2 * r + t // 2, 2 * s + t % 2]
                        if v > best:
                            best = v
                            pos = t
                    out[n, c, r, s] = best
                    arg[n, c, r, s] = pos
    return out, arg


@njit(cache=True)
def maxpool2x2_backward(dout, arg):
    bsz, ch, ho, wo = dout.shape
    dx = np.zeros((bsz, ch, 2 * ho, 2 * wo), dtype=dout.dtype)
    for n in range(bsz):
        for c in range(ch):
            for r in range(ho):
                for s in range(wo):
                    t = arg[n, c, r, s]
                    dx[n, c, 2 * r + t // 2, 2 * s + t % 2] = dout[n, c, r, s]
    return dx
