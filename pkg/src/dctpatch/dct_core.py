"""Orthonormal 2D DCT-II on square patches.

The transform matrix ``T`` has rows ``T[p] = alpha_p * cos(pi*(2q+1)*p / 2n)``,
so a patch ``I`` maps to ``D = T @ I @ T.T`` and back via ``T.T @ D @ T``.
All math here is float64.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class DctMatrix:
    """Immutable n x n orthonormal DCT-II matrix."""

    entries: np.ndarray

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def transpose(self) -> np.ndarray:
        return np.ascontiguousarray(self.entries.T)


def build_dct_matrix(n: int) -> DctMatrix:
    if n < 1:
        raise ValueError(f"DCT size must be >= 1, got {n}")
    p = np.arange(n)[:, None]
    q = np.arange(n)[None, :]
    t = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * q + 1) * p / (2 * n))
    t[0, :] = 1.0 / np.sqrt(n)
    return DctMatrix(t)


def _check_square(grid: np.ndarray, t: DctMatrix, what: str) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.shape != (t.n, t.n):
        raise ValueError(f"{what} has shape {grid.shape}, transform expects ({t.n}, {t.n})")
    return np.ascontiguousarray(grid)


def forward_dct(patch, t: DctMatrix) -> np.ndarray:
    """Coefficients ``T @ patch @ T.T`` via two matrix products."""
    patch = _check_square(patch, t, "patch")
    return _kernels.matmul(_kernels.matmul(t.entries, patch), t.transpose)


def forward_dct_direct(patch) -> np.ndarray:
    """Evaluate the DCT-II double sum term by term, O(n^4).

    Independent of :func:`build_dct_matrix`; used as the reference the
    matrix path is checked against.
    """
    patch = np.ascontiguousarray(patch, dtype=np.float64)
    if patch.ndim != 2 or patch.shape[0] != patch.shape[1]:
        raise ValueError(f"patch must be square, got shape {patch.shape}")
    return _kernels.dct_direct(patch)


def inverse_dct(coeffs, t: DctMatrix) -> np.ndarray:
    coeffs = _check_square(coeffs, t, "coefficient grid")
    return _kernels.matmul(_kernels.matmul(t.transpose, coeffs), t.entries)


def forward_dct_batch(patches, t: DctMatrix) -> np.ndarray:
    """Transform a (count, n, n) stack; keeps float64 precision."""
    patches = np.ascontiguousarray(patches, dtype=np.float64)
    if patches.ndim != 3 or patches.shape[1:] != (t.n, t.n):
        raise ValueError(f"expected (count, {t.n}, {t.n}) stack, got {patches.shape}")
    return _kernels.separable_batch(t.entries, patches)


def threshold_coeffs(coeffs, tau: float) -> np.ndarray:
    """Zero every coefficient with ``|c| < tau`` (strict)."""
    if tau < 0:
        raise ValueError(f"threshold must be non-negative, got {tau}")
    coeffs = np.array(coeffs, copy=True)
    coeffs[np.abs(coeffs) < tau] = 0
    return coeffs


def zigzag_order(n: int) -> list[tuple[int, int]]:
    """JPEG zigzag index order for an n x n grid.

    Anti-diagonals ``p + q = d`` ascend; even diagonals run bottom-left to
    top-right, odd ones top-right to bottom-left, so the scan leaves (0, 0)
    heading right.
    """
    order = []
    for d in range(2 * n - 1):
        lo = max(0, d - n + 1)
        hi = min(d, n - 1)
        rows = range(lo, hi + 1) if d % 2 else range(hi, lo - 1, -1)
        order.extend((p, d - p) for p in rows)
    return order


def zigzag(coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs)
    if coeffs.ndim != 2 or coeffs.shape[0] != coeffs.shape[1]:
        raise ValueError(f"grid must be square, got shape {coeffs.shape}")
    rows, cols = zip(*zigzag_order(coeffs.shape[0]))
    return coeffs[list(rows), list(cols)]


def nonzero_count(coeffs) -> int:
    return int(np.count_nonzero(coeffs))


def basis_image(p: int, q: int, n: int) -> np.ndarray:
    """Pixel-domain pattern weighted by coefficient ``D[p, q]``."""
    if not (0 <= p < n and 0 <= q < n):
        raise ValueError(f"basis index ({p}, {q}) out of range for n={n}")
    t = build_dct_matrix(n).entries
    return np.outer(t[p], t[q])


def mult_count(n: int, mode: Literal["dense", "separable"]) -> int:
    """Multiplications to map an n x n patch onto n^2 basis coefficients.

    ``dense`` projects the flattened patch through an arbitrary n^2 x n^2
    matrix; ``separable`` does two n x n matrix products.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if mode == "dense":
        return (n * n) ** 2
    if mode == "separable":
        return 2 * n ** 3
    raise ValueError(f"unknown mode {mode!r}")
