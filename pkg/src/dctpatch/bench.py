"""Dense basis projection vs separable DCT: multiplication counts and wall clock."""
from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import _kernels
from .dct_core import build_dct_matrix, mult_count


@dataclass
class BenchReport:
    n: int
    dense_mults: int
    separable_mults: int
    dense_ns: float
    separable_ns: float
    speedup: float
    backend: str = _kernels.BACKEND

    @property
    def theoretical_speedup(self) -> float:
        return self.dense_mults / self.separable_mults


def dense_projection(basis, patch):
    """Project a flattened patch through an (n^2, n^2) basis matrix."""
    return _kernels.matvec(basis, np.ascontiguousarray(patch).reshape(-1))


def separable_projection(t, t_transposed, patch):
    return _kernels.matmul(_kernels.matmul(t, patch), t_transposed)


def check_equivalence(n: int, seed: int = 0) -> float:
    """Max-abs gap between ``kron(T, T) @ vec(I)`` and ``T @ I @ T.T``.

    With row-major flattening the Kronecker product of the DCT matrix with
    itself is exactly the dense matrix that the separable form factors.
    """
    t = build_dct_matrix(n)
    patch = np.random.default_rng(seed).random((n, n))
    dense = dense_projection(np.kron(t.entries, t.entries), patch).reshape(n, n)
    separable = separable_projection(t.entries, t.transpose, patch)
    return float(np.abs(dense - separable).max())


def _median_ns(fn, iters, warmup):
    for _ in range(warmup):
        fn()
    samples = np.empty(iters)
    for i in range(iters):
        start = time.perf_counter_ns()
        fn()
        samples[i] = time.perf_counter_ns() - start
    return float(np.median(samples))


def run_bench(n: int = 32, iters: int = 100, warmup: int = 10, seed: int = 0) -> BenchReport:
    """Time both projections on the same patch with random matrices, single-threaded."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    patch = rng.random((n, n))
    basis = rng.standard_normal((n * n, n * n))
    t = rng.standard_normal((n, n))
    tt = np.ascontiguousarray(t.T)
    with threadpool_limits(limits=1):
        dense_ns = _median_ns(lambda: dense_projection(basis, patch), iters, warmup)
        separable_ns = _median_ns(lambda: separable_projection(t, tt, patch), iters, warmup)
    return BenchReport(
        n=n,
        dense_mults=mult_count(n, "dense"),
        separable_mults=mult_count(n, "separable"),
        dense_ns=dense_ns,
        separable_ns=separable_ns,
        speedup=dense_ns / separable_ns,
    )


def write_reports_csv(reports, path) -> None:
    fields = list(asdict(reports[0]))
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for report in reports:
            writer.writerow(asdict(report))
