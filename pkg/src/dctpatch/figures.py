"""Data behind each figure: PGM images and CSV tables."""
from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .dct_core import (basis_image, build_dct_matrix, forward_dct, inverse_dct, nonzero_count,
                       threshold_coeffs, zigzag, zigzag_order)
from .models import LeNet, dump_first_layer_kernels

DEFAULT_RECON_TAUS = (0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2)
FIGURES = ("dctgrid", "zigzag", "recon", "counts", "basis", "kernels")


def write_pgm(path, image, normalize: bool = False) -> None:
    """8-bit binary PGM; pixel images map [0, 1] to [0, 255] directly."""
    image = np.asarray(image, dtype=np.float64)
    if normalize:
        lo, hi = image.min(), image.max()
        image = np.full_like(image, 0.5) if hi == lo else (image - lo) / (hi - lo)
    data = np.round(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = data.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+255\s", raw)
    if m is None:
        raise ValueError(f"{path}: not an 8-bit binary PGM")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=m.end()).reshape(h, w)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def reconstruction_stats(patch, tau, t=None):
    """Reconstruct ``patch`` from coefficients thresholded at ``tau``.

    The relative L2 error is computed in the pixel domain; by Parseval it
    equals sqrt(dropped coefficient energy / total energy).
    """
    t = t or build_dct_matrix(patch.shape[0])
    coeffs = forward_dct(patch, t)
    kept = threshold_coeffs(coeffs, tau)
    recon = inverse_dct(kept, t)
    total = float(np.sum(patch ** 2))
    rel = float(np.linalg.norm(recon - patch) / np.sqrt(total)) if total else 0.0
    return recon, nonzero_count(kept), rel


def tau_for_drop_fraction(coeffs, fraction: float) -> float:
    """Smallest threshold that zeroes at least ``fraction`` of the coefficients."""
    mags = np.sort(np.abs(np.asarray(coeffs)).ravel())
    k = int(np.ceil(fraction * mags.size))
    if k == 0:
        return 0.0
    return float(np.nextafter(mags[k - 1], np.inf))


def fig_dctgrid(patches, out_dir, count=12):
    t = build_dct_matrix(patches.shape[-1])
    written = []
    for i, patch in enumerate(patches[:count]):
        write_pgm(out_dir / f"digit_{i:02d}.pgm", patch)
        write_pgm(out_dir / f"dct_{i:02d}.pgm", forward_dct(patch, t), normalize=True)
        written += [out_dir / f"digit_{i:02d}.pgm", out_dir / f"dct_{i:02d}.pgm"]
    return written


def fig_zigzag(patch, out_dir):
    coeffs = forward_dct(patch, build_dct_matrix(patch.shape[0]))
    order = zigzag_order(patch.shape[0])
    values = zigzag(coeffs)
    path = out_dir / "zigzag.csv"
    _write_csv(path, ["position", "p", "q", "value"],
               [(i, p, q, repr(float(v))) for i, ((p, q), v) in enumerate(zip(order, values))])
    return [path]


def fig_recon(patch, out_dir, taus=DEFAULT_RECON_TAUS):
    t = build_dct_matrix(patch.shape[0])
    coeffs = forward_dct(patch, t)
    tau30 = tau_for_drop_fraction(coeffs, 0.30)
    rows, written = [], []
    for tau, label in [(tau, "") for tau in taus] + [(tau30, "drop30")]:
        recon, kept, rel = reconstruction_stats(patch, tau, t)
        name = f"recon_{label or f'tau_{tau:.4f}'}.pgm"
        write_pgm(out_dir / name, recon)
        written.append(out_dir / name)
        rows.append((repr(float(tau)), kept, repr(1 - kept / coeffs.size), repr(rel), label))
    path = out_dir / "recon.csv"
    _write_csv(path, ["tau", "nonzero", "dropped_fraction", "relative_l2_error", "note"], rows)
    return written + [path]


def fig_counts(patch, out_dir, steps=200):
    coeffs = forward_dct(patch, build_dct_matrix(patch.shape[0]))
    taus = np.linspace(0.0, float(np.abs(coeffs).max()) * 1.001, steps + 1)
    path = out_dir / "counts.csv"
    _write_csv(path, ["tau", "nonzero"],
               [(repr(float(tau)), nonzero_count(threshold_coeffs(coeffs, tau))) for tau in taus])
    return [path]


def fig_basis(out_dir, n=32, count=16):
    written = []
    for i, (p, q) in enumerate(zigzag_order(n)[:count]):
        path = out_dir / f"basis_{i:02d}_p{p}_q{q}.pgm"
        write_pgm(path, basis_image(p, q, n), normalize=True)
        written.append(path)
    return written


def fig_kernels(model: LeNet, out_dir):
    written = []
    for i, image in enumerate(dump_first_layer_kernels(model)):
        path = out_dir / f"kernel_{i}.pgm"
        write_pgm(path, image)
        written.append(path)
    return written
