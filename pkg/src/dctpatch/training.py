"""Three-phase training regimen and evaluation.

1. random mini-batches, plain SGD;
2. hard-example passes: sweep the training set, batch up the misclassified
   samples and step on each full batch;
3. random mini-batches with momentum, where 8 of every 12 slots are
   one-pixel shifts of the drawn sample.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np

from . import nn
from .dataset import DEFAULT_TAU, Dataset, one_hot, shift_augment, to_dct
from .models import Model

log = logging.getLogger(__name__)

LOSS_WINDOW = 20
AUGMENT_CYCLE = 12
AUGMENTED_SLOTS = 8


@dataclass
class TrainConfig:
    model_kind: Literal["lenet", "dct_mlp"] = "dct_mlp"
    seed: int = 1
    batch_size: int = 16
    phase1_batches: int = 150_000
    phase1_lr: float = 0.01
    hard_pass_sweeps: int = 4
    phase3_batches: int = 150_000
    phase3_lr: float = 0.001
    phase3_momentum: float = 0.9
    augment: bool = True
    augment_domain: Literal["pixel", "coefficient"] = "pixel"
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.phase1_lr <= 0 or self.phase3_lr <= 0:
            raise ValueError("learning rates must be positive")
        if not 0 <= self.phase3_momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if min(self.phase1_batches, self.phase3_batches, self.hard_pass_sweeps) < 0:
            raise ValueError("phase budgets must be non-negative")
        if self.augment_domain not in ("pixel", "coefficient"):
            raise ValueError(f"unknown augment_domain {self.augment_domain!r}")


def preset(name: str, model_kind: str, **overrides) -> TrainConfig:
    """Budgets for ``desk`` (CI-sized) or ``paper`` (the original schedule).

    ``desk`` is the same for both models: 150k plain batches, four hard
    sweeps and 150k augmented momentum batches (about 10 min for the MLP and
    20 min for LeNet on one core).
    """
    if name == "desk":
        cfg = TrainConfig(model_kind=model_kind)
    elif name == "paper":
        if model_kind == "lenet":
            # 500k batch updates with the base optimiser, nothing else
            cfg = TrainConfig(model_kind=model_kind, phase1_batches=500_000,
                              hard_pass_sweeps=0, phase3_batches=0, augment=False)
        else:
            cfg = TrainConfig(model_kind=model_kind, phase1_batches=80 * 3200,
                              hard_pass_sweeps=4, phase3_batches=1260 * 3200)
    else:
        raise ValueError(f"unknown preset {name!r}")
    return replace(cfg, **overrides)


@dataclass
class LossRecord:
    phase: int
    batch_index: int
    running_loss: float


@dataclass
class TrainResult:
    loss_trace: list[LossRecord] = field(default_factory=list)
    hard_updates: int = 0


def _step(model: Model, inputs, targets, lr, momentum=0.0) -> float:
    params = model.params()
    nn.zero_grads(params)
    scores, cache = model.forward(inputs)
    loss, dscores = nn.mse_loss(scores, targets)
    model.backward(dscores, cache)
    nn.sgd_step(params, lr, momentum)
    return loss


def _batch(ds: Dataset, index, dtype):
    return ds.inputs[index][:, None].astype(dtype, copy=False), one_hot(ds.labels[index])


def _record(trace, running, phase, i):
    if (i + 1) % LOSS_WINDOW == 0:
        trace.append(LossRecord(phase, i + 1, running / LOSS_WINDOW))
        return 0.0
    return running


def train_phase_random(model: Model, train: Dataset, cfg: TrainConfig,
                       rng: np.random.Generator) -> list[LossRecord]:
    """``cfg.phase1_batches`` SGD steps on uniformly drawn batches (with replacement)."""
    if len(train) == 0:
        raise ValueError("training set is empty")
    trace: list[LossRecord] = []
    running = 0.0
    for i in range(cfg.phase1_batches):
        idx = rng.integers(0, len(train), size=cfg.batch_size)
        running += _step(model, *_batch(train, idx, model.dtype), cfg.phase1_lr)
        running = _record(trace, running, 1, i)
        if (i + 1) % 5000 == 0:
            log.info("phase 1: %d/%d batches", i + 1, cfg.phase1_batches)
    return trace


def hard_example_pass(model: Model, train: Dataset, cfg: TrainConfig, chunk: int = 256) -> int:
    """Sweep the training set ``cfg.hard_pass_sweeps`` times, stepping on misclassified samples.

    Misclassified indices accumulate across sweeps; every full batch triggers
    one SGD step at ``phase1_lr`` and a leftover partial batch is dropped.
    Predictions are computed ``chunk`` samples at a time against the current
    weights and recomputed after each step, which gives the same result as a
    strictly one-sample-at-a-time sweep.  Returns the number of steps taken.
    """
    pending: list[int] = []
    updates = 0
    size = len(train)
    for sweep in range(cfg.hard_pass_sweeps):
        k = 0
        while k < size:
            stop = min(k + chunk, size)
            preds = model.predict(train.inputs[k:stop])
            wrong = np.flatnonzero(preds != train.labels[k:stop]) + k
            need = cfg.batch_size - len(pending)
            if len(wrong) < need:
                pending.extend(wrong.tolist())
                k = stop
                continue
            pending.extend(wrong[:need].tolist())
            _step(model, *_batch(train, np.array(pending), model.dtype), cfg.phase1_lr)
            updates += 1
            pending = []
            k = int(wrong[need - 1]) + 1
        log.info("hard-example sweep %d: %d updates so far", sweep + 1, updates)
    return updates


def augmentation_schedule(start: int, count: int) -> np.ndarray:
    """Slot codes for ``count`` consecutive slots beginning at global slot ``start``.

    Codes 0..7 are shift directions, -1 means the sample is used unmodified.
    """
    w = (start + np.arange(count)) % AUGMENT_CYCLE
    return np.where(w < AUGMENTED_SLOTS, w, -1)


def train_phase_augmented(model: Model, train: Dataset, cfg: TrainConfig,
                          rng: np.random.Generator,
                          pixel_source: Dataset | None = None) -> list[LossRecord]:
    """Momentum SGD over random batches with the 8-of-12 shift schedule.

    For a DCT-domain ``train`` set with pixel-domain augmentation, shifts are
    applied to ``pixel_source`` (sample-aligned with ``train``) and the
    shifted patch is re-transformed and thresholded at ``train.threshold``.
    """
    if len(train) == 0:
        raise ValueError("training set is empty")
    if cfg.phase3_batches == 0:
        return []
    shift_from = None
    if cfg.augment:
        if train.domain == "pixel" or cfg.augment_domain == "coefficient":
            shift_from = train
        else:
            if pixel_source is None or pixel_source.domain != "pixel":
                raise ValueError("pixel-domain augmentation of DCT inputs needs a pixel-domain source")
            if len(pixel_source) != len(train) or not np.array_equal(pixel_source.labels, train.labels):
                raise ValueError("pixel source is not aligned with the training set")
            shift_from = pixel_source
    recompute_dct = shift_from is not None and shift_from.domain == "pixel" and train.domain == "dct"

    trace: list[LossRecord] = []
    running = 0.0
    nn.reset_momentum(model.params())
    for i in range(cfg.phase3_batches):
        idx = rng.integers(0, len(train), size=cfg.batch_size)
        inputs, targets = _batch(train, idx, model.dtype)
        if shift_from is not None:
            codes = augmentation_schedule(i * cfg.batch_size, cfg.batch_size)
            slots = np.flatnonzero(codes >= 0)
            shifted = np.stack([shift_augment(shift_from.inputs[idx[s]], codes[s]) for s in slots])
            if recompute_dct:
                shifted = to_dct(shifted, train.threshold)
            inputs[slots, 0] = shifted
        running += _step(model, inputs, targets, cfg.phase3_lr, cfg.phase3_momentum)
        running = _record(trace, running, 3, i)
        if (i + 1) % 5000 == 0:
            log.info("phase 3: %d/%d batches", i + 1, cfg.phase3_batches)
    return trace


def train(model: Model, train_set: Dataset, cfg: TrainConfig,
          pixel_source: Dataset | None = None, checkpoint_dir=None) -> TrainResult:
    """Run all three phases; optionally checkpoint after each."""
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    result = TrainResult()

    def checkpoint(phase):
        if checkpoint_dir is not None:
            path = Path(checkpoint_dir) / f"{cfg.model_kind}_phase{phase}.nnwt"
            nn.save_weights(model.params(), path)

    result.loss_trace += train_phase_random(model, train_set, cfg, rng)
    checkpoint(1)
    result.hard_updates = hard_example_pass(model, train_set, cfg)
    checkpoint(2)
    result.loss_trace += train_phase_augmented(model, train_set, cfg, rng, pixel_source)
    checkpoint(3)
    return result


@dataclass
class EvalResult:
    accuracy: float
    correct: int
    total: int
    misclassified: list[tuple[int, int, int]]


def evaluate(model: Model, test: Dataset, chunk: int = 1000) -> EvalResult:
    preds = np.concatenate([model.predict(test.inputs[k:k + chunk])
                            for k in range(0, len(test), chunk)]) if len(test) else np.array([], int)
    wrong = np.flatnonzero(preds != test.labels)
    total = len(test)
    correct = total - len(wrong)
    return EvalResult(
        accuracy=100.0 * correct / total if total else 0.0,
        correct=correct,
        total=total,
        misclassified=[(int(i), int(test.labels[i]), int(preds[i])) for i in wrong],
    )


def error_count(model: Model, ds: Dataset) -> int:
    res = evaluate(model, ds)
    return res.total - res.correct


def write_loss_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase", "batch_index", "running_loss"])
        for rec in trace:
            writer.writerow([rec.phase, rec.batch_index, repr(rec.running_loss)])
