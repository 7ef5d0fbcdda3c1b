"""Regenerate the golden LeNet checkpoint used by tests/test_golden.py.

    MNIST_DIR=data/mnist python scripts/make_golden.py

Trains LeNet (seed 1) for 10,000 phase-1 batches, then prints the test
accuracy and the first 100 test predictions to paste into the test.
"""
from pathlib import Path

import numpy as np

from dctpatch import dataset, nn, training
from dctpatch.models import build_model

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "golden_lenet.nnwt"


def main():
    pixels = dataset.make_pixel_dataset(dataset.load_mnist(None, "train"))
    test = dataset.make_pixel_dataset(dataset.load_mnist(None, "test"))
    cfg = training.preset("desk", "lenet", phase1_batches=10_000, hard_pass_sweeps=0, phase3_batches=0)
    model = build_model("lenet", cfg.seed)
    training.train(model, pixels, cfg)
    nn.save_weights(model.params(), OUT)
    res = training.evaluate(model, test)
    print(f"accuracy: {res.accuracy!r}")
    print("first 100 predictions:", "".join(str(p) for p in model.predict(test.inputs[:100])))


if __name__ == "__main__":
    main()
