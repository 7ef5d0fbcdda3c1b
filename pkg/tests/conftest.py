import os
from pathlib import Path

import numpy as np
import pytest

from dctpatch.dataset import MNIST_FILES

REPO = Path(__file__).resolve().parents[1]
DATA = Path(__file__).resolve().parent / "data"


def _find_mnist():
    candidates = [os.environ.get("MNIST_DIR"), REPO / "data" / "mnist"]
    for c in candidates:
        if c and all((Path(c) / f).is_file() for pair in MNIST_FILES.values() for f in pair):
            return Path(c)
    return None


MNIST_DIR = _find_mnist()
needs_mnist = pytest.mark.skipif(MNIST_DIR is None, reason="MNIST IDX files not found (set MNIST_DIR)")


@pytest.fixture(scope="session")
def mnist_dir():
    if MNIST_DIR is None:
        pytest.skip("MNIST IDX files not found (set MNIST_DIR)")
    return MNIST_DIR


@pytest.fixture(scope="session")
def raw_test(mnist_dir):
    from dctpatch.dataset import load_mnist
    return load_mnist(mnist_dir, "test")


@pytest.fixture(scope="session")
def raw_train(mnist_dir):
    from dctpatch.dataset import load_mnist
    return load_mnist(mnist_dir, "train")


@pytest.fixture(scope="session")
def pixel_train(raw_train):
    from dctpatch.dataset import make_pixel_dataset
    return make_pixel_dataset(raw_train)


@pytest.fixture(scope="session")
def pixel_test(raw_test):
    from dctpatch.dataset import make_pixel_dataset
    return make_pixel_dataset(raw_test)


@pytest.fixture(scope="session")
def dct_train(pixel_train):
    from dctpatch.dataset import pixel_to_dct_dataset
    return pixel_to_dct_dataset(pixel_train, 0.02)


@pytest.fixture(scope="session")
def dct_test(pixel_test):
    from dctpatch.dataset import pixel_to_dct_dataset
    return pixel_to_dct_dataset(pixel_test, 0.02)


def numeric_grad(f, x, eps=1e-5, index=None):
    """Central differences of scalar ``f()`` w.r.t. entries of ``x`` (modified in place)."""
    flat = x.reshape(-1)
    positions = range(flat.size) if index is None else index
    out = {}
    for i in positions:
        old = flat[i]
        flat[i] = old + eps
        plus = f()
        flat[i] = old - eps
        minus = f()
        flat[i] = old
        out[i] = (plus - minus) / (2 * eps)
    return out


def max_rel_error(analytic, numeric: dict):
    flat = analytic.reshape(-1)
    worst = 0.0
    for i, n in numeric.items():
        a = flat[i]
        denom = max(abs(a) + abs(n), 1e-8)
        worst = max(worst, abs(a - n) / denom)
    return worst


# acceptance summary -------------------------------------------------------

_ACCEPTANCE: list[tuple[str, str, str]] = []


@pytest.fixture
def acceptance_report():
    def report(criterion: str, ok, detail: str = ""):
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        _ACCEPTANCE.append((criterion, status, detail))
        print(f"[acceptance] {criterion}: {status} {detail}")
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{status:4s}  {criterion}  {detail}")
