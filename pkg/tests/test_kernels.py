"""The numba and numpy kernel paths must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from dctpatch._kernels import _numpy

numba_kernels = pytest.importorskip("dctpatch._kernels._numba")

DTYPES = [np.float64, np.float32]


def tol(dtype):
    return 1e-10 if dtype == np.float64 else 2e-4


@pytest.mark.parametrize("dtype", DTYPES)
def test_matmul(dtype):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((7, 11)).astype(dtype)
    b = rng.standard_normal((11, 5)).astype(dtype)
    np.testing.assert_allclose(numba_kernels.matmul(a, b), _numpy.matmul(a, b), atol=tol(dtype))


def test_matvec():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((64, 64))
    x = rng.standard_normal(64)
    np.testing.assert_allclose(numba_kernels.matvec(a, x), _numpy.matvec(a, x), atol=1e-12)


@pytest.mark.parametrize("n", [1, 3, 8])
def test_dct_direct(n):
    patch = np.random.default_rng(n).random((n, n))
    np.testing.assert_allclose(numba_kernels.dct_direct(patch), _numpy.dct_direct(patch), atol=1e-12)


def test_separable_batch():
    rng = np.random.default_rng(2)
    t = rng.standard_normal((8, 8))
    x = rng.standard_normal((5, 8, 8))
    np.testing.assert_allclose(numba_kernels.separable_batch(t, x), _numpy.separable_batch(t, x), atol=1e-12)


@pytest.mark.parametrize("dtype", DTYPES)
@pytest.mark.parametrize("shape", [(2, 3, 8, 8, 4, 3), (16, 1, 32, 32, 6, 5), (3, 6, 14, 14, 16, 5)])
def test_conv2d(dtype, shape):
    bsz, cin, h, w, cout, k = shape
    rng = np.random.default_rng(3)
    x = rng.standard_normal((bsz, cin, h, w)).astype(dtype)
    wt = rng.standard_normal((cout, cin, k, k)).astype(dtype)
    b = rng.standard_normal(cout).astype(dtype)
    np.testing.assert_allclose(numba_kernels.conv2d_forward(x, wt, b), _numpy.conv2d_forward(x, wt, b),
                               atol=tol(dtype) * 10)
    dout = rng.standard_normal((bsz, cout, h - k + 1, w - k + 1)).astype(dtype)
    for got, want in zip(numba_kernels.conv2d_backward(dout, x, wt), _numpy.conv2d_backward(dout, x, wt)):
        assert got.shape == want.shape
        np.testing.assert_allclose(got, want, atol=tol(dtype) * 100)


@pytest.mark.parametrize("dtype", DTYPES)
def test_maxpool(dtype):
    rng = np.random.default_rng(4)
    x = rng.standard_normal((3, 4, 6, 8)).astype(dtype)
    x[0, 0, :2, :2] = 1.5  # tie block
    out_a, arg_a = numba_kernels.maxpool2x2_forward(x)
    out_b, arg_b = _numpy.maxpool2x2_forward(x)
    np.testing.assert_array_equal(out_a, out_b)
    np.testing.assert_array_equal(arg_a, arg_b)
    assert arg_a[0, 0, 0, 0] == 0
    dout = rng.standard_normal(out_a.shape).astype(dtype)
    np.testing.assert_array_equal(numba_kernels.maxpool2x2_backward(dout, arg_a),
                                  _numpy.maxpool2x2_backward(dout, arg_b))


def test_env_flag_selects_numpy():
    env = dict(os.environ, DCTPATCH_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "import dctpatch._kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
