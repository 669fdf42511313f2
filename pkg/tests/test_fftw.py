import numpy as np
import pytest
import scipy.fft as sfft

from mkinetic._fftw import PaddedConvolver, convolver, real_fft


@pytest.mark.parametrize("n", [8, 16])
def test_padded_convolver_matches_full_transform(n):
    rng = np.random.default_rng(3)
    block = rng.standard_normal((n, n, n))
    # real-valued symbol so the product stays Hermitian
    kernel = rng.standard_normal((2 * n, 2 * n, n + 1)).astype(complex)
    conv = PaddedConvolver(n)
    spec = conv.load(block).copy()
    out = np.empty((n, n, n))
    conv.apply(kernel, out)
    full = sfft.irfftn(spec * kernel, s=(2 * n,) * 3) * (2 * n) ** 3
    np.testing.assert_allclose(out, full[:n, :n, :n], rtol=0, atol=1e-13 * np.abs(full).max())


def test_padded_convolver_is_linear_convolution():
    n = 8
    block = np.zeros((n, n, n))
    block[2, 3, 4] = 1.0
    # spectrum of a unit impulse at offset (1, 0, 0) on the padded grid
    imp = np.zeros((2 * n,) * 3)
    imp[1, 0, 0] = 1.0
    kernel = sfft.rfftn(imp) / (2 * n) ** 3
    conv = convolver(n)
    conv.load(block)
    out = np.empty((n, n, n))
    conv.apply(kernel, out)
    expect = np.zeros((n, n, n))
    expect[3, 3, 4] = 1.0
    np.testing.assert_allclose(out, expect, atol=1e-14)
    assert convolver(n) is conv


def test_real_fft_round_trip_and_reference():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((3, 8, 8, 8))
    plan = real_fft(x.shape, (1, 2, 3))
    spec = plan.forward(x)
    np.testing.assert_allclose(spec, sfft.rfftn(x, axes=(1, 2, 3)), atol=1e-12)
    # outputs must not alias the plan buffers
    again = plan.forward(2 * x)
    np.testing.assert_allclose(again, 2 * spec, atol=1e-12)
    np.testing.assert_allclose(plan.backward(spec), x, atol=1e-14)
    assert real_fft(x.shape, (1, 2, 3)) is plan
