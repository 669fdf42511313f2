"""Cached FFTW plans for zero-padded 3-D convolutions, with a scipy fallback."""

from __future__ import annotations

import logging
import threading

import numpy as np
import scipy.fft as sfft

try:  # pragma: no cover - exercised implicitly
    import pyfftw

    HAVE_FFTW = True
except ImportError:  # pragma: no cover
    pyfftw = None
    HAVE_FFTW = False

log = logging.getLogger(__name__)

_lock = threading.Lock()
_plans: dict[int, "PaddedConvolver"] = {}


class PaddedConvolver:
    """Linear convolution of an n^3 block with kernels given on the 2n^3 padded grid.

    Kernel spectra are expected pre-scaled by 1/(2n)^3 so the unnormalized
    backward transform returns the convolution directly.  One instance owns
    its buffers; use one per thread.
    """

    def __init__(self, n: int):
        self.n = n
        m = 2 * n
        self.shape = (m, m, m)
        self.hshape = (m, m, n + 1)
        if HAVE_FFTW:
            flags = ("FFTW_MEASURE",)
            self._in = pyfftw.empty_aligned(self.shape, dtype="float64")
            self._hat = pyfftw.empty_aligned(self.hshape, dtype="complex128")
            self._prod = pyfftw.empty_aligned(self.hshape, dtype="complex128")
            # pruned inverse: only the inner n^3 block is kept, so each pass drops the unused half
            self._s0 = pyfftw.empty_aligned(self.hshape, dtype="complex128")
            self._s1 = pyfftw.empty_aligned((n, m, n + 1), dtype="complex128")
            self._out = pyfftw.empty_aligned((n, n, m), dtype="float64")
            self._fwd = pyfftw.FFTW(self._in, self._hat, axes=(0, 1, 2), flags=flags, threads=1)
            back = dict(direction="FFTW_BACKWARD", flags=flags + ("FFTW_DESTROY_INPUT",), threads=1)
            self._inv = [
                pyfftw.FFTW(self._prod, self._s0, axes=(0,), **back),
                pyfftw.FFTW(self._s0[:n], self._s1, axes=(1,), **back),
                pyfftw.FFTW(self._s1[:, :n], self._out, axes=(2,), **back),
            ]
            self._in[...] = 0.0
        else:
            self._in = np.zeros(self.shape)
            self._hat = None

    def load(self, block: np.ndarray) -> np.ndarray:
        """Transform a zero-padded n^3 block; returns the (shared) half spectrum."""
        n = self.n
        self._in[:n, :n, :n] = block
        if HAVE_FFTW:
            self._fwd.execute()
        else:
            self._hat = sfft.rfftn(self._in)
        return self._hat

    def apply(self, kernel_hat: np.ndarray, out: np.ndarray) -> None:
        """out[...] = inner n^3 block of irfftn(spectrum * kernel_hat), unnormalized."""
        n = self.n
        if HAVE_FFTW:
            np.multiply(self._hat, kernel_hat, out=self._prod)
            for plan in self._inv:
                plan.execute()
            out[...] = self._out[:, :, :n]
        else:
            full = sfft.irfftn(self._hat * kernel_hat, s=self.shape) * float(np.prod(self.shape))
            out[...] = full[:n, :n, :n]


def convolver(n: int) -> PaddedConvolver:
    with _lock:
        c = _plans.get(n)
        if c is None:
            log.debug("planning padded convolver for n=%d (fftw=%s)", n, HAVE_FFTW)
            c = PaddedConvolver(n)
            _plans[n] = c
        return c


class RealFFT:
    """Cached real-to-complex transform over fixed axes of a fixed shape.

    Outputs are fresh arrays; the backward transform is normalized like
    scipy.fft.irfftn.
    """

    def __init__(self, shape: tuple[int, ...], axes: tuple[int, ...]):
        self.shape = tuple(shape)
        self.axes = tuple(axes)
        hshape = list(self.shape)
        hshape[self.axes[-1]] = self.shape[self.axes[-1]] // 2 + 1
        self.hshape = tuple(hshape)
        self.vshape = tuple(self.shape[a] for a in self.axes)
        self._scale = 1.0 / float(np.prod(self.vshape))
        if HAVE_FFTW:
            # measuring pays off only while the arrays are modest
            flags = ("FFTW_MEASURE",) if np.prod(self.shape) <= 1 << 22 else ("FFTW_ESTIMATE",)
            self._in = pyfftw.empty_aligned(self.shape, dtype="float64")
            self._hat = pyfftw.empty_aligned(self.hshape, dtype="complex128")
            self._spec = pyfftw.empty_aligned(self.hshape, dtype="complex128")
            self._out = pyfftw.empty_aligned(self.shape, dtype="float64")
            self._fwd = pyfftw.FFTW(self._in, self._hat, axes=self.axes, flags=flags, threads=1)
            self._bwd = pyfftw.FFTW(self._spec, self._out, axes=self.axes, direction="FFTW_BACKWARD",
                                    flags=flags + ("FFTW_DESTROY_INPUT",), threads=1)

    def forward(self, values: np.ndarray) -> np.ndarray:
        if not HAVE_FFTW:
            return sfft.rfftn(values, axes=self.axes)
        self._in[...] = values
        self._fwd.execute()
        return self._hat.copy()

    def backward(self, spec: np.ndarray) -> np.ndarray:
        if not HAVE_FFTW:
            return sfft.irfftn(spec, s=self.vshape, axes=self.axes)
        self._spec[...] = spec
        self._bwd.execute()
        return self._out * self._scale


_real_plans: dict[tuple, RealFFT] = {}


def real_fft(shape, axes) -> RealFFT:
    key = (tuple(shape), tuple(axes))
    with _lock:
        p = _real_plans.get(key)
        if p is None:
            log.debug("planning real transform shape=%s axes=%s (fftw=%s)", key[0], key[1], HAVE_FFTW)
            p = RealFFT(*key)
            _real_plans[key] = p
        return p
