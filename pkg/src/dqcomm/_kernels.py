"""Hot loops of the single-excitation propagator.

Each kernel has a numba version and a pure-numpy version with identical
semantics. The numba path is used when numba imports cleanly and the
environment variable ``DQCOMM_DISABLE_NUMBA`` is unset (or ``0``).
"""

import os

import numpy as np

_DISABLED = os.environ.get("DQCOMM_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by DQCOMM_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def stencil_matvec_numpy(diag, x, out=None):
    """``out = diag * x - sum of nearest-neighbour values``, any dimension.

    ``diag`` and ``x`` share the lattice shape. Open boundaries: missing
    neighbours contribute nothing.
    """
    if out is None:
        out = np.empty(x.shape, dtype=np.result_type(diag, x))
    np.multiply(diag, x, out=out)
    for axis in range(x.ndim):
        lo = [slice(None)] * x.ndim
        hi = [slice(None)] * x.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        out[lo] -= x[hi]
        out[hi] -= x[lo]
    return out


def box_weight_numpy(x, lo, hi):
    """Sum of ``|x|**2`` over the half-open box ``[lo, hi)``."""
    sl = tuple(slice(a, b) for a, b in zip(lo, hi))
    v = x[sl]
    return float(np.sum(v.real ** 2 + v.imag ** 2))


if HAS_NUMBA:

    @njit(cache=False)
    def _matvec_1d(diag, x, out):
        n = x.shape[0]
        for i in range(n):
            acc = diag[i] * x[i]
            if i > 0:
                acc -= x[i - 1]
            if i < n - 1:
                acc -= x[i + 1]
            out[i] = acc
        return out

    @njit(cache=False)
    def _matvec_2d(diag, x, out):
        nx, ny = x.shape
        for i in range(nx):
            for j in range(ny):
                acc = diag[i, j] * x[i, j]
                if i > 0:
                    acc -= x[i - 1, j]
                if i < nx - 1:
                    acc -= x[i + 1, j]
                if j > 0:
                    acc -= x[i, j - 1]
                if j < ny - 1:
                    acc -= x[i, j + 1]
                out[i, j] = acc
        return out

    @njit(cache=False)
    def _box_weight_2d(x, lo0, hi0, lo1, hi1):
        s = 0.0
        for i in range(lo0, hi0):
            for j in range(lo1, hi1):
                v = x[i, j]
                s += v.real * v.real + v.imag * v.imag
        return s

    def stencil_matvec_numba(diag, x, out=None):
        if out is None:
            out = np.empty(x.shape, dtype=np.result_type(diag, x))
        if x.ndim == 1:
            return _matvec_1d(diag, x, out)
        if x.ndim == 2:
            return _matvec_2d(diag, x, out)
        return stencil_matvec_numpy(diag, x, out)

    def box_weight_numba(x, lo, hi):
        if x.ndim == 2:
            return float(_box_weight_2d(x, lo[0], hi[0], lo[1], hi[1]))
        return box_weight_numpy(x, lo, hi)

    stencil_matvec = stencil_matvec_numba
    box_weight = box_weight_numba
else:
    stencil_matvec_numba = None
    box_weight_numba = None
    stencil_matvec = stencil_matvec_numpy
    box_weight = box_weight_numpy


def backend():
    return "numba" if HAS_NUMBA else "numpy"
