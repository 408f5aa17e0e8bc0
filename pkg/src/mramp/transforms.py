"""Orthonormal sparsifying transforms and the first-difference operator.

All transforms act along a chosen axis so that they can be applied to single
vectors, to images (``forward2d`` computes ``Psi @ X @ Psi.T``) and to stacks
of rows (used when materialising effective measurement matrices).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft

from .errors import DimensionError, ParameterError, UnsupportedError

# Scaling filters of the orthogonal wavelets, synthesis order.
# d8 is the 8-tap Daubechies filter (4 vanishing moments).
WAVELET_FILTERS = {
    "haar": np.array([1.0, 1.0]) / math.sqrt(2.0),
    "d8": np.array([
        0.2303778133088965,
        0.7148465705529157,
        0.6308807679298589,
        -0.027983769416859854,
        -0.18703481171909309,
        0.030841381835560764,
        0.0328830116668852,
        -0.010597401785069032,
    ]),
}

KINDS = ("dct", "wavelet", "identity", "difference")


def _highpass(h):
    n = np.arange(h.size)
    return ((-1.0) ** n) * h[::-1]


def _dwt_level(x, h, g):
    # x: (N, ...) periodic analysis of axis 0
    N = x.shape[0]
    k2 = 2 * np.arange(N // 2)
    a = np.zeros((N // 2,) + x.shape[1:])
    d = np.zeros_like(a)
    for tap, (hv, gv) in enumerate(zip(h, g)):
        xs = x[(k2 + tap) % N]
        a += hv * xs
        d += gv * xs
    return a, d


def _idwt_level(a, d, h, g):
    half = a.shape[0]
    N = 2 * half
    k2 = 2 * np.arange(half)
    x = np.zeros((N,) + a.shape[1:])
    for tap, (hv, gv) in enumerate(zip(h, g)):
        # for a fixed tap the indices (2k + tap) % N are distinct
        x[(k2 + tap) % N] += hv * a + gv * d
    return x


@dataclass(frozen=True)
class Transform:
    """A linear sparsifying transform of size ``n``.

    ``kind`` is one of ``dct`` (orthonormal DCT-II), ``wavelet`` (periodic
    orthogonal wavelet with ``levels`` decomposition levels and filter
    ``haar`` or ``d8``), ``identity``, or ``difference`` (maps R^n to R^(n-1),
    entry i is x[i+1] - x[i]).
    """

    kind: str
    n: int
    levels: int = 1
    filter: str = "haar"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown transform kind {self.kind!r}")
        if self.n < 1:
            raise ParameterError("transform size must be positive")
        if self.kind == "wavelet":
            if self.filter not in WAVELET_FILTERS:
                raise ParameterError(f"unknown wavelet filter {self.filter!r}")
            if self.levels < 0 or self.n % (2 ** self.levels):
                raise ParameterError(
                    f"{self.levels} wavelet levels need n divisible by {2 ** self.levels}")

    @property
    def orthonormal(self):
        return self.kind != "difference"

    @property
    def out_size(self):
        return self.n - 1 if self.kind == "difference" else self.n

    def _check(self, x, axis, size):
        if x.shape[axis] != size:
            raise DimensionError(
                f"{self.kind} transform of size {size} got length {x.shape[axis]} on axis {axis}")

    def forward(self, x, axis=-1):
        x = np.asarray(x, dtype=float)
        self._check(x, axis, self.n)
        if self.kind == "dct":
            return fft.dct(x, type=2, norm="ortho", axis=axis)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "difference":
            return np.diff(x, axis=axis)
        y = np.moveaxis(x, axis, 0)
        h = WAVELET_FILTERS[self.filter]
        g = _highpass(h)
        details = []
        a = y
        for _ in range(self.levels):
            a, d = _dwt_level(a, h, g)
            details.append(d)
        out = np.concatenate([a] + details[::-1], axis=0)
        return np.moveaxis(out, 0, axis)

    def inverse(self, s, axis=-1):
        if self.kind == "difference":
            raise UnsupportedError("the difference operator is not invertible (not square)")
        s = np.asarray(s, dtype=float)
        self._check(s, axis, self.n)
        if self.kind == "dct":
            return fft.idct(s, type=2, norm="ortho", axis=axis)
        if self.kind == "identity":
            return s.copy()
        c = np.moveaxis(s, axis, 0)
        h = WAVELET_FILTERS[self.filter]
        g = _highpass(h)
        size = self.n >> self.levels
        a = c[:size]
        for _ in range(self.levels):
            a = _idwt_level(a, c[size:2 * size], h, g)
            size *= 2
        return np.moveaxis(a, 0, axis)

    def forward2d(self, X):
        """``Psi X Psi^T`` on the last two axes."""
        return self.forward(self.forward(X, axis=-2), axis=-1)

    def inverse2d(self, S):
        return self.inverse(self.inverse(S, axis=-2), axis=-1)

    def matrix(self):
        """Explicit matrix ``Psi`` (``out_size x n``)."""
        return self.forward(np.eye(self.n), axis=0)

    def coarse(self, d):
        """The matching transform at size ``n // d``.

        For wavelets the first ``n // d`` coefficients of a ``levels``-level
        transform are exactly the ``(levels - log2 d)``-level transform of
        the low-pass subband, so the coarse transform drops ``log2 d`` levels.
        """
        if d < 1 or self.n % d:
            raise ParameterError(f"d={d} must divide n={self.n}")
        if self.kind == "wavelet":
            k = int(round(math.log2(d)))
            if 2 ** k != d:
                raise ParameterError("wavelet resampling needs d to be a power of 2")
            if k > self.levels:
                raise ParameterError(f"d={d} needs at least {k} wavelet levels")
            if k == self.levels:
                return Transform("identity", self.n // d)
            return Transform("wavelet", self.n // d, self.levels - k, self.filter)
        if self.kind == "difference":
            raise UnsupportedError("no coarse version of the difference operator")
        return Transform(self.kind, self.n // d)


def forward(t, x):
    return t.forward(x)


def inverse(t, s):
    return t.inverse(s)


def forward2d(t, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionError("forward2d expects a square image")
    return t.forward2d(X)
