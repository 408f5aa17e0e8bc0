"""Gaussian measurement ensembles and effective (LR / transform-domain)
measurement operators."""

import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator

from ._rng import keyed_rng
from .errors import DimensionError, ParameterError
from .resampling import lambda_for

DENSE_LIMIT = 16384
BLOCK = 4096  # columns per keyed generation block


def _column_block(seed, m, n, b, normalized):
    lo, hi = b * BLOCK, min(n, (b + 1) * BLOCK)
    rng = keyed_rng(seed, "ensemble", m, n, b)
    A = rng.standard_normal((m, hi - lo)) / math.sqrt(m)
    if normalized:
        A /= np.linalg.norm(A, axis=0)
    return A


@dataclass(frozen=True)
class SensingEnsemble:
    """i.i.d. N(0, 1/m) matrix, optionally column-normalised.

    Columns are generated in keyed blocks, so the dense matrix and the
    matrix-free regeneration path produce the same entries.
    """

    m: int
    n: int
    seed: int
    column_normalized: bool = True
    dense: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def n_blocks(self):
        return -(-self.n // BLOCK)

    def blocks(self):
        if self.dense is not None:
            for b in range(self.n_blocks):
                yield b * BLOCK, self.dense[:, b * BLOCK:(b + 1) * BLOCK]
        else:
            for b in range(self.n_blocks):
                yield b * BLOCK, _column_block(self.seed, self.m, self.n, b, self.column_normalized)

    def matrix(self):
        if self.dense is not None:
            return self.dense
        return np.hstack([blk for _, blk in self.blocks()])

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise DimensionError(f"A is {self.m}x{self.n}, got vector of length {x.shape[0]}")
        if self.dense is not None:
            return self.dense @ x
        y = np.zeros((self.m,) + x.shape[1:])
        for lo, blk in self.blocks():
            y += blk @ x[lo:lo + blk.shape[1]]
        return y

    def rmatvec(self, r):
        r = np.asarray(r, dtype=float)
        if r.shape[0] != self.m:
            raise DimensionError(f"A^T needs length {self.m}, got {r.shape[0]}")
        if self.dense is not None:
            return self.dense.T @ r
        return np.concatenate([blk.T @ r for _, blk in self.blocks()])

    def as_operator(self):
        return LinearOperator((self.m, self.n), matvec=self.matvec, rmatvec=self.rmatvec,
                              dtype=float)


def gen_ensemble(m, n, seed, column_normalized=True, dense=None):
    """Generate an ensemble; dense storage is used up to ``n = 16384`` unless
    ``dense`` forces a choice."""
    if m < 1 or n < 1:
        raise ParameterError("m and n must be positive")
    if m >= n:
        warnings.warn(f"m={m} >= n={n}: not an underdetermined problem", stacklevel=2)
    e = SensingEnsemble(m, n, seed, column_normalized)
    if dense is None:
        dense = n <= DENSE_LIMIT
    if dense:
        object.__setattr__(e, "dense", e.matrix())
    return e


@dataclass(frozen=True)
class NoiseModel:
    sigma_w: float = 0.0

    def __post_init__(self):
        if self.sigma_w < 0:
            raise ParameterError("sigma_w must be non-negative")

    def sigma_dw_sq(self, approx_energy, m):
        """Effective LR noise variance ``sigma_w^2 + ||(I - U D) x||^2 / m``."""
        return self.sigma_w ** 2 + approx_energy / m


def sample(e, x, noise=None, seed=0):
    """``y = A x + w`` with ``w ~ N(0, sigma_w^2 I)`` drawn from ``(seed, 'noise')``."""
    x = np.asarray(x, dtype=float).ravel(order="F") if np.ndim(x) == 2 else np.asarray(x, dtype=float)
    y = e.matvec(x)
    sigma = noise.sigma_w if noise is not None else 0.0
    if sigma > 0:
        y = y + sigma * keyed_rng(seed, "noise").standard_normal(e.m)
    return y


# --- effective operators ------------------------------------------------------

def _vec(X):
    return X.ravel(order="F")


def _unvec(v, side):
    return v.reshape(side, side, order="F")


def effective_lr_operator(e, p, ndim=1, materialize=None):
    """``A_d = A U_d Λ`` as a LinearOperator on LR vectors.

    ``ndim=2`` treats the columns of A as a column-major vectorised
    ``n1 x n1`` image and uses the separable 2D upsampler. For dense
    ensembles the product is materialised once (``materialize=None`` means
    "when A is dense"), otherwise it is applied as a composition.
    """
    lam = lambda_for(p, ndim=ndim)
    if ndim == 1:
        if e.n != p.n1:
            raise DimensionError(f"ensemble has n={e.n}, pair expects n1={p.n1}")
        n_in = p.n_d
        up = p.up
        upT = p.up_adjoint
    else:
        if e.n != p.n1 ** 2:
            raise DimensionError(f"ensemble has n={e.n}, pair expects n1^2={p.n1 ** 2}")
        n_in = p.n_d ** 2

        def up(v):
            return _vec(p.upsample2d(_unvec(v, p.n_d)))

        def upT(v):
            X = _unvec(v, p.n1)
            return _vec(p.up_adjoint(p.up_adjoint(X, axis=0), axis=1))

    if materialize is None:
        materialize = e.dense is not None
    if materialize:
        A = e.matrix()
        if ndim == 1:
            Ad = lam * p.up_adjoint(A, axis=1)
        else:
            # row i of A is vec(X_i); (A U2)_i = vec(U^T X_i U)
            rows = A.reshape(e.m, p.n1, p.n1, order="F")
            rows = p.up_adjoint(p.up_adjoint(rows, axis=1), axis=2)
            Ad = lam * rows.reshape(e.m, -1, order="F")
        return dense_operator(Ad)

    return LinearOperator(
        (e.m, n_in),
        matvec=lambda v: e.matvec(up(lam * np.ravel(v))),
        rmatvec=lambda r: lam * upT(e.rmatvec(np.ravel(r))),
        dtype=float)


def dense_operator(M):
    M = np.ascontiguousarray(M)
    op = LinearOperator(M.shape, matvec=lambda v: M @ np.ravel(v),
                        rmatvec=lambda r: M.T @ np.ravel(r), dtype=float)
    op.matrix = M
    return op


def synthesis_operator(op, t, side=None):
    """Compose ``op`` with the inverse transform: ``Phi = op Psi^T``.

    With ``side`` the transform is applied in 2D to a column-major
    vectorised ``side x side`` coefficient image. Dense inputs stay dense.
    """
    M = getattr(op, "matrix", None)
    if M is not None:
        if side is None:
            return dense_operator(t.forward(M, axis=1))
        # (A (Psi^T (x) Psi^T))_i = vec(Psi X_i Psi^T)
        rows = M.reshape(M.shape[0], side, side, order="F")
        rows = t.forward(t.forward(rows, axis=1), axis=2)
        return dense_operator(rows.reshape(M.shape[0], -1, order="F"))
    if side is None:
        return LinearOperator(op.shape, matvec=lambda s: op.matvec(t.inverse(np.ravel(s))),
                              rmatvec=lambda r: t.forward(op.rmatvec(r)), dtype=float)
    return LinearOperator(
        op.shape,
        matvec=lambda s: op.matvec(_vec(t.inverse2d(_unvec(np.ravel(s), side)))),
        rmatvec=lambda r: _vec(t.forward2d(_unvec(op.rmatvec(r), side))),
        dtype=float)


# --- optional binary cache ----------------------------------------------------

_HEADER = struct.Struct("<8q")
_MAGIC = 0x4D52414D50  # arbitrary tag


def save_cache(path, e):
    A = np.ascontiguousarray(e.matrix(), dtype="<f8")
    header = _HEADER.pack(_MAGIC, 1, e.m, e.n, e.seed & 0x7FFFFFFFFFFFFFFF,
                          int(e.column_normalized), 0, 0)
    Path(path).write_bytes(header + A.tobytes())


def load_cache(path, m, n, seed, column_normalized=True):
    """Return a cached dense ensemble, or ``None`` if the key does not match."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        return None
    magic, _, cm, cn, cseed, cnorm, _, _ = _HEADER.unpack_from(data)
    key = (magic, cm, cn, cseed, bool(cnorm))
    if key != (_MAGIC, m, n, seed & 0x7FFFFFFFFFFFFFFF, bool(column_normalized)):
        return None
    A = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(m, n).astype(float)
    e = SensingEnsemble(m, n, seed, column_normalized)
    object.__setattr__(e, "dense", A)
    return e
