"""Down-/up-sampling operator pairs (D_d, U_d) and their scaling Λ.

Three families are provided:

* ``transform-trunc``: keep the first ``n_d`` coefficients of an orthonormal
  transform, ``D = sqrt(1/d) Psi_nd^T [I 0] Psi_n1`` and
  ``U = sqrt(d) Psi_n1^T [I 0]^T Psi_nd``.
* ``decimate-repeat``: keep every d-th sample / repeat each sample d times.
* ``bicubic``: Keys cubic convolution (a = -0.5) in both directions.

``bicubic-repeat`` pairs the bicubic downsampler with the repetition
upsampler; it is what the TV image experiments call "repeat interpolation"
while the LR reference stays bicubic.

All per-axis operators act along an arbitrary axis; 2D operators apply them
separably to the last two axes (``D X D^T``).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ._rng import keyed_rng
from .errors import DimensionError, ParameterError, UnsupportedError
from .transforms import Transform

PAIR_KINDS = ("transform-trunc", "decimate-repeat", "bicubic", "bicubic-repeat")

# Overall 2D scaling for the bicubic upsampler; empirical constants.
BICUBIC_LAMBDA_2D = {2: 1.0 / 2.68, 4: 1.0 / 5.0}


def keys_kernel(s, a=-0.5):
    s = np.abs(np.asarray(s, dtype=float))
    out = np.zeros_like(s)
    near = s <= 1.0
    far = (s > 1.0) & (s < 2.0)
    out[near] = (a + 2.0) * s[near] ** 3 - (a + 3.0) * s[near] ** 2 + 1.0
    sf = s[far]
    out[far] = a * sf ** 3 - 5.0 * a * sf ** 2 + 8.0 * a * sf - 4.0 * a
    return out


def _interp_matrix(n_out, n_in, coords, scale=1.0):
    """Sparse matrix sampling a length-``n_in`` signal at ``coords`` with the
    Keys kernel stretched by ``scale`` (edge replication at the borders)."""
    support = int(math.ceil(2 * scale))
    rows, cols, vals = [], [], []
    for i, c in enumerate(coords):
        base = int(math.floor(c))
        taps = np.arange(base - support + 1, base + support + 1)
        w = keys_kernel((c - taps) / scale)
        keep = w != 0.0
        rows.append(np.full(keep.sum(), i))
        cols.append(np.clip(taps[keep], 0, n_in - 1))
        vals.append(w[keep])
    M = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_out, n_in))
    return M.tocsr()  # duplicate (clamped) entries are summed


def bicubic_down_matrix(n1, d):
    """Each LR sample is the Keys-weighted average of 4 HR neighbours around
    the centre of its d-sample block."""
    coords = (np.arange(n1 // d) + 0.5) * d - 0.5
    return _interp_matrix(n1 // d, n1, coords)


def bicubic_up_matrix(n1, d):
    """Zero insertion followed by interpolation with the d-stretched kernel,
    i.e. cubic interpolation of the LR grid at HR sample centres."""
    coords = (np.arange(n1) + 0.5) / d - 0.5
    return _interp_matrix(n1, n1 // d, coords)


def repeat_up_matrix(n1, d):
    n_d = n1 // d
    return sparse.csr_matrix(
        (np.ones(n1), (np.arange(n1), np.repeat(np.arange(n_d), d))), shape=(n1, n_d))


def _apply_along(M, x, axis):
    x = np.moveaxis(np.asarray(x, dtype=float), axis, 0)
    shape = x.shape
    out = M @ x.reshape(shape[0], -1)
    return np.moveaxis(np.asarray(out).reshape((M.shape[0],) + shape[1:]), 0, axis)


@dataclass(frozen=True)
class ResamplingPair:
    kind: str
    n1: int
    d: int
    transform: Transform = None
    _mats: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in PAIR_KINDS:
            raise ParameterError(f"unknown resampling kind {self.kind!r}")
        if self.d < 1 or self.n1 % self.d:
            raise ParameterError(f"d={self.d} must be a positive divisor of n1={self.n1}")
        mats = {}
        if self.kind == "transform-trunc":
            if self.transform is None or self.transform.n != self.n1:
                raise ParameterError("transform-trunc needs a transform of size n1")
            if not self.transform.orthonormal:
                raise UnsupportedError("transform-trunc needs an orthonormal transform")
            # validates power-of-2 / level constraints for wavelets
            object.__setattr__(self, "_coarse", self.transform.coarse(self.d))
        elif self.kind.startswith("bicubic"):
            if self.d not in BICUBIC_LAMBDA_2D:
                raise UnsupportedError("bicubic pairs are defined for d in {2, 4}")
            mats["D"] = bicubic_down_matrix(self.n1, self.d)
            mats["U"] = (bicubic_up_matrix(self.n1, self.d) if self.kind == "bicubic"
                         else repeat_up_matrix(self.n1, self.d))
        else:
            idx = np.arange(self.d - 1, self.n1, self.d)
            mats["D"] = sparse.csr_matrix(
                (np.ones(idx.size), (np.arange(idx.size), idx)), shape=(idx.size, self.n1))
            mats["U"] = repeat_up_matrix(self.n1, self.d)
        if mats:
            mats["UT"] = mats["U"].T.tocsr()
            mats["DT"] = mats["D"].T.tocsr()
        object.__setattr__(self, "_mats", mats)

    @property
    def n_d(self):
        return self.n1 // self.d

    @property
    def exact_cond1(self):
        return not self.kind.startswith("bicubic") or self.d == 1

    @property
    def lambda_diag(self):
        return lambda_for(self)

    # --- per-axis operators -------------------------------------------------

    def _check(self, x, axis, size):
        if np.shape(x)[axis] != size:
            raise DimensionError(f"expected length {size} on axis {axis}, got {np.shape(x)[axis]}")

    def down(self, x, axis=-1):
        self._check(x, axis, self.n1)
        if self.kind == "transform-trunc":
            c = self.transform.forward(x, axis=axis)
            c = np.take(c, np.arange(self.n_d), axis=axis)
            return self._coarse.inverse(c, axis=axis) / math.sqrt(self.d)
        return _apply_along(self._mats["D"], x, axis)

    def up(self, x_d, axis=-1):
        self._check(x_d, axis, self.n_d)
        if self.kind == "transform-trunc":
            c = self._coarse.forward(x_d, axis=axis)
            pad = [(0, 0)] * c.ndim
            pad[axis] = (0, self.n1 - self.n_d)
            return self.transform.inverse(np.pad(c, pad), axis=axis) * math.sqrt(self.d)
        return _apply_along(self._mats["U"], x_d, axis)

    def up_adjoint(self, x, axis=-1):
        """``U^T`` along ``axis`` (exact transpose of the implemented kernel)."""
        self._check(x, axis, self.n1)
        if self.kind == "transform-trunc":
            return self.d * self.down(x, axis=axis)
        return _apply_along(self._mats["UT"], x, axis)

    def down_adjoint(self, x_d, axis=-1):
        self._check(x_d, axis, self.n_d)
        if self.kind == "transform-trunc":
            return self.up(x_d, axis=axis) / self.d
        return _apply_along(self._mats["DT"], x_d, axis)

    # --- 1D / 2D conveniences -----------------------------------------------

    def downsample1d(self, x):
        return self.down(np.asarray(x, dtype=float))

    def upsample1d(self, x_d):
        return self.up(np.asarray(x_d, dtype=float))

    def downsample2d(self, X):
        X = _square(X, self.n1)
        return self.down(self.down(X, axis=0), axis=1)

    def upsample2d(self, X_d):
        X_d = _square(X_d, self.n_d)
        return self.up(self.up(X_d, axis=0), axis=1)

    def down_matrix(self):
        return self.down(np.eye(self.n1), axis=0)

    def up_matrix(self):
        return self.up(np.eye(self.n_d), axis=0)


def _square(X, n):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape != (n, n):
        raise DimensionError(f"expected a {n}x{n} image, got shape {X.shape}")
    return X


def make_pair(kind, n1, d, transform=None):
    """Build a pair; ``transform`` may be a :class:`Transform` or a kind name
    (``dct``, ``haar``, ``d8``, ``identity``) for transform-trunc pairs."""
    if kind == "transform-trunc":
        if transform is None or isinstance(transform, str):
            name = transform or "dct"
            levels = max(1, int(round(math.log2(d)))) if d > 1 else 1
            if name in ("haar", "d8"):
                transform = Transform("wavelet", n1, levels, name)
            else:
                transform = Transform(name, n1)
    return ResamplingPair(kind, n1, d, transform)


def lambda_for(p, ndim=2):
    """Diagonal value of Λ.

    The 2D (image) value is 1/d for the exact pairs and for repetition
    upsampling, and 1/2.68 (d=2) or 1/5 (d=4) for bicubic upsampling.  A 1D
    operator scales by the square root of the 2D value since the 2D operator
    is the Kronecker product of two 1D ones.
    """
    if ndim not in (1, 2):
        raise ParameterError("ndim must be 1 or 2")
    if p.kind == "bicubic":
        value = BICUBIC_LAMBDA_2D[p.d]
    else:
        value = 1.0 / p.d
    return value if ndim == 2 else math.sqrt(value)


def calibrated_lambda(p, ndim=2):
    """Λ from column norms: ``1 / mean ||U e_k||`` raised to ``ndim``.

    For a column-normalised Gaussian A, ``E ||A U e_k||^2 = ||U e_k||^2``, so
    this makes the effective columns unit-norm on average.
    """
    norms = np.linalg.norm(p.up_matrix(), axis=0)
    if ndim == 1:
        return 1.0 / float(norms.mean())
    return 1.0 / float(np.outer(norms, norms).mean())


def approximation_energy(p, x):
    """``||(I - U D) x||^2`` for a 1D signal or a square image."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        err = x - p.upsample2d(p.downsample2d(x))
    else:
        err = x - p.upsample1d(p.downsample1d(x))
    return float(np.sum(err * err))


# --- condition validation ---------------------------------------------------

def _change_points(x, tol):
    return int(np.sum(np.abs(np.diff(x)) > tol))


@dataclass
class ConditionReport:
    cond1_residual: float
    exact_cond1: bool
    probe_rows: list
    cond3_violations: int
    lr_column_mean: float
    lr_column_norm_mean: float
    lr_column_norm_std: float

    @property
    def cond1_ok(self):
        return self.cond1_residual <= 1e-10 if self.exact_cond1 else True


def validate_conditions(p, probes, m=None, seed=0):
    """Empirical checks of the three MR-AMP conditions for a pair.

    (1) ``max |D U - I|``; (2) mean entry and column-norm statistics of
    ``A U Λ`` for a column-normalised Gaussian A; (3) for each probe, the
    structure ratio before and after downsampling against ``d * eps_1 + 1/n_d``
    (change points for piecewise-constant probes, nonzero coefficients of the
    coarse transform for sparse probes).
    """
    DU = p.down(p.up_matrix(), axis=0)
    residual = float(np.max(np.abs(DU - np.eye(p.n_d))))

    rows, violations = [], 0
    for probe in probes:
        x = np.asarray(probe, dtype=float)
        family = getattr(probe, "family", "generic")
        xd = p.downsample1d(x)
        scale = max(float(np.max(np.abs(x))), 1.0)
        tol = 1e-9 * scale
        if family == "piecewise-constant":
            k1, kd = _change_points(x, tol), _change_points(xd, tol)
        else:
            if p.kind == "transform-trunc":
                c1, cd = p.transform.forward(x), p._coarse.forward(xd)
            else:
                c1, cd = x, xd
            k1, kd = int(np.sum(np.abs(c1) > tol)), int(np.sum(np.abs(cd) > tol))
        eps1, eps_d = k1 / p.n1, kd / p.n_d
        bound = p.d * eps1 + 1.0 / p.n_d
        ok = eps_d <= bound + 1e-12
        violations += not ok
        rows.append({"family": family, "eps1": eps1, "eps_d": eps_d, "bound": bound, "ok": ok})

    m = m or max(1, p.n_d // 2)
    rng = keyed_rng(seed, "validate", "ensemble")
    A = rng.standard_normal((m, p.n1)) / math.sqrt(m)
    A /= np.linalg.norm(A, axis=0)
    Ad = p.up_adjoint(A, axis=1) * lambda_for(p, ndim=1)
    col = np.linalg.norm(Ad, axis=0)
    mean = float(np.mean(Ad))
    return ConditionReport(residual, p.exact_cond1, rows, violations,
                           mean, float(col.mean()), float(col.std()))
