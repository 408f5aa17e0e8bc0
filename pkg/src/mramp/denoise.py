"""Denoisers for AMP: soft thresholding, 1D total variation (exact) and 2D
isotropic total variation, with threshold tuning and divergence estimates.

Every denoiser object is called as ``den(z, sigma, seed)`` and returns a
:class:`DenoiseResult` holding the estimate, the divergence used by the
Onsager term and the parameter actually applied.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._rng import keyed_rng
from .errors import DimensionError, ParameterError
from . import theory


@dataclass
class DenoiseResult:
    x: np.ndarray
    divergence: float
    param: float
    info: dict = None


# --- soft thresholding --------------------------------------------------------

def soft_threshold(z, tau, sigma=1.0):
    if tau < 0:
        raise ParameterError("threshold must be non-negative")
    z = np.asarray(z, dtype=float)
    t = tau * sigma
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def st_divergence(z, tau, sigma=1.0):
    return int(np.count_nonzero(np.abs(np.asarray(z)) > tau * sigma))


def sure_st(z, tau, sigma):
    """SURE of soft thresholding at ``tau`` (in units of sigma)."""
    z = np.asarray(z, dtype=float)
    t = tau * sigma
    return (-z.size * sigma ** 2 + np.sum(np.minimum(z * z, t * t))
            + 2 * sigma ** 2 * np.count_nonzero(np.abs(z) > t))


def sure_threshold(z, sigma, tau_max=4.0):
    """Exact minimiser of SURE over ``tau in [0, tau_max]``.

    Between consecutive sorted ``|z_i| / sigma`` the risk is increasing in
    tau, so the minimum is attained at 0 or at one of those points.
    """
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise ParameterError("SURE needs a non-empty input")
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    a = np.sort(np.abs(z)) / sigma
    n = a.size
    keep = a <= tau_max
    cand = np.concatenate(([0.0], a[keep], [tau_max]))
    # number of entries with |z|/sigma <= candidate, and their energy
    below = np.searchsorted(a, cand, side="right")
    energy = np.concatenate(([0.0], np.cumsum(a * a)))[below]
    risk = -n + energy + (n - below) * cand ** 2 + 2 * (n - below)
    return float(cand[int(np.argmin(risk))])


def tune_threshold(z, sigma, rule, eps=None, delta=None):
    """Threshold (in units of sigma) for ``rule`` in minimax / sure / maxmin."""
    if np.size(z) == 0:
        raise ParameterError("empty pseudo-data")
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    if rule == "minimax":
        if eps is None:
            raise ParameterError("minimax tuning needs eps")
        return theory.minimax_tau(eps)
    if rule == "maxmin":
        if delta is None:
            raise ParameterError("maxmin tuning needs delta")
        return theory.maxmin_alpha(delta)
    if rule == "sure":
        return sure_threshold(z, sigma)
    raise ParameterError(f"unknown tuning rule {rule!r}")


class SoftThreshold:
    """``eta(z) = soft(z, tau * sigma)`` with tau fixed or tuned per call."""

    kind = "soft-threshold"
    scalar = True

    def __init__(self, rule="minimax", eps=None, delta=None, tau=None):
        if rule == "fixed" and (tau is None or tau < 0):
            raise ParameterError("fixed tuning needs tau >= 0")
        self.rule, self.eps, self.delta, self.tau = rule, eps, delta, tau
        if rule in ("minimax", "maxmin"):
            self.tau = tune_threshold([0.0], 1.0, rule, eps, delta)

    def __call__(self, z, sigma, seed=None):
        tau = self.tau if self.rule != "sure" else sure_threshold(z, sigma)
        x = soft_threshold(z, tau, sigma)
        return DenoiseResult(x, float(st_divergence(z, tau, sigma)), tau)

    def estimate(self, z, sigma):
        return self(z, sigma).x

    def fixed(self, tau):
        """Same denoiser with the threshold frozen."""
        return SoftThreshold("fixed", tau=tau)


# --- 1D total variation -------------------------------------------------------

def _tv1d_condat(y, lam, out):
    # direct (taut-string type) algorithm, exact up to rounding; the state
    # is the current segment [k0, k], bounds vmin/vmax on its value and the
    # running dual offsets umin/umax
    n = len(y)
    k = k0 = kplus = kminus = 0
    umin, umax = lam, -lam
    vmin, vmax = y[0] - lam, y[0] + lam
    twolam, minlam = 2.0 * lam, -lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                end = max(k0, kminus)
                out[k0:end + 1] = vmin
                k = kminus = k0 = end + 1
                vmin = y[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                end = max(k0, kplus)
                out[k0:end + 1] = vmax
                k = kplus = k0 = end + 1
                vmax = y[k0]
                umax = minlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                out[k0:k + 1] = vmin
                return
        umin += y[k + 1] - vmin
        if umin < minlam:
            end = max(k0, kminus)
            out[k0:end + 1] = vmin
            k = kminus = kplus = k0 = end + 1
            vmin = y[k0]
            vmax = vmin + twolam
            umin, umax = lam, minlam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            end = max(k0, kplus)
            out[k0:end + 1] = vmax
            k = kminus = kplus = k0 = end + 1
            vmax = y[k0]
            vmin = vmax - twolam
            umin, umax = lam, minlam
            continue
        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (kminus - k0 + 1)
            umin = lam
        if umax <= minlam:
            kplus = k
            vmax += (umax + lam) / (kplus - k0 + 1)
            umax = minlam


def tv1d(z, lam):
    """Exact minimiser of ``0.5 ||x - z||^2 + lam * sum |x[i+1] - x[i]|``."""
    if lam < 0:
        raise ParameterError("lambda must be non-negative")
    z = np.ascontiguousarray(z, dtype=float)
    if z.ndim != 1:
        raise DimensionError("tv1d expects a vector")
    if z.size < 2 or lam == 0:
        return z.copy()
    out = np.empty_like(z)
    _tv1d_condat(z.tolist(), float(lam), out)
    return out


def tv1d_divergence(x_out):
    """Number of constant segments of a tv1d output."""
    x_out = np.asarray(x_out)
    if x_out.size == 0:
        return 0
    return 1 + int(np.count_nonzero(np.diff(x_out)))


def tv1d_sure(z, sigma, tau):
    x = tv1d(z, tau * sigma)
    return -z.size * sigma ** 2 + float(np.sum((x - z) ** 2)) + 2 * sigma ** 2 * tv1d_divergence(x), x


class TV1D:
    """1D TV denoiser with ``lam = tau * sigma``; tau fixed or chosen by SURE
    over a geometric grid."""

    kind = "tv-1d"
    scalar = False

    def __init__(self, rule="sure", tau=None, grid=None):
        if rule == "fixed" and (tau is None or tau < 0):
            raise ParameterError("fixed tuning needs tau >= 0")
        if rule not in ("sure", "fixed"):
            raise ParameterError(f"unknown TV tuning {rule!r}")
        self.rule, self.tau = rule, tau
        self.grid = np.geomspace(0.05, 5.0, 40) if grid is None else np.asarray(grid)

    def __call__(self, z, sigma, seed=None):
        z = np.asarray(z, dtype=float)
        if self.rule == "fixed":
            tau = self.tau
            x = tv1d(z, tau * sigma)
        else:
            best = None
            for tau in self.grid:
                risk, x = tv1d_sure(z, sigma, tau)
                if best is None or risk < best[0]:
                    best = (risk, tau, x)
            _, tau, x = best
        return DenoiseResult(x, float(tv1d_divergence(x)), float(tau))

    def estimate(self, z, sigma):
        return self(z, sigma).x

    def fixed(self, tau):
        return TV1D("fixed", tau=tau)


# --- 2D isotropic total variation ---------------------------------------------

def _grad(X):
    g1 = np.zeros_like(X)
    g2 = np.zeros_like(X)
    g1[:-1] = X[1:] - X[:-1]
    g2[:, :-1] = X[:, 1:] - X[:, :-1]
    return g1, g2


def _grad_adjoint(p1, p2):
    out = np.zeros_like(p1)
    out[:-1] -= p1[:-1]
    out[1:] += p1[:-1]
    out[:, :-1] -= p2[:, :-1]
    out[:, 1:] += p2[:, :-1]
    return out


def tv_iso(X):
    """Isotropic TV with forward differences (zero at the last row/column)."""
    g1, g2 = _grad(np.asarray(X, dtype=float))
    return float(np.sum(np.sqrt(g1 * g1 + g2 * g2)))


def _fgp(Z, lam, p1, p2, max_iter, tol):
    """Fast gradient projection on the dual of the isotropic TV prox.

    ``p1, p2`` are the warm-start dual fields. Returns
    (X, p1, p2, relative duality gap, iterations).
    """
    q1, q2 = p1.copy(), p2.copy()
    t = 1.0
    step = 1.0 / (8.0 * lam)
    zz = float(np.sum(Z * Z))
    gap = math.inf
    it = 0
    while it < max_iter:
        it += 1
        g1, g2 = _grad(Z - lam * _grad_adjoint(q1, q2))
        a, b = q1 + step * g1, q2 + step * g2
        scale = np.maximum(np.sqrt(a * a + b * b), 1.0)
        a /= scale
        b /= scale
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_new
        q1, q2 = a + mom * (a - p1), b + mom * (b - p2)
        p1, p2, t = a, b, t_new
        if it % 5 == 0 or it == max_iter:
            X = Z - lam * _grad_adjoint(p1, p2)
            primal = 0.5 * float(np.sum((X - Z) ** 2)) + lam * tv_iso(X)
            dual = 0.5 * zz - 0.5 * float(np.sum(X * X))
            gap = (primal - dual) / max(primal, 1e-300)
            if primal - dual <= 1e-14 * zz or gap <= tol:
                break
    X = Z - lam * _grad_adjoint(p1, p2)
    return X, p1, p2, gap, it


@dataclass
class TV2DResult:
    x: np.ndarray
    lam: float
    gap: float
    converged: bool
    dual: tuple


def tv2d_fixed(Z, lam, max_iter=100, tol=1e-5, warm=None):
    """``argmin 0.5 ||X - Z||_F^2 + lam * TV_iso(X)``."""
    Z = np.ascontiguousarray(Z, dtype=float)
    if Z.ndim != 2:
        raise DimensionError("tv2d expects an image")
    if lam < 0:
        raise ParameterError("lambda must be non-negative")
    if lam == 0:
        return TV2DResult(Z.copy(), 0.0, 0.0, True, (np.zeros_like(Z), np.zeros_like(Z)))
    p1, p2 = (np.zeros_like(Z), np.zeros_like(Z)) if warm is None else (warm[0].copy(), warm[1].copy())
    X, p1, p2, gap, _ = _fgp(Z, float(lam), p1, p2, int(max_iter), float(tol))
    return TV2DResult(X, float(lam), float(gap), gap <= tol, (p1, p2))


def tv2d(Z, sigma, outer=5, max_iter=100, tol=1e-5, lam0=None):
    """Isotropic TV denoising with lambda set by the discrepancy principle.

    Starting from ``lam0`` (default ``sigma``), lambda is updated
    multiplicatively, ``lam <- lam * sigma / rms(X - Z)``, so that the
    residual energy per pixel approaches ``sigma^2``. The dual field is
    warm-started across updates. Returns the result at the last lambda.
    """
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    Z = np.ascontiguousarray(Z, dtype=float)
    lam = sigma if lam0 is None else lam0
    res = None
    for k in range(outer):
        res = tv2d_fixed(Z, lam, max_iter, tol, None if res is None else res.dual)
        if k == outer - 1:
            break
        rms = math.sqrt(float(np.mean((res.x - Z) ** 2)))
        if rms == 0.0:
            break  # image already constant / TV-flat
        lam = lam * min(sigma / rms, 10.0)
    return res


def mc_divergence(denoiser, z, sigma, probe_seed, epsilon=None, base=None):
    """Monte-Carlo divergence ``<b, eta(z + eps b) - eta(z)> / eps``.

    ``denoiser`` maps a vector to a vector; ``base`` may pass a precomputed
    ``eta(z)``. The probe b is standard normal from ``(probe_seed, 'probe')``.
    """
    z = np.asarray(z, dtype=float)
    eps = sigma / 1000.0 if epsilon is None else epsilon
    if eps <= 0:
        raise ParameterError("probe step must be positive")
    b = keyed_rng(probe_seed, "probe").standard_normal(z.shape)
    fz = denoiser(z) if base is None else base
    return float(np.sum(b * (denoiser(z + eps * b) - fz)) / eps)


class TV2D:
    """Isotropic TV denoiser on a column-major vectorised square image, with
    the Onsager divergence from one Monte-Carlo probe at the chosen lambda."""

    kind = "tv-2d"
    scalar = False

    def __init__(self, side, outer=5, max_iter=100, tol=1e-5, lam_scale=None):
        self.side, self.outer, self.max_iter, self.tol = side, outer, max_iter, tol
        self.lam_scale = lam_scale  # fixed lambda / sigma; None = adaptive

    def _img(self, v):
        v = np.asarray(v, dtype=float)
        if v.size != self.side ** 2:
            raise DimensionError(f"expected {self.side}^2 entries, got {v.size}")
        return v.reshape(self.side, self.side, order="F")

    def _solve(self, Z, sigma):
        if self.lam_scale is None:
            return tv2d(Z, sigma, self.outer, self.max_iter, self.tol)
        return tv2d_fixed(Z, self.lam_scale * sigma, self.max_iter, self.tol)

    def estimate(self, z, sigma):
        return self._solve(self._img(z), sigma).x.ravel(order="F")

    def __call__(self, z, sigma, seed=0):
        res = self._solve(self._img(z), sigma)
        warm = res.dual

        def eta(v):
            return tv2d_fixed(self._img(v), res.lam, self.max_iter, self.tol, warm).x.ravel(order="F")

        x = res.x.ravel(order="F")
        div = mc_divergence(eta, np.asarray(z, dtype=float), sigma, seed, base=eta(z))
        return DenoiseResult(x, min(max(div, 0.0), float(x.size)), res.lam,
                             {"gap": res.gap, "converged": res.converged})

    def fixed(self, lam_scale):
        return TV2D(self.side, self.outer, self.max_iter, self.tol, lam_scale)
