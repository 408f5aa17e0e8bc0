"""Minimax MSE of soft thresholding, phase-transition curves and
noise-sensitivity bounds for HR and multi-resolution AMP."""

import csv
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.interpolate import PchipInterpolator
from scipy.stats import norm

from .errors import BoundDivergesError, ParameterError

TAU_MAX = 12.0


def st_zero_risk(tau):
    """``E[eta_1(Z; tau)^2]`` for Z ~ N(0, 1)."""
    tau = np.asarray(tau, dtype=float)
    return 2.0 * ((1.0 + tau ** 2) * norm.sf(tau) - tau * norm.pdf(tau))


def minimax_objective(tau, eps):
    return eps * (1.0 + tau ** 2) + (1.0 - eps) * st_zero_risk(tau)


def minimax_mse_st(eps):
    """Return ``(M(eps), tau*(eps))`` for soft thresholding on the sparse
    family (the worst case puts the nonzeros at infinity)."""
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise ParameterError(f"eps={eps} outside [0, 1]")
    if eps == 0.0:
        return 0.0, math.inf
    if eps == 1.0:
        return 1.0, 0.0
    res = optimize.minimize_scalar(lambda t: minimax_objective(t, eps), bounds=(0.0, TAU_MAX),
                                   method="bounded", options={"xatol": 1e-10})
    return float(res.fun), float(res.x)


def _grid(points=200):
    # denser near 0 where the curve is steep
    u = np.linspace(0.0, 1.0, points)
    return u ** 2


@dataclass(frozen=True)
class MinimaxCurve:
    eps: np.ndarray
    M: np.ndarray
    tau: np.ndarray
    family: str = "simple-sparse-soft-threshold"

    @classmethod
    def build(cls, points=200):
        eps = _grid(points)
        vals = [minimax_mse_st(e) for e in eps]
        M = np.array([v[0] for v in vals])
        tau = np.array([v[1] for v in vals])
        return cls(eps, M, tau)

    @functools.cached_property
    def _interp(self):
        # interpolate sqrt-scaled eps to tame the infinite slope at 0
        return PchipInterpolator(np.sqrt(self.eps), self.M)

    def __call__(self, eps):
        return self._interp(np.sqrt(np.clip(eps, 0.0, 1.0)))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eps", "M", "tau_star"])
            for e, m, t in zip(self.eps, self.M, self.tau):
                w.writerow([format(e, ".17g"), format(m, ".17g"), format(t, ".17g")])


@functools.lru_cache(maxsize=None)
def minimax_curve(points=200):
    return MinimaxCurve.build(points)


def minimax_tau(eps):
    return minimax_mse_st(eps)[1]


def inverse_minimax(delta):
    """``eps`` with ``M(eps) = delta``."""
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    return optimize.brentq(lambda e: minimax_mse_st(e)[0] - delta, 1e-12, 1.0 - 1e-12,
                           xtol=1e-13)


def ptc_hr(eps):
    """Critical undersampling: AMP-ST succeeds for ``delta1 > M(eps)``."""
    return minimax_mse_st(eps)[0]


def ptc_lr(eps1, d):
    """Critical ``delta1`` for LR-AMP at factor d: ``M(d eps1) / d``."""
    if d * eps1 > 1.0:
        raise ParameterError(f"d*eps1 = {d * eps1} > 1 leaves the signal family")
    return minimax_mse_st(d * eps1)[0] / d


def rho_star(delta, d=1):
    """Critical ``rho_1 = eps_1 / delta_1`` at ``delta_1 = delta`` for factor d."""
    return inverse_minimax(d * delta) / (d * delta)


def ns_bound_lr(eps1, d, delta1, sigma_w_sq, approx_energy, m):
    """Noise-sensitivity bound on the LR MSE."""
    M = minimax_mse_st(d * eps1)[0]
    if d * delta1 <= M:
        raise BoundDivergesError(f"d*delta1={d * delta1} <= M(d*eps1)={M}: at or above the PTC")
    return M / (1.0 - M / (d * delta1)) * (sigma_w_sq + approx_energy / m)


def ns_bound_pixel_worstcase(eps1, d, delta1, sigma_w_sq):
    """Signal-independent version of :func:`ns_bound_lr` for 8-bit images,
    using the worst approximation energy ``255^2 n1`` with ``m = delta1 n1``
    folded as ``255^2 d / M``."""
    M = minimax_mse_st(d * eps1)[0]
    if d * delta1 <= M:
        raise BoundDivergesError(f"d*delta1={d * delta1} <= M(d*eps1)={M}: at or above the PTC")
    return M / (1.0 - M / (d * delta1)) * (sigma_w_sq + 255.0 ** 2 * d / M)


def ns_bound_hr_three_point(delta1, gamma):
    """Reference HR noise sensitivity at the three-point prior,
    ``delta1 gamma / (1 - gamma)`` (for unit noise variance)."""
    return delta1 * gamma / (1.0 - gamma)


@dataclass
class ConcavityReport:
    concavity_violations: list
    subadditivity_violations: list

    @property
    def ok(self):
        return not self.concavity_violations and not self.subadditivity_violations


def concavity_check(eps_grid, qs=(0.25, 0.5, 0.75), ds=(2, 3, 4), tol=1e-6):
    eps_grid = np.asarray(eps_grid, dtype=float)
    M = {float(e): minimax_mse_st(e)[0] for e in eps_grid}
    conc, sub = [], []
    for i, ea in enumerate(eps_grid):
        for eb in eps_grid[i:]:
            for q in qs:
                mix = q * ea + (1 - q) * eb
                lhs = minimax_mse_st(mix)[0]
                rhs = q * M[float(ea)] + (1 - q) * M[float(eb)]
                if lhs < rhs - tol:
                    conc.append((float(ea), float(eb), q, lhs - rhs))
    for e in eps_grid:
        for d in ds:
            if d * e <= 1.0:
                gap = minimax_mse_st(d * e)[0] / d - M[float(e)]
                if gap > tol:
                    sub.append((float(e), d, gap))
    return ConcavityReport(conc, sub)


def critical_d(eps1, delta1, xtol=1e-4):
    """Smallest real d >= 1 with ``M(d eps1) / d = delta1``.

    Returns 1.0 when HR-AMP already succeeds (no downsampling needed) and
    raises if even the largest admissible d (``1 / eps1``) does not reach
    the curve.
    """
    f = lambda d: minimax_mse_st(min(d * eps1, 1.0))[0] / d - delta1
    if f(1.0) <= 0:
        return 1.0
    hi = 1.0 / eps1
    if f(hi) > 0:
        raise ParameterError("no downsampling factor reaches the phase transition")
    return optimize.brentq(f, 1.0, hi, xtol=xtol)


# --- tuning helpers ------------------------------------------------------------

def maxmin_alpha(delta):
    """Threshold multiplier for an unknown sparsity level at undersampling
    ``delta``: the minimax threshold of the sparsest family AMP can still
    recover, ``tau*(M^{-1}(delta))``."""
    return minimax_tau(inverse_minimax(delta))


def three_point_risk(a, tau, eps, draws=None):
    """Per-coordinate MSE of ``eta_1(.; tau)`` on ``X + Z``, X in {0, +-a} with
    ``P(X != 0) = eps``."""
    return (1.0 - eps) * float(st_zero_risk(tau)) + eps * _st_risk_at(a, tau)


def _st_risk_at(a, tau):
    """``E (eta_1(a + Z; tau) - a)^2`` in closed form."""
    lo, hi = -tau - a, tau - a
    # region |a+Z|<=tau: estimate 0, error a^2
    mid = a * a * (norm.cdf(hi) - norm.cdf(lo))
    # region a+Z>tau: error Z - tau; region a+Z<-tau: error Z + tau
    def tail(c, shift):
        # E[(Z + shift)^2; Z > c]
        return (1 + shift ** 2) * norm.sf(c) + (c + 2 * shift) * norm.pdf(c)
    upper = tail(hi, -tau)
    lower = tail(-lo, -tau)  # by symmetry Z -> -Z
    return float(mid + upper + lower)


def three_point_mu(gamma, eps, delta, sigma_w=1.0, tau=None):
    """Amplitude mu of the three-point prior (mass eps at +-mu) whose
    HR-AMP fixed point has MSE ``delta gamma / (1 - gamma) sigma_w^2``.

    At that fixed point the effective noise is ``s^2 = sigma_w^2 / (1 - gamma)``
    and the normalised risk ``r(mu / s)`` of the threshold rule must equal
    ``delta gamma``; this is solved for ``a = mu / s``. Returns 0 when even
    the all-zero signal exceeds the target risk.
    """
    if not 0.0 < gamma < 1.0:
        raise ParameterError("gamma must lie in (0, 1)")
    tau = minimax_tau(eps) if tau is None else tau
    target = delta * gamma
    r0 = three_point_risk(0.0, tau, eps)
    s = sigma_w / math.sqrt(1.0 - gamma)
    if target <= r0:
        return 0.0
    rmax = (1.0 - eps) * float(st_zero_risk(tau)) + eps * (1.0 + tau ** 2)
    if target >= rmax:
        raise ParameterError(f"delta*gamma={target} exceeds the worst-case risk {rmax}")
    a = optimize.brentq(lambda a: three_point_risk(a, tau, eps) - target, 0.0, 1e3, xtol=1e-12)
    return a * s
