"""AMP iteration (HR and multi-resolution) and state evolution."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed, keyed_rng
from .errors import DimensionError, DivergenceError, ParameterError
from .resampling import lambda_for
from .sensing import dense_operator, effective_lr_operator, synthesis_operator


@dataclass
class AmpState:
    iter: int
    sigma: float
    b: float
    mse: float = None
    x: np.ndarray = None


@dataclass
class AmpResult:
    x: np.ndarray
    history: list
    stop: str

    @property
    def iterations(self):
        return len(self.history)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "sigma_t", "mse_vs_truth", "b_t"])
            for s in self.history:
                mse = "" if s.mse is None else format(s.mse, ".17g")
                w.writerow([s.iter, format(s.sigma, ".17g"), mse, format(s.b, ".17g")])


def amp_run(op, y, denoiser, max_iter=30, tol=1e-6, seed=0, onsager=True, truth=None,
            keep_history=False, abs_tol=1e-10, blowup=1e6, noise_scale=1.0):
    """Run AMP on ``y = op x + w``.

    ``op`` is a LinearOperator (``matvec``/``rmatvec``), ``denoiser`` is called
    as ``denoiser(z, sigma, probe_seed)``. Iteration t uses
    ``sigma_t = ||r_t|| / sqrt(m)``; ``history[t]`` describes the estimate
    ``x^{t+1}`` (its MSE against ``truth`` when given) together with the
    ``sigma_t`` and ``b_t`` used to produce it.

    Stops after ``max_iter`` iterations, when ``sigma`` changes by less than
    ``tol`` relative, or when ``sigma`` falls below ``abs_tol * sigma_0``.

    ``noise_scale`` multiplies the noise level handed to the denoiser. It is
    the RMS column norm of ``op``; operators with unit-norm columns use 1.
    """
    if max_iter < 1:
        raise ParameterError("max_iter must be at least 1")
    y = np.asarray(y, dtype=float)
    m, n = op.shape
    if y.shape != (m,):
        raise DimensionError(f"operator has {m} rows, y has shape {y.shape}")
    if truth is not None:
        truth = np.asarray(truth, dtype=float).ravel(order="F")
        if truth.size != n:
            raise DimensionError("truth does not match the operator width")

    x = np.zeros(n)
    r = y.copy()
    sigma = float(np.linalg.norm(r)) / math.sqrt(m)
    sigma0 = sigma
    history = []
    stop = "max_iter"
    if sigma == 0.0:
        return AmpResult(x, [AmpState(1, 0.0, 0.0, _mse(x, truth))], "exact")
    for t in range(max_iter):
        z = x + op.rmatvec(r)
        res = denoiser(z, noise_scale * sigma, derive_seed(seed, "probe", t))
        x = np.asarray(res.x, dtype=float)
        b = res.divergence / m
        r = y - op.matvec(x) + (b * r if onsager else 0.0)
        history.append(AmpState(t + 1, sigma, b, _mse(x, truth), x.copy() if keep_history else None))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(r))):
            raise DivergenceError("non-finite AMP state", t + 1)
        new_sigma = float(np.linalg.norm(r)) / math.sqrt(m)
        if new_sigma > blowup * sigma0:
            raise DivergenceError(f"sigma grew by more than {blowup:g}x", t + 1)
        if new_sigma <= abs_tol * sigma0:
            stop = "converged"
            break
        if abs(new_sigma - sigma) < tol * sigma:
            stop = "stalled"
            break
        sigma = new_sigma
    return AmpResult(x, history, stop)


def _mse(x, truth):
    if truth is None:
        return None
    return float(np.mean((x - truth) ** 2))


# --- state evolution -----------------------------------------------------------

@dataclass
class SeTrajectory:
    theta: list
    sigma: list
    converged: bool

    @property
    def fixed_point(self):
        return self.theta[-1]


def se_predict(x_target, delta, sigma_noise_sq, denoiser, iters=30, mc_draws=1, seed=0,
               rtol=1e-6):
    """Monte-Carlo state evolution.

    ``theta[0] = ||x||^2 / n``; ``sigma[t]^2 = theta[t] / delta + sigma_noise_sq``
    and ``theta[t+1]`` is the per-entry MSE of ``denoiser`` applied to
    ``x + sigma[t] e`` averaged over ``mc_draws`` Gaussian draws.
    """
    if delta <= 0:
        raise ParameterError("delta must be positive")
    x = np.asarray(x_target, dtype=float).ravel(order="F")
    n = x.size
    estimate = getattr(denoiser, "estimate", None)
    theta = [float(np.sum(x * x)) / n]
    sigmas = []
    converged = False
    for t in range(iters):
        s = math.sqrt(theta[-1] / delta + sigma_noise_sq)
        sigmas.append(s)
        if s == 0.0:
            theta.append(0.0)
            converged = True
            break
        acc = 0.0
        for k in range(mc_draws):
            e = keyed_rng(seed, "se", t, k).standard_normal(n)
            z = x + s * e
            xh = estimate(z, s) if estimate else denoiser(z, s, derive_seed(seed, "se-probe", t, k)).x
            acc += float(np.sum((xh - x) ** 2)) / n
        theta.append(acc / mc_draws)
        if abs(theta[-1] - theta[-2]) <= rtol * max(theta[-2], 1e-300) or theta[-1] <= 1e-14 * theta[0]:
            converged = True
            if t >= 2:
                break
    return SeTrajectory(theta, sigmas, converged)


# --- reconstruction modes --------------------------------------------------------

@dataclass
class MRProblem:
    """A measured signal or image plus everything needed to reconstruct it at
    high (``hr``) or low (``lr``) resolution.

    ``make_denoiser(level, size)`` builds the denoiser for the AMP unknown of
    the given level. ``transform`` is the HR sparsifying transform when AMP
    runs in the coefficient domain (``None`` runs it on samples / pixels).
    """

    ensemble: object
    y: np.ndarray
    pair: object
    make_denoiser: object
    ndim: int = 1
    transform: object = None
    max_iter: int = 30
    tol: float = 1e-6
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n1(self):
        return self.pair.n1

    def operator(self, level):
        if level in self._cache:
            return self._cache[level]
        if level == "hr":
            op = self.ensemble.as_operator()
            if self.ensemble.dense is not None:
                op = dense_operator(self.ensemble.dense)
            t = self.transform
        else:
            op = effective_lr_operator(self.ensemble, self.pair, self.ndim)
            t = None if self.transform is None else self.transform.coarse(self.pair.d)
        if t is not None:
            op = synthesis_operator(op, t, t.n if self.ndim == 2 else None)
        self._cache[level] = op
        return op

    def noise_scale(self, level):
        """RMS column norm of the level's operator (1 unless Λ only
        approximately normalises the columns)."""
        if level == "hr" or self.pair.exact_cond1:
            return 1.0
        key = ("scale", level)
        if key not in self._cache:
            M = getattr(self.operator(level), "matrix", None)
            if M is not None:
                c = math.sqrt(float(np.mean(np.sum(M * M, axis=0))))
            else:
                # unit-norm columns of A: ||A U Λ e_k|| ~ Λ ||U e_k||
                U = self.pair.up_matrix()
                sq = np.sum(U * U, axis=0)
                k = self.ndim
                c = lambda_for(self.pair, k) * math.sqrt(float(np.mean(sq)) ** k)
            self._cache[key] = c
        return self._cache[key]

    def to_signal(self, level, v):
        """Map an AMP estimate to samples (vector) or pixels (image)."""
        side = self.n1 if level == "hr" else self.pair.n_d
        t = self.transform if level == "hr" else (
            None if self.transform is None else self.transform.coarse(self.pair.d))
        scale = 1.0 if level == "hr" else lambda_for(self.pair, self.ndim)
        if self.ndim == 2:
            X = v.reshape(side, side, order="F")
            X = X if t is None else t.inverse2d(X)
        else:
            X = v if t is None else t.inverse(v)
        return scale * X

    def run(self, level, truth=None):
        op = self.operator(level)
        size = op.shape[1]
        den = self.make_denoiser(level, size)
        return amp_run(op, self.y, den, self.max_iter, self.tol, self.seed, truth=truth,
                       noise_scale=self.noise_scale(level))


def reconstruct_modes(problem, mode, hr_result=None, lr_result=None):
    """Reconstruct in one of the modes ``hr``, ``lr``, ``h2l``, ``l2h``.

    Previously computed AMP results can be passed to avoid re-running.
    Returns ``(estimate, amp_result)``.
    """
    if mode not in ("hr", "lr", "h2l", "l2h"):
        raise ParameterError(f"unknown mode {mode!r}")
    level = "hr" if mode in ("hr", "h2l") else "lr"
    res = hr_result if level == "hr" else lr_result
    if res is None:
        res = problem.run(level)
    est = problem.to_signal(level, res.x)
    p = problem.pair
    if mode == "h2l":
        est = p.downsample2d(est) if problem.ndim == 2 else p.downsample1d(est)
    elif mode == "l2h":
        est = p.upsample2d(est) if problem.ndim == 2 else p.upsample1d(est)
    return est, res
