"""Experiment drivers behind the command-line interface.

Every work item is a pure function of its arguments (including a derived
seed), so sweeps give the same numbers serially and in a process pool.
"""

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._rng import derive_seed
from .amp import MRProblem, amp_run, reconstruct_modes, se_predict
from .denoise import TV1D, TV2D, SoftThreshold
from .errors import DivergenceError, ParameterError
from .resampling import approximation_energy, lambda_for, make_pair
from .sensing import NoiseModel, dense_operator, effective_lr_operator, gen_ensemble, sample
from .signals import (Image, ThreePointSpec, gen_bernoulli_gaussian, gen_lowpass_sparse,
                      gen_piecewise_constant, gen_three_point_mixture, psnr)
from . import theory

FAMILIES = {"ss": 2000, "pc": 628}
IMAGE_METHODS = ("st-dct", "st-wavelet", "tv2d-repeat", "tv2d-bicubic")
MODES = ("hr", "lr", "h2l", "l2h")


def fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def pmap(fn, items, threads=1):
    """Ordered map, in a process pool when ``threads > 1``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, *zip(*items)))


# --- phase transitions -------------------------------------------------------------

def ptc_trial(family, n1, d, delta, rho, seed, max_iter=500):
    """One noiseless LR-AMP reconstruction at ``(delta_1, rho_1)``.

    ``ss``: x is low-pass sparse (identity basis, rate ``d eps_1`` on the first
    ``n1/d`` entries) so that it has no approximation error; AMP-ST with the
    minimax threshold. ``pc``: the LR signal is piecewise constant with
    ``k = rho m`` expected change points over ``n1/d`` samples, repeated d times;
    AMP-TV1D. Returns the NMSE of the LR estimate (``inf`` on divergence);
    ``nan`` when the geometry is infeasible (``m >= n_d``).
    """
    m = int(round(delta * n1))
    n_d = n1 // d
    if m >= n_d or m < 1:
        return math.nan
    k = rho * m
    if family == "ss":
        eps_d = min(k / n_d, 1.0)
        x = gen_lowpass_sparse(n1, d, eps_d, seed).samples
        pair = make_pair("transform-trunc", n1, d, "identity")
        den = SoftThreshold("minimax", eps=eps_d)
    elif family == "pc":
        eps_d = min(k / max(n_d - 1, 1), 1.0)
        pair = make_pair("decimate-repeat", n1, d)
        x = pair.upsample1d(gen_piecewise_constant(n_d, eps_d, seed).samples)
        den = TV1D("sure")
    else:
        raise ParameterError(f"unknown family {family!r}")
    e = gen_ensemble(m, n1, seed)
    y = sample(e, x)
    op = effective_lr_operator(e, pair, ndim=1) if d > 1 else dense_operator(e.dense)
    target = pair.downsample1d(x) / lambda_for(pair, 1) if d > 1 else x
    if not np.any(target):
        return 0.0
    try:
        res = amp_run(op, y, den, max_iter=max_iter, tol=0.0, seed=seed, abs_tol=1e-9)
    except DivergenceError:
        return math.inf
    return float(np.sum((res.x - target) ** 2) / np.sum(target ** 2))


@dataclass
class PtcGrid:
    family: str
    d: int
    delta_grid: np.ndarray
    rho_grid: np.ndarray
    trials: int
    success_threshold: float
    success_rate: np.ndarray  # (len(delta), len(rho)); nan = infeasible
    seed: int = 0

    def crossings(self):
        return [crossing(self.rho_grid, row) for row in self.success_rate]

    def write_csv(self, path):
        rows = []
        for i, dl in enumerate(self.delta_grid):
            for j, rh in enumerate(self.rho_grid):
                rate = self.success_rate[i, j]
                theo = _theory_rho(self.family, dl, self.d)
                rows.append([self.family, self.d, i, j, float(dl), float(rh),
                             "skipped" if np.isnan(rate) else float(rate),
                             self.trials, self.success_threshold, self.seed,
                             "" if theo is None else theo])
        write_csv(path, ["family", "d", "delta_index", "rho_index", "delta", "rho",
                         "success_rate", "trials", "success_threshold", "master_seed",
                         "rho_theory"], rows)


def _theory_rho(family, delta, d):
    if family != "ss" or not 0 < d * delta < 1:
        return None
    return theory.rho_star(delta, d)


def crossing(rho_grid, rates, level=0.5):
    """First rho at which the success rate drops through ``level`` (linear
    interpolation between neighbouring cells); ``nan`` if it never does."""
    rho_grid = np.asarray(rho_grid, dtype=float)
    rates = np.asarray(rates, dtype=float)
    ok = ~np.isnan(rates)
    r, s = rho_grid[ok], rates[ok]
    for j in range(len(r) - 1):
        if s[j] >= level > s[j + 1]:
            return float(r[j] + (s[j] - level) / (s[j] - s[j + 1]) * (r[j + 1] - r[j]))
    return math.nan


def ptc_sweep(family, d, delta_grid=None, rho_grid=None, trials=20, seed=0, threads=1,
              n1=None, max_iter=500, success_threshold=None):
    n1 = n1 or FAMILIES[family]
    delta_grid = np.linspace(0.05, 0.95, 30) if delta_grid is None else np.asarray(delta_grid)
    rho_grid = np.linspace(0.05, 0.95, 30) if rho_grid is None else np.asarray(rho_grid)
    thr = success_threshold or (1e-6 if family == "ss" else 1e-4)
    items = []
    for i, dl in enumerate(delta_grid):
        for j, rh in enumerate(rho_grid):
            for t in range(trials):
                items.append((family, n1, d, float(dl), float(rh),
                              derive_seed(seed, "ptc", family, d, i, j, t), max_iter))
    nm = np.array(pmap(ptc_trial, items, threads)).reshape(len(delta_grid), len(rho_grid), trials)
    with np.errstate(invalid="ignore"):
        rate = np.where(np.isnan(nm).any(axis=2), np.nan, (nm <= thr).mean(axis=2))
    return PtcGrid(family, d, delta_grid, rho_grid, trials, thr, rate, seed)


# --- noise sensitivity ---------------------------------------------------------------

def noise_sensitivity_trial(gamma, n1, delta1, rho1, d, sigma_w, seed, max_iter=200):
    eps1 = rho1 * delta1
    m = int(round(delta1 * n1))
    spec = ThreePointSpec.from_gamma(gamma, eps1, delta1, sigma_w)
    x = gen_three_point_mixture(spec, n1, d, seed).samples
    e = gen_ensemble(m, n1, seed)
    y = sample(e, x, NoiseModel(sigma_w), seed)
    hr = amp_run(dense_operator(e.dense), y, SoftThreshold("minimax", eps=eps1),
                 max_iter=max_iter, tol=1e-9, seed=seed)
    pair = make_pair("transform-trunc", n1, d, "identity")
    lr = amp_run(effective_lr_operator(e, pair), y, SoftThreshold("minimax", eps=d * eps1),
                 max_iter=max_iter, tol=1e-9, seed=seed)
    target_lr = pair.downsample1d(x) / lambda_for(pair, 1)
    return (float(np.mean((hr.x - x) ** 2)), float(np.mean((lr.x - target_lr) ** 2)),
            approximation_energy(pair, x), spec.mu)


def noise_sensitivity(gammas=(0.95, 0.98, 0.99, 0.998), trials=20, seed=0, threads=1,
                      n1=2000, delta1=0.2, rho1=0.3, d=2, sigma_w=1.0, max_iter=200):
    """Rows: gamma, mu, HR MSE, LR MSE, LR bound (measured approximation
    energy), HR reference ``delta gamma/(1-gamma) sigma_w^2``, trials, seed."""
    items = [(g, n1, delta1, rho1, d, sigma_w, derive_seed(seed, "ns", i, t), max_iter)
             for i, g in enumerate(gammas) for t in range(trials)]
    out = np.array(pmap(noise_sensitivity_trial, items, threads)).reshape(len(gammas), trials, 4)
    m = int(round(delta1 * n1))
    rows = []
    for i, g in enumerate(gammas):
        hr, lr, energy, mu = out[i].mean(axis=0)
        bound = theory.ns_bound_lr(rho1 * delta1, d, delta1, sigma_w ** 2, energy, m)
        rows.append({"gamma": g, "mu": mu, "hr_mse": hr, "lr_mse": lr, "lr_bound": bound,
                     "hr_reference": theory.ns_bound_hr_three_point(delta1, g) * sigma_w ** 2,
                     "approx_energy": energy, "trials": trials, "seed": seed})
    return rows


# --- images ---------------------------------------------------------------------------

def _wavelet_levels(levels, d):
    return levels if levels is not None else int(round(math.log2(d))) + 3


def image_problem(image, method, delta1, d, sigma_w=0.0, seed=0, threshold="sure",
                  levels=None, max_iter=30):
    """Build the measured problem for an image reconstruction experiment.

    Returns ``(problem, reference_hr, reference_lr)``.
    """
    from .transforms import Transform

    X = np.asarray(image, dtype=float)
    n = X.shape[0]
    if X.shape != (n, n):
        raise ParameterError("images must be square")
    if method not in IMAGE_METHODS:
        raise ParameterError(f"unknown method {method!r}")
    m = int(round(delta1 * n * n))
    transform = None
    if method == "st-dct":
        transform = Transform("dct", n)
        pair = make_pair("transform-trunc", n, d, transform) if d > 1 else make_pair("decimate-repeat", n, 1)
    elif method == "st-wavelet":
        transform = Transform("wavelet", n, _wavelet_levels(levels, d), "d8")
        pair = make_pair("transform-trunc", n, d, transform) if d > 1 else make_pair("decimate-repeat", n, 1)
    elif method == "tv2d-repeat":
        pair = make_pair("bicubic-repeat", n, d) if d > 1 else make_pair("decimate-repeat", n, 1)
    else:
        pair = make_pair("bicubic", n, d) if d > 1 else make_pair("decimate-repeat", n, 1)
    if d > 1 and pair.n_d ** 2 <= m:
        raise ParameterError(f"infeasible geometry: m={m} >= n_d^2={pair.n_d ** 2}")

    def make_denoiser(level, size):
        if method.startswith("tv2d"):
            return TV2D(int(round(math.sqrt(size))))
        if threshold == "maxmin":
            return SoftThreshold("maxmin", delta=min(m / size, 0.99))
        if threshold == "sure":
            return SoftThreshold("sure")
        raise ParameterError(f"threshold rule {threshold!r} needs a known sparsity")

    e = gen_ensemble(m, n * n, seed)
    y = sample(e, X.ravel(order="F"), NoiseModel(sigma_w), seed)
    problem = MRProblem(e, y, pair, make_denoiser, ndim=2, transform=transform,
                        max_iter=max_iter, seed=seed)
    return problem, X, pair.downsample2d(X) if d > 1 else X


def reconstruct_image(image, method, delta1, d, modes=MODES, sigma_w=0.0, seed=0,
                      threshold="sure", levels=None, max_iter=30):
    """Run the requested modes; returns ``{mode: (estimate, psnr, seconds)}``.

    Times cover the AMP iterations only (operator construction excluded) and
    are shared between hr/h2l and lr/l2h.
    """
    problem, ref_hr, ref_lr = image_problem(image, method, delta1, d, sigma_w, seed,
                                            threshold, levels, max_iter)
    results, runs = {}, {}
    for mode in modes:
        level = "hr" if mode in ("hr", "h2l") else "lr"
        if level not in runs:
            problem.operator(level)
            t0 = time.perf_counter()
            res = problem.run(level)
            runs[level] = (res, time.perf_counter() - t0)
        res, secs = runs[level]
        est, _ = reconstruct_modes(problem, mode, hr_result=res if level == "hr" else None,
                                   lr_result=res if level == "lr" else None)
        ref = ref_hr if mode in ("hr", "l2h") else ref_lr
        results[mode] = (est, psnr(ref, est), secs)
    return results


SIGNAL_METHODS = ("st-dct", "tv1d")


def reconstruct_signal(x, method, delta1, d, modes=MODES, sigma_w=0.0, seed=0, max_iter=30):
    """1D counterpart of :func:`reconstruct_image`.

    Returns ``{mode: (estimate, nsnr, seconds)}`` with the NSNR ratio taken
    against the HR signal (hr, l2h) or its downsampled version (lr, h2l).
    """
    from .signals import nsnr
    from .transforms import Transform

    x = np.asarray(x, dtype=float)
    n = x.size
    if method not in SIGNAL_METHODS:
        raise ParameterError(f"unknown method {method!r}")
    m = int(round(delta1 * n))
    if method == "st-dct":
        transform = Transform("dct", n)
        pair = make_pair("transform-trunc", n, d, transform)

        def make_denoiser(level, size):
            return SoftThreshold("sure")
    else:
        transform = None
        pair = make_pair("decimate-repeat", n, d)

        def make_denoiser(level, size):
            return TV1D()
    if d > 1 and pair.n_d <= m:
        raise ParameterError(f"infeasible geometry: m={m} >= n_d={pair.n_d}")
    e = gen_ensemble(m, n, seed)
    y = sample(e, x, NoiseModel(sigma_w), seed)
    problem = MRProblem(e, y, pair, make_denoiser, ndim=1, transform=transform,
                        max_iter=max_iter, seed=seed)
    ref_lr = pair.downsample1d(x)
    results, runs = {}, {}
    for mode in modes:
        level = "hr" if mode in ("hr", "h2l") else "lr"
        if level not in runs:
            problem.operator(level)
            t0 = time.perf_counter()
            res = problem.run(level)
            runs[level] = (res, time.perf_counter() - t0)
        res, secs = runs[level]
        est, _ = reconstruct_modes(problem, mode, hr_result=res if level == "hr" else None,
                                   lr_result=res if level == "lr" else None)
        ref = x if mode in ("hr", "l2h") else ref_lr
        results[mode] = (est, nsnr(ref, est), secs)
    return results


# --- state evolution comparison --------------------------------------------------------

def se_compare_bg(n=2000, delta=0.4, eps=0.08, sigma_w=0.0, trials=20, iters=20, seed=0,
                  threshold="minimax", threads=1):
    """Mean empirical per-iteration MSE of AMP-ST against the SE prediction
    (both averaged over the same ``trials`` signals)."""
    items = [(n, delta, eps, sigma_w, iters, derive_seed(seed, "se-bg", t), threshold)
             for t in range(trials)]
    out = pmap(_se_bg_trial, items, threads)
    emp = np.array([o[0] for o in out])
    pred = np.array([o[1] for o in out])
    return pred.mean(axis=0), emp.mean(axis=0), emp.std(axis=0)


def _st(threshold, eps):
    return SoftThreshold(threshold, eps=eps) if threshold == "minimax" else SoftThreshold(threshold)


def _se_bg_trial(n, delta, eps, sigma_w, iters, seed, threshold):
    m = int(round(delta * n))
    x = gen_bernoulli_gaussian(n, eps, seed).samples
    e = gen_ensemble(m, n, seed)
    y = sample(e, x, NoiseModel(sigma_w), seed)
    den = _st(threshold, eps)
    res = amp_run(dense_operator(e.dense), y, den, max_iter=iters, tol=0.0, seed=seed,
                  truth=x, abs_tol=0.0)
    emp = np.array([h.mse for h in res.history])
    pred = se_predict(x, m / n, sigma_w ** 2, den, iters=iters, seed=seed, rtol=0.0).theta[1:]
    pred = np.array(pred + [pred[-1]] * (iters - len(pred)))
    return emp, pred[:iters]


def se_compare_image(image, method, delta1, d, level="lr", sigma_w=0.0, trials=5, iters=20,
                     seed=0, threshold="sure", threads=1):
    """Empirical vs predicted MSE per iteration for an image reconstruction.

    The empirical MSE is measured on the AMP unknown (coefficients or scaled
    pixels) against its target; the prediction uses the effective noise
    ``sigma_w^2 + ||(I - U D) x||^2 / m`` at LR.
    """
    items = [(np.asarray(image, dtype=float), method, delta1, d, level, sigma_w, iters,
              derive_seed(seed, "se-img", t), threshold) for t in range(trials)]
    out = pmap(_se_image_trial, items, threads)
    emp = np.array([o[0] for o in out])
    pred = np.array([o[1] for o in out])
    return pred.mean(axis=0), emp.mean(axis=0), emp.std(axis=0)


def amp_target(problem, level, X):
    """The vector the AMP unknown should converge to for image ``X``."""
    p = problem.pair
    if level == "hr":
        T = X if problem.transform is None else problem.transform.forward2d(X)
        return T.ravel(order="F")
    Xd = p.downsample2d(X) / lambda_for(p, 2)
    t = None if problem.transform is None else problem.transform.coarse(p.d)
    T = Xd if t is None else t.forward2d(Xd)
    return T.ravel(order="F")


def _se_image_trial(X, method, delta1, d, level, sigma_w, iters, seed, threshold):
    problem, _, _ = image_problem(X, method, delta1, d, sigma_w, seed, threshold, max_iter=iters)
    target = amp_target(problem, level, X)
    op = problem.operator(level)
    den = problem.make_denoiser(level, op.shape[1])
    res = amp_run(op, problem.y, den, max_iter=iters, tol=0.0, seed=seed, truth=target,
                  abs_tol=0.0, noise_scale=problem.noise_scale(level))
    emp = np.array([h.mse for h in res.history])
    m = problem.ensemble.m
    noise = sigma_w ** 2
    if level == "lr":
        noise += approximation_energy(problem.pair, X) / m
    pred = se_predict(target, m / target.size, noise, den, iters=iters, seed=seed,
                      rtol=0.0).theta[1:]
    pred = np.array(pred + [pred[-1]] * (iters - len(pred)))
    emp = np.concatenate((emp, [emp[-1]] * (iters - emp.size)))
    return emp, pred[:iters]


# --- timing -----------------------------------------------------------------------------

def bench(image, method, delta1, d, reps=3, seed=0, threshold="sure", max_iter=30):
    """Median AMP wall time (seconds) for the hr and lr levels, operator
    construction excluded."""
    problem, _, _ = image_problem(image, method, delta1, d, 0.0, seed, threshold,
                                  max_iter=max_iter)
    times = {}
    for level in ("hr", "lr"):
        problem.operator(level)
        samples = []
        for _ in range(reps):
            t0 = time.perf_counter()
            problem.run(level)
            samples.append(time.perf_counter() - t0)
        times[level] = float(np.median(samples))
    return times


def downscale_image(pixels, side):
    """Block-average (integer factor) then crop to a ``side x side`` image."""
    X = np.asarray(pixels, dtype=float)
    s = min(X.shape)
    X = X[(X.shape[0] - s) // 2:(X.shape[0] - s) // 2 + s, (X.shape[1] - s) // 2:(X.shape[1] - s) // 2 + s]
    f = s // side
    if f < 1:
        raise ParameterError(f"image smaller than {side}x{side}")
    X = X[:f * side, :f * side].reshape(side, f, side, f).mean(axis=(1, 3))
    return Image(X)
