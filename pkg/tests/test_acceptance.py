"""End-to-end acceptance checks.

Each test covers one criterion, asserts it at the stated tolerance and
records a one-line PASS/FAIL verdict that is printed at the end of the run.
Several of these take minutes; deselect them with ``-m "not acceptance"``.
"""

import numpy as np
import pytest

from mramp import theory
from mramp.amp import amp_run
from mramp.denoise import SoftThreshold, mc_divergence, st_divergence, tv1d, tv1d_divergence
from mramp.errors import DivergenceError
from mramp.experiments import (bench, crossing, downscale_image, noise_sensitivity,
                               ptc_sweep, reconstruct_image, se_compare_bg,
                               se_compare_image)
from mramp.resampling import approximation_energy, make_pair
from mramp.sensing import NoiseModel, dense_operator, gen_ensemble, sample
from mramp.signals import (gen_bernoulli_gaussian, gen_lowpass_sparse,
                           gen_piecewise_constant, gen_piecewise_constant_image, nmse)

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(request):
    """Call ``verdict(n, ok, detail)`` once per criterion, then assert."""
    from conftest import ACCEPTANCE

    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return record


def test_criterion_1_operator_identity(verdict):
    worst, bad = 0.0, []
    for n1 in (64, 628, 2000, 128):
        for d in (2, 4):
            for kind, t in (("transform-trunc", "dct"), ("transform-trunc", "haar"),
                            ("decimate-repeat", None)):
                p = make_pair(kind, n1, d, t)
                M = p.down_matrix() @ p.up_matrix()
                if n1 == 128:
                    # separable 128 x 128: D U acts as the Kronecker square
                    M = np.kron(M, M)
                    X = np.random.default_rng(d).standard_normal((p.n_d, p.n_d))
                    err2d = np.abs(p.downsample2d(p.upsample2d(X)) - X).max()
                    worst = max(worst, err2d)
                err = np.abs(M - np.eye(M.shape[0])).max()
                worst = max(worst, err)
                if err > 1e-10:
                    bad.append((kind, t, n1, d, err))
    verdict(1, not bad and worst <= 1e-10, f"max |DU - I| = {worst:.2e} (tol 1e-10)")


def test_criterion_2_minimax_curve(verdict):
    rng = np.random.default_rng(2024)
    z = rng.standard_normal(10 ** 6)
    rel = []
    for eps in (0.05, 0.1, 0.2, 0.4):
        M, tau = theory.minimax_mse_st(eps)
        # least favourable prior: nonzeros at infinity contribute 1 + tau^2 each
        zero_risk = np.mean(np.maximum(np.abs(z) - tau, 0.0) ** 2)
        mc = eps * (1 + tau ** 2) + (1 - eps) * zero_risk
        rel.append(abs(M - mc) / mc)
    grid = np.linspace(0.0, 1.0, 50)
    vals = np.array([theory.minimax_mse_st(e)[0] for e in grid])
    ends = vals[0] == 0.0 and vals[-1] == 1.0
    mono = bool(np.all(np.diff(vals) > 0))
    shape = theory.concavity_check(grid).ok
    ok = max(rel) <= 0.005 and ends and mono and shape
    verdict(2, ok, f"max MC rel err {max(rel):.4f} (tol 0.005), endpoints {ends}, "
                   f"monotone {mono}, concave/subadditive {shape}")


def test_criterion_3_phase_transition(verdict):
    full = np.linspace(0.05, 0.95, 30)
    found, bad = {}, []
    for d in (1, 2, 4):
        for delta in (0.2, 0.4, 0.6):
            n_d = 2000 // d
            if round(delta * 2000) >= n_d:
                continue  # m >= n_d: nothing to recover at this resolution
            rs = theory.rho_star(delta, d)
            grid = full[np.abs(full - rs) <= 0.2]
            g = ptc_sweep("ss", d, [delta], grid, trials=20, seed=0)
            emp = crossing(grid, g.success_rate[0])
            found[d, delta] = emp
            if not abs(emp - rs) <= 0.05:
                bad.append(f"d={d} delta={delta}: {emp:.3f} vs {rs:.3f}")
    shift = all(found[1, dl] < found[2, dl] < found.get((4, dl), np.inf)
                for dl in (0.2, 0.4) if (2, dl) in found)
    detail = ", ".join(f"d={d},delta={dl}: {v:.3f}/{theory.rho_star(dl, d):.3f}"
                       for (d, dl), v in found.items())
    verdict(3, not bad and shift, f"empirical/theory crossings {detail}; shift with d {shift}")


def test_criterion_4_state_evolution(verdict):
    pred, emp, _ = se_compare_bg(n=2000, delta=0.4, eps=0.08, trials=20, iters=20, seed=0)
    st_err = np.abs(emp - pred) / pred
    X = gen_piecewise_constant_image(64, 12, 0, block=2).pixels
    pred_tv, emp_tv, _ = se_compare_image(X, "tv2d-repeat", 0.05, 2, level="lr",
                                          trials=20, iters=20, seed=0)
    tv_err = np.abs(emp_tv - pred_tv) / pred_tv
    ok = st_err.max() <= 0.10 and tv_err.max() <= 0.20
    verdict(4, ok, f"ST max rel err {st_err.max():.3f} at t={st_err.argmax() + 1} (tol 0.10); "
                   f"TV repeat max rel err {tv_err.max():.3f} at t={tv_err.argmax() + 1} (tol 0.20)")


def test_criterion_5_noise_sensitivity(verdict):
    rows = noise_sensitivity(trials=20, seed=0)
    hr = np.array([r["hr_mse"] for r in rows])
    lr = np.array([r["lr_mse"] for r in rows])
    bound = np.array([r["lr_bound"] for r in rows])
    a = bool(np.all(np.diff(hr) > 0) and hr[-1] >= 4 * hr[0])
    b = bool(np.all(lr < bound))
    c = bool(lr.max() / lr.min() < 2)
    verdict(5, a and b and c,
            f"(a) {a} HR {np.round(hr, 2).tolist()}; (b) {b} LR {np.round(lr, 2).tolist()} "
            f"bound {np.round(bound, 2).tolist()}; (c) {c} LR spread {lr.max() / lr.min():.2f}")


def _natural_images():
    from skimage import color, data
    raw = {"camera": data.camera(), "astronaut": color.rgb2gray(data.astronaut()) * 255,
           "coffee": color.rgb2gray(data.coffee()) * 255,
           "chelsea": color.rgb2gray(data.chelsea()) * 255}
    return {k: np.round(downscale_image(v, 128).pixels) for k, v in raw.items()}


def test_criterion_6_image_orderings(verdict):
    pytest.importorskip("skimage")
    bad, notes = [], []
    for name, X in _natural_images().items():
        st = {k: v[1] for k, v in reconstruct_image(X, "st-dct", 0.1, 2).items()}
        noisy = {k: v[1] for k, v in
                 reconstruct_image(X, "st-dct", 0.1, 2, sigma_w=20.0, modes=("hr", "lr")).items()}
        bic = reconstruct_image(X, "tv2d-bicubic", 0.05, 2, modes=("lr",))["lr"][1]
        rep = reconstruct_image(X, "tv2d-repeat", 0.05, 2, modes=("lr",))["lr"][1]
        checks = {"LR>H2L>HR": st["lr"] > st["h2l"] > st["hr"],
                  "LR-HR>=1dB": st["lr"] - st["hr"] >= 1.0,
                  "bicubic>repeat": bic > rep,
                  "noisy LR-HR>=1dB": noisy["lr"] - noisy["hr"] >= 1.0}
        bad += [f"{name}:{k}" for k, v in checks.items() if not v]
        notes.append(f"{name} LR/H2L/HR {st['lr']:.2f}/{st['h2l']:.2f}/{st['hr']:.2f} "
                     f"bic/rep {bic:.2f}/{rep:.2f} noisy {noisy['lr']:.2f}/{noisy['hr']:.2f}")
    verdict(6, not bad, "; ".join(notes) + (f"; violated {bad}" if bad else ""))


def test_criterion_7_divergence_and_onsager(verdict):
    z = np.random.default_rng(0).standard_normal(16384) * 2.0
    den = SoftThreshold("fixed", tau=0.5)
    exact = st_divergence(z, 0.5)
    est = np.mean([mc_divergence(lambda v: den.estimate(v, 1.0), z, 1.0, s) for s in range(4)])
    st_rel = abs(est - exact) / exact

    rng = np.random.default_rng(5)
    x = np.repeat(rng.standard_normal(20) * 5, 100)
    zt = x + rng.standard_normal(2000)
    base = tv1d(zt, 2.0)
    exact_tv = tv1d_divergence(base)
    est_tv = np.mean([mc_divergence(lambda v: tv1d(v, 2.0), zt, 1.0, s, base=base)
                      for s in range(200)])
    tv_rel = abs(est_tv - exact_tv) / exact_tv

    # delta = 0.4, eps = 0.1: rho = 0.25 against a transition at ~0.34
    n, m = 2000, 800
    xb = gen_bernoulli_gaussian(n, 0.1, 3).samples
    e = gen_ensemble(m, n, 3)
    y = sample(e, xb, NoiseModel(0.0), 3)
    op = dense_operator(e.dense)
    st = SoftThreshold("minimax", eps=0.1)
    with_b = nmse(xb, amp_run(op, y, st, max_iter=200, tol=0.0).x)
    try:
        without = nmse(xb, amp_run(op, y, st, max_iter=200, tol=0.0, onsager=False).x)
    except DivergenceError:
        without = np.inf
    ratio = without / with_b if with_b > 0 else np.inf
    ok = st_rel <= 0.02 and tv_rel <= 0.05 and ratio >= 10
    verdict(7, ok, f"ST div rel err {st_rel:.4f} (tol 0.02); TV1D div rel err {tv_rel:.4f} "
                   f"(tol 0.05); no-Onsager NMSE ratio {ratio:.3g} (need >= 10)")


def test_criterion_8_complexity(verdict):
    X = gen_piecewise_constant_image(128, 12, 0, block=4).pixels
    try:
        from skimage import data
        X = np.round(downscale_image(data.camera(), 128).pixels)
    except ImportError:
        pass
    st = bench(X, "st-dct", 0.1, 2, reps=3)
    tv = bench(X, "tv2d-bicubic", 0.05, 4, reps=1)
    st_ratio, tv_ratio = st["hr"] / st["lr"], tv["hr"] / tv["lr"]
    ok = st_ratio >= 2 and tv_ratio >= 5
    verdict(8, ok, f"ST d=2 HR/LR time {st['hr']:.2f}s/{st['lr']:.2f}s = {st_ratio:.1f}x (need 2x); "
                   f"TV d=4 {tv['hr']:.2f}s/{tv['lr']:.2f}s = {tv_ratio:.1f}x (need 5x)")


def test_criterion_9_zero_approximation_energy(verdict):
    worst = 0.0
    for n1, d in ((64, 2), (628, 4), (2000, 2), (2000, 4)):
        x = gen_lowpass_sparse(n1, d, 0.1, 1).samples
        worst = max(worst, approximation_energy(make_pair("transform-trunc", n1, d, "identity"), x))
        for t in ("dct", "haar"):
            p = make_pair("transform-trunc", n1, d, t)
            c = np.zeros(n1)
            c[:n1 // d] = gen_bernoulli_gaussian(n1 // d, 0.2, 2).samples
            worst = max(worst, approximation_energy(p, p.transform.inverse(c)))
        p = make_pair("decimate-repeat", n1, d)
        xr = p.upsample1d(gen_piecewise_constant(n1 // d, 0.05, 3).samples)
        worst = max(worst, approximation_energy(p, xr))
    p = make_pair("decimate-repeat", 128, 2)
    Xr = p.upsample2d(gen_piecewise_constant_image(64, 8, 4).pixels)
    worst = max(worst, approximation_energy(p, Xr))
    verdict(9, worst <= 1e-12, f"max approximation energy {worst:.2e} (tol 1e-12)")
