"""Command-line harness: ``mramp <command> [options]``.

Every command writes CSV files (and PGM / signal files for reconstructions)
into ``--out`` together with ``run_config.json``, which records all
parameters including the master seed; re-running with the same config
reproduces the metrics exactly.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import theory
from .errors import BoundDivergesError, ParameterError
from .resampling import PAIR_KINDS, make_pair, validate_conditions
from .signals import (Signal, gen_bernoulli_gaussian, gen_piecewise_constant,
                      gen_piecewise_constant_image, read_pgm_array, read_signal,
                      write_pgm, write_signal)


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _grid(text):
    """``"30"`` -> 30 points in [0.05, 0.95]; ``"0.2,0.4"`` -> explicit list."""
    if "," not in text and "." not in text:
        return np.linspace(0.05, 0.95, int(text))
    return np.array(_floats(text))


def _out(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    (out / "run_config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return out


def _load_image(args):
    if args.image:
        pixels = read_pgm_array(args.image)
    else:
        pixels = gen_piecewise_constant_image(args.side, 12, args.seed, block=4).pixels
    if pixels.shape != (args.side, args.side):
        pixels = ex.downscale_image(pixels, args.side).pixels
    return pixels


# --- commands -------------------------------------------------------------------

def cmd_ptc_sweep(args):
    out = _out(args)
    for d in args.d:
        grid = ex.ptc_sweep(args.family, d, _grid(args.delta_grid), _grid(args.rho_grid),
                            args.trials, args.seed, args.threads, args.n1, args.max_iter)
        path = out / f"ptc_{args.family}_d{d}.csv"
        grid.write_csv(path)
        rows = []
        for dl, c in zip(grid.delta_grid, grid.crossings()):
            theo = ex._theory_rho(args.family, dl, d)
            rows.append([float(dl), c, "" if theo is None else theo])
        ex.write_csv(out / f"ptc_{args.family}_d{d}_crossings.csv",
                     ["delta", "rho_crossing", "rho_theory"], rows)
        print(f"d={d}: wrote {path}")


def cmd_noise_sensitivity(args):
    out = _out(args)
    rows = ex.noise_sensitivity(args.gammas, args.trials, args.seed, args.threads, args.n1,
                                args.delta1, args.rho1, args.d, args.sigma_w, args.max_iter)
    header = list(rows[0])
    ex.write_csv(out / "noise_sensitivity.csv", header, [[r[k] for k in header] for r in rows])
    for r in rows:
        print(f"gamma={r['gamma']:<6} HR={r['hr_mse']:.3f} LR={r['lr_mse']:.3f} "
              f"bound={r['lr_bound']:.3f}")


def cmd_reconstruct(args):
    out = _out(args)
    modes = args.modes.split(",")
    rows = []
    if args.signal:
        x = read_signal(args.signal).samples
        res = ex.reconstruct_signal(x, args.method, args.delta1, args.d, modes, args.sigma_w,
                                    args.seed, args.max_iter)
        for mode, (est, score, secs) in res.items():
            write_signal(out / f"{args.method}_{mode}.txt", Signal(est))
            rows.append([args.method, mode, args.delta1, args.d, args.sigma_w, args.seed,
                         "nsnr", score, secs])
    else:
        pixels = _load_image(args)
        write_pgm(out / "input.pgm", pixels)
        res = ex.reconstruct_image(pixels, args.method, args.delta1, args.d, modes,
                                   args.sigma_w, args.seed, args.threshold, args.levels,
                                   args.max_iter)
        for mode, (est, score, secs) in res.items():
            write_pgm(out / f"{args.method}_{mode}.pgm", np.clip(est, 0, 255))
            rows.append([args.method, mode, args.delta1, args.d, args.sigma_w, args.seed,
                         "psnr", score, secs])
    ex.write_csv(out / "metrics.csv", ["method", "mode", "delta1", "d", "sigma_w", "seed",
                                       "metric", "value", "seconds"], rows)
    for r in rows:
        print(f"{r[0]:<13} {r[1]:<4} {r[6]}={r[7]:.3f} time={r[8]:.2f}s")


def cmd_se_compare(args):
    out = _out(args)
    if args.source == "bg":
        pred, mean, std = ex.se_compare_bg(args.n, args.delta1, args.eps, args.sigma_w,
                                           args.trials, args.iters, args.seed,
                                           args.threshold_bg, args.threads)
        quality = "scalar"
    else:
        pixels = _load_image(args)
        pred, mean, std = ex.se_compare_image(pixels, args.method, args.delta1, args.d,
                                              args.level, args.sigma_w, args.trials,
                                              args.iters, args.seed, args.threshold,
                                              args.threads)
        quality = "approximate" if args.method == "tv2d-bicubic" else "near-exact"
    rows = [[t + 1, pred[t], mean[t], std[t], quality] for t in range(len(pred))]
    ex.write_csv(out / "se_compare.csv", ["iter", "theta_predicted", "mse_empirical_mean",
                                          "mse_empirical_std", "correspondence"], rows)
    for r in rows:
        print(f"{r[0]:>3} theta={r[1]:.5g} mse={r[2]:.5g} (+-{r[3]:.3g})")


def cmd_bench(args):
    out = _out(args)
    pixels = _load_image(args)
    rows = []
    for method in args.methods.split(","):
        for d in args.d:
            t = ex.bench(pixels, method, args.delta1, d, args.reps, args.seed, args.threshold,
                         args.max_iter)
            for level in ("hr", "lr"):
                rows.append([method, level, args.delta1, d, args.reps, t[level]])
            print(f"{method:<13} d={d} HR={t['hr']:.2f}s LR={t['lr']:.2f}s")
    ex.write_csv(out / "bench.csv", ["method", "mode", "delta1", "d", "reps", "median_seconds"],
                 rows)


def cmd_theory_curve(args):
    out = _out(args)
    curve = theory.MinimaxCurve.build(args.points)
    curve.write_csv(out / "minimax_curve.csv")
    print(f"wrote {len(curve.eps)} points to {out / 'minimax_curve.csv'}")


def cmd_validate_pair(args):
    out = _out(args)
    p = make_pair(args.kind, args.n1, args.d, args.transform)
    probes = []
    for t in range(args.probes):
        probes.append(gen_piecewise_constant(args.n1, args.eps1, args.seed + t))
        probes.append(gen_bernoulli_gaussian(args.n1, args.eps1, args.seed + t))
    rep = validate_conditions(p, probes, seed=args.seed)
    rows = [[args.kind, args.n1, args.d, r["family"], r["eps1"], r["eps_d"], r["bound"], r["ok"]]
            for r in rep.probe_rows]
    ex.write_csv(out / "validate_pair.csv",
                 ["kind", "n1", "d", "family", "eps1", "eps_d", "bound", "ok"], rows)
    print(f"||DU - I||_max = {rep.cond1_residual:.3g} "
          f"({'exact' if rep.exact_cond1 else 'approximate'} pair)")
    print(f"A_d columns: mean entry {rep.lr_column_mean:.3g}, "
          f"norm {rep.lr_column_norm_mean:.4f} +- {rep.lr_column_norm_std:.4f}")
    print(f"structure condition violations: {rep.cond3_violations}/{len(rows)}")


# --- parser -----------------------------------------------------------------------

def _common(p):
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--out", default="mramp_out", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker processes")


def _image_args(p, delta1=0.1, multi_d=False):
    p.add_argument("--image", help="8-bit binary PGM (default: synthetic image)")
    p.add_argument("--side", type=int, default=128, help="crop/downscale to side x side")
    p.add_argument("--method", choices=ex.IMAGE_METHODS + ex.SIGNAL_METHODS, default="st-dct")
    p.add_argument("--delta1", type=float, default=delta1)
    if multi_d:
        p.add_argument("--d", type=_ints, default=[2], help="comma-separated factors")
    else:
        p.add_argument("--d", type=int, default=2)
    p.add_argument("--sigma-w", type=float, default=0.0)
    p.add_argument("--threshold", choices=("sure", "maxmin"), default="sure")
    p.add_argument("--levels", type=int, default=None, help="wavelet levels (st-wavelet)")
    p.add_argument("--max-iter", type=int, default=30)


def build_parser():
    ap = argparse.ArgumentParser(prog="mramp", description="Multi-resolution AMP experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ptc-sweep", help="empirical phase-transition grid")
    _common(p)
    p.add_argument("--family", choices=tuple(ex.FAMILIES), default="ss")
    p.add_argument("--d", type=_ints, default=[1], help="comma-separated factors")
    p.add_argument("--delta-grid", default="30", help="point count or comma list")
    p.add_argument("--rho-grid", default="30", help="point count or comma list")
    p.add_argument("--n1", type=int, default=None)
    p.add_argument("--max-iter", type=int, default=500)
    p.set_defaults(func=cmd_ptc_sweep)

    p = sub.add_parser("noise-sensitivity", help="three-point noise-sensitivity table")
    _common(p)
    p.add_argument("--gammas", type=_floats, default=[0.95, 0.98, 0.99, 0.998])
    p.add_argument("--n1", type=int, default=2000)
    p.add_argument("--delta1", type=float, default=0.2)
    p.add_argument("--rho1", type=float, default=0.3)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--sigma-w", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=200)
    p.set_defaults(func=cmd_noise_sensitivity)

    p = sub.add_parser("reconstruct", help="reconstruct an image or 1D signal")
    _common(p)
    _image_args(p)
    p.add_argument("--signal", help="1D signal file (methods st-dct, tv1d)")
    p.add_argument("--modes", default="hr,lr,h2l,l2h")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("se-compare", help="state evolution vs empirical MSE")
    _common(p)
    _image_args(p, delta1=0.4)
    p.add_argument("--source", choices=("bg", "image"), default="bg")
    p.add_argument("--n", type=int, default=2000, help="signal length (bg)")
    p.add_argument("--eps", type=float, default=0.08, help="sparsity (bg)")
    p.add_argument("--threshold-bg", choices=("minimax", "sure"), default="minimax")
    p.add_argument("--level", choices=("hr", "lr"), default="lr")
    p.add_argument("--iters", type=int, default=20)
    p.set_defaults(func=cmd_se_compare)

    p = sub.add_parser("bench", help="HR vs LR wall time")
    _common(p)
    _image_args(p, multi_d=True)
    p.add_argument("--methods", default="st-dct,tv2d-bicubic")
    p.add_argument("--reps", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("theory-curve", help="export the minimax MSE curve")
    _common(p)
    p.add_argument("--points", type=int, default=200)
    p.set_defaults(func=cmd_theory_curve)

    p = sub.add_parser("validate-pair", help="check the resampling conditions of a pair")
    _common(p)
    p.add_argument("--kind", choices=PAIR_KINDS, default="decimate-repeat")
    p.add_argument("--n1", type=int, default=2000)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--transform", default=None, help="dct, haar, d8 or identity")
    p.add_argument("--eps1", type=float, default=0.05)
    p.add_argument("--probes", type=int, default=5)
    p.set_defaults(func=cmd_validate_pair)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ParameterError, BoundDivergesError, ValueError, OSError) as exc:
        print(f"mramp: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
