import math

import numpy as np
import pytest

from mramp import experiments as ex
from mramp.errors import ParameterError
from mramp.signals import gen_piecewise_constant_image


def test_crossing_interpolates():
    rho = np.array([0.1, 0.2, 0.3, 0.4])
    assert ex.crossing(rho, [1.0, 0.8, 0.2, 0.0]) == pytest.approx(0.25)
    assert math.isnan(ex.crossing(rho, [1.0, 1.0, 1.0, 1.0]))
    assert ex.crossing(rho, [1.0, np.nan, 0.0, 0.0]) == pytest.approx(0.2)


def test_csv_dialect(tmp_path):
    ex.write_csv(tmp_path / "a.csv", ["x", "y"], [[0.1, "s"], [1 / 3, 2]])
    raw = (tmp_path / "a.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[1] == "0.10000000000000001,s"
    assert float(lines[2].split(",")[0]) == 1 / 3


def test_ptc_trial_infeasible_and_success():
    assert math.isnan(ex.ptc_trial("ss", 2000, 4, 0.6, 0.1, 0))
    assert ex.ptc_trial("ss", 2000, 1, 0.5, 0.1, 0) <= 1e-6
    assert ex.ptc_trial("pc", 628, 2, 0.3, 0.1, 0) <= 1e-4
    with pytest.raises(ParameterError):
        ex.ptc_trial("xx", 100, 1, 0.5, 0.1, 0)


def test_ptc_sweep_serial_equals_parallel(tmp_path):
    args = dict(family="ss", d=2, delta_grid=[0.2, 0.6], rho_grid=[0.1, 0.9], trials=2,
                seed=3, n1=400, max_iter=100)
    a = ex.ptc_sweep(threads=1, **args)
    b = ex.ptc_sweep(threads=2, **args)
    np.testing.assert_array_equal(a.success_rate, b.success_rate)
    assert np.isnan(a.success_rate[1]).all()  # m >= n_d at delta = 0.6, d = 2
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()
    assert "skipped" in (tmp_path / "a.csv").read_text()


def test_noise_sensitivity_rows():
    rows = ex.noise_sensitivity(gammas=(0.95,), trials=1, n1=400, max_iter=50)
    r = rows[0]
    assert r["hr_reference"] == pytest.approx(3.8)
    assert r["lr_bound"] > 0 and r["approx_energy"] > 0 and r["mu"] > 0


def test_se_compare_zero_signal():
    pred, mean, std = ex.se_compare_bg(n=200, eps=0.0, trials=2, iters=4)
    np.testing.assert_array_equal(pred, 0.0)
    np.testing.assert_array_equal(mean, 0.0)


def test_image_d1_lr_equals_hr():
    img = gen_piecewise_constant_image(32, 6, 0, block=4).pixels
    res = ex.reconstruct_image(img, "st-dct", 0.3, 1, modes=("hr", "lr"), max_iter=10)
    np.testing.assert_allclose(res["lr"][0], res["hr"][0], atol=1e-9)
    assert res["lr"][1] == pytest.approx(res["hr"][1])


def test_image_tv_repeat_lr_recovers_blocky_image():
    img = gen_piecewise_constant_image(32, 6, 0, block=2).pixels
    res = ex.reconstruct_image(img, "tv2d-repeat", 0.2, 2, modes=("lr", "l2h"), max_iter=20)
    assert res["lr"][1] > 30
    assert res["l2h"][0].shape == (32, 32)


def test_image_geometry_checks():
    img = np.zeros((32, 32))
    with pytest.raises(ParameterError):
        ex.image_problem(img, "st-dct", 0.5, 2)  # m >= n_d^2
    with pytest.raises(ParameterError):
        ex.image_problem(img, "median", 0.1, 2)
    with pytest.raises(ParameterError):
        ex.image_problem(np.zeros((32, 16)), "st-dct", 0.1, 2)


def test_reconstruct_signal_modes():
    from mramp.signals import gen_piecewise_constant
    from mramp.resampling import make_pair
    p = make_pair("decimate-repeat", 600, 2)
    x = p.upsample1d(gen_piecewise_constant(300, 0.02, 4).samples)
    res = ex.reconstruct_signal(x, "tv1d", 0.3, 2, max_iter=60)
    assert res["lr"][1] > 1e3 and res["l2h"][0].size == 600


def test_downscale_image():
    X = np.arange(16.0).reshape(4, 4)
    np.testing.assert_allclose(ex.downscale_image(X, 2).pixels, [[2.5, 4.5], [10.5, 12.5]])
    Y = np.zeros((6, 10))
    assert ex.downscale_image(Y, 3).pixels.shape == (3, 3)
    with pytest.raises(ParameterError):
        ex.downscale_image(np.zeros((4, 4)), 8)


def test_bench_returns_both_levels():
    img = gen_piecewise_constant_image(32, 6, 0, block=4).pixels
    t = ex.bench(img, "st-dct", 0.1, 2, reps=1, max_iter=5)
    assert set(t) == {"hr", "lr"} and min(t.values()) > 0
