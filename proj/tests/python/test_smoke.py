import math
import os
import subprocess

import pytest

import isoconquer as ic


def test_fit_and_inverse():
    fit = ic.fit_isotonic([0.25, 0.5, 0.75], [3, 2, 1], "nonincreasing")
    assert fit.levels == [3, 2, 1]
    assert fit.breakpoints == [0.25, 0.5, 1.0]
    assert fit.evaluate(0.25) == 3
    assert fit.inverse(2.5) == 0.25
    assert fit.inverse(5) == 0.0
    inc = ic.fit_isotonic([0.1, 0.2, 0.3, 0.4], [1, 3, 2, 4])
    assert inc.levels == [1, 2.5, 2.5, 4]


def test_matches_sklearn_when_available():
    sk = pytest.importorskip("sklearn.isotonic")
    import numpy as np

    rng = np.random.default_rng(3)
    x = np.sort(rng.uniform(size=200))
    y = x + rng.normal(scale=0.2, size=200)
    ref = sk.IsotonicRegression().fit_transform(x, y)
    ours = ic.fit_isotonic(list(x), list(y)).levels
    assert np.max(np.abs(np.array(ours) - ref)) < 1e-9


def test_pooling_and_interval():
    pe = ic.pool_estimates([1.0, 2.0, 3.0], 1000, 1.0)
    assert pe.theta_bar == 2.0
    assert pe.sigma_hat == pytest.approx(1.0)
    lo, hi = ic.confidence_interval(pe, 0.05)
    assert (lo + hi) / 2 == pytest.approx(2.0)
    assert ic.choose_m(1 / 6, 0.0, 1000) == 10
    assert ic.kappa_forward(0.04, 1.0, 1.0) == pytest.approx(0.542884, abs=1e-6)


def test_pool_blocks():
    xs = [[i / 10 for i in range(1, 10)]] * 2
    ys = [[i / 10 for i in range(1, 10)]] * 2
    pe = ic.pool(xs, ys, "mu_inverse_at", 0.5)
    assert pe.m == 2
    assert pe.theta_bar == pytest.approx(0.5)


def test_chernoff_and_mfold():
    draws = ic.sample_chernoff(10000, seed=1)
    assert len(draws) == 10000
    assert abs(sum(draws) / len(draws)) < 0.03
    q = ic.mfold_quantile(draws, 50, 0.975)
    assert abs(q - 1.96) < 0.1


def test_kde():
    assert ic.kde_at_point([0.5], 0.5, 0.2) == pytest.approx(15 / 16 / 0.2)


def test_run_experiment_and_config_errors():
    doc = ic.run_experiment("experiment = table1-left\nreplicates = 20\n[grid]\nns = 50\nms = 1, 3\n")
    table = doc["manifest"]["tables"][0]
    assert table["columns"] == ["n", "m", "ratio", "mc_se"]
    assert table["rows"][0][2] == 1.0
    assert len(doc["manifest"]["config_hash"]) == 16
    with pytest.raises(ValueError):
        ic.run_experiment("bogus = 1\n")


def test_cli_roundtrip(tmp_path):
    cli = os.environ.get("ISOCONQUER_CLI")
    if not cli:
        pytest.skip("ISOCONQUER_CLI not set")
    out = tmp_path / "o"
    res = subprocess.run([cli, "fit", "--ns", "30", "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    lines = (out / "fit.csv").read_text().splitlines()
    assert lines[0] == "breakpoint,level"
    assert len(lines) == 31
    levels = [float(l.split(",")[1]) for l in lines[1:]]
    assert all(b >= a for a, b in zip(levels, levels[1:]))
    assert not math.isnan(levels[0])
