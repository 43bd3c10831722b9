"""Smoke test for the hcmix extension module.

Build first:  pip install --no-build-isolation -e crates/py
Run:          python python/smoke_test.py   (or pytest python/)
"""
import json
import math
import os
import tempfile

import hcmix
from scipy import stats


def test_distributions():
    p = hcmix.GGParams.normal()
    for x in (-3.0, -0.5, 0.0, 1.2, 4.0):
        assert abs(p.cdf(x) - stats.norm.cdf(x)) < 1e-12
        assert abs(p.pdf(x) - stats.norm.pdf(x)) < 1e-12
    assert abs(p.quantile(0.975) - stats.norm.ppf(0.975)) < 1e-9
    lap = hcmix.GGParams.unit_variance_laplace()
    assert abs(lap.variance() - 1.0) < 1e-12
    # exp(-|x|^g / g) is gennorm with shape g and scale g^(1/g)
    for g in (0.5, 1.0, 3.0):
        ref = stats.gennorm(g, scale=g ** (1 / g))
        q = hcmix.GGParams(g)
        for x in (-2.0, 0.3, 1.7):
            assert abs(q.cdf(x) - ref.cdf(x)) < 1e-10
        assert stats.kstest(q.sample(20000, seed=1), ref.cdf).pvalue > 0.001
    alt = hcmix.sparse_calibration(10_000, 0.6, 0.5, 2.0)
    assert abs(alt.epsilon - 10_000 ** -0.6) < 1e-15


def test_statistics_and_pvalues():
    x, y = [1.0, 2.0], [3.0, 4.0]
    s = hcmix.rank_statistics(x, y)
    assert s["tailrun"] == 2 and s["wilcoxon"] == 4
    assert abs(hcmix.tailrun_pvalue(2, 2, 2) - 1 / 6) < 1e-15
    try:
        hcmix.rank_statistics([1.0, 2.0], [2.0, 5.0])
    except ValueError as e:
        assert "2" in str(e)
    else:
        raise AssertionError("ties must raise")
    assert hcmix.rank_statistics([1.0, 2.0], [2.0, 5.0], dejitter=True)["wilcoxon"] >= 3

    gen = hcmix.GGParams.normal()
    a = gen.sample(300, seed=2)
    b = [v + 0.3 for v in gen.sample(250, seed=3)]
    u = hcmix.wilcoxon_u(a, b)
    ref = stats.mannwhitneyu(b, a, alternative="greater")
    assert u == ref.statistic
    assert abs(hcmix.wilcoxon_pvalue(u, 300, 250) - ref.pvalue) < 1e-3
    d, lam = hcmix.ks_one_sided(a, b)
    assert abs(lam - math.sqrt(300 * 250 / 550) * d) < 1e-12
    assert abs(sum(hcmix.tailrun_null_pmf(5, 4)) - 1.0) < 1e-12


def test_null_table_roundtrip():
    t = hcmix.NullTable.simulate("hc", 50, 40, 500, seed=4)
    assert t.reps == 500 and t.statistic == "hc"
    assert t.quantile(0.5) <= t.quantile(0.95)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "hc.bin")
        t.save(path)
        assert hcmix.NullTable.load(path).draws == t.draws
    assert t.pvalue(float("inf")) == 1 / 501


def test_theory():
    assert hcmix.detection_boundary_sparse(0.75, 2.0) == 0.25
    assert abs(hcmix.detection_boundary_dense(0.2, 0.25) - 0.1) < 1e-15
    v = hcmix.lower_bound_integral(float("inf"), hcmix.GGParams.normal(), 1.0)
    assert abs(v - (math.e - 1)) < 1e-8
    r = hcmix.wilcoxon_condition(1e6, hcmix.GGParams.normal(), hcmix.MixtureAlt(0.1, 1e-9))
    assert r["satisfied"] == "no"


def test_power_grid():
    toml = hcmix.preset_config("normal-verysparse", 0.003)
    toml = toml.replace("power_reps = 200", "power_reps = 20").replace("calib_reps = 4000", "calib_reps = 200")
    csv, js = hcmix.run_power_grid(toml)
    assert csv.splitlines()[0] == "grid_value,test,power,ci_half_width,reject_count,reps"
    assert len(csv.splitlines()) == 1 + 9 * 5
    assert len(json.loads(js)["points"]) == 9
    assert hcmix.run_power_grid(toml, threads=2)[0] == csv


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok  {name}")
