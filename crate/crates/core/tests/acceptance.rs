mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{arrangements, ks_one_sample_pvalue};
use hcmix::calibration::{tailrun_null_pmf, wilcoxon_exact_null};
use hcmix::distributions::{gg_sample, GGParams};
use hcmix::experiments::{run_null_level, run_power_grid, Figure, Regime, RunOptions, ScenarioConfig};
use hcmix::rng::stream;
use hcmix::statistics::{hc_stat, hc_stat_sup_form, TwoSample};
use hcmix::theory::{
    detection_boundary_dense, detection_boundary_sparse, lower_bound_integral, sparse_boundary_branches, sparse_breakpoint,
    BoundaryQuery,
};
use hcmix::{PowerCurve, TestKind};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed(id: u32, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= budget;
    let pass = out.pass && in_time;
    let mut detail = out.detail;
    if !in_time {
        detail.push_str(&format!("; over budget {:.0?}", budget));
    }
    println!("[{}] criterion {id}: {detail} ({:.2?})", if pass { "PASS" } else { "FAIL" }, took);
    pass
}

fn c1() -> Outcome {
    let mut rng = stream(1);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 1000 {
        let m = rng.random_range(2..=200);
        let n = rng.random_range(2..=200);
        let x: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ts = TwoSample::new(x, y).unwrap();
        if ts.pooled_order().is_err() {
            continue;
        }
        let a = hc_stat(&ts).unwrap().value;
        let b = hc_stat_sup_form(&ts).unwrap().value;
        worst = worst.max((a - b).abs());
        done += 1;
    }
    outcome(worst <= 1e-9, format!("HC rank form vs sup form, 1000 instances, max diff {worst:.2e}"))
}

fn c2() -> Outcome {
    let mut worst: f64 = 0.0;
    for m in 1..=8 {
        for n in 1..=8 {
            let arr = arrangements(m, n);
            let total = arr.len() as f64;
            let us: Vec<f64> = arr
                .iter()
                .map(|a| {
                    let mut xs = 0;
                    let mut u = 0;
                    for &is_x in a {
                        if is_x {
                            xs += 1;
                        } else {
                            u += xs;
                        }
                    }
                    u as f64
                })
                .collect();
            let mean = us.iter().sum::<f64>() / total;
            let var = us.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / total;
            let mn = (m * n) as f64;
            worst = worst.max((mean - mn / 2.0).abs()).max((var - mn * (m + n + 1) as f64 / 12.0).abs());
            let pmf = wilcoxon_exact_null(m, n).unwrap();
            for (u, p) in pmf.iter().enumerate() {
                let c = us.iter().filter(|&&v| v == u as f64).count() as f64 / total;
                worst = worst.max((p - c).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("Wilcoxon exact null moments, m, n <= 8, max error {worst:.2e}"))
}

fn c3() -> Outcome {
    let mut mismatch = 0;
    let mut worst_mean: f64 = 0.0;
    for m in 1..=7 {
        for n in 1..=7 {
            let arr = arrangements(m, n);
            let mut counts = vec![0u64; n + 1];
            for a in &arr {
                counts[a.iter().rev().take_while(|&&is_x| !is_x).count()] += 1;
            }
            let pmf = tailrun_null_pmf(m, n).unwrap();
            for l in 0..=n {
                // exact rational comparison: pmf·C(m+n, n) must be the integer count
                let scaled = pmf[l] * arr.len() as f64;
                if (scaled - counts[l] as f64).abs() > 1e-9 {
                    mismatch += 1;
                }
            }
            let mean: f64 = pmf.iter().enumerate().map(|(l, p)| l as f64 * p).sum();
            worst_mean = worst_mean.max((mean - n as f64 / (m + 1) as f64).abs());
        }
    }
    outcome(
        mismatch == 0 && worst_mean <= 1e-12,
        format!("tail-run pmf vs enumeration, m, n <= 7: {mismatch} mismatches, mean error {worst_mean:.2e}"),
    )
}

fn c4() -> Outcome {
    let cfg = ScenarioConfig {
        model: GGParams::normal(),
        m: 2000,
        n: 2000,
        regime: Regime::Sparse { beta: 0.6, grid: vec![0.5] },
        tests: TestKind::ALL.to_vec(),
        level: 0.05,
        power_reps: 2000,
        calib_reps: 4000,
        master_seed: 4,
        force_null: false,
        tailrun_pvalue: Default::default(),
    };
    let report = run_null_level(&cfg, &RunOptions::default()).unwrap();
    let parts: Vec<String> = report.per_test.iter().map(|(k, tp)| format!("{k}={:.4}", tp.power)).collect();
    let pass = report.per_test.len() == 5 && report.per_test.values().all(|tp| (tp.power - 0.05).abs() <= 0.015);
    outcome(pass, format!("null size at m = n = 2000: {}", parts.join(" ")))
}

fn c5() -> Outcome {
    let p = GGParams::normal();
    let mut worst: f64 = 0.0;
    for mu in [0.5f64, 1.0, 2.0] {
        let got = lower_bound_integral(f64::INFINITY, &p, mu).unwrap();
        let want = (mu * mu).exp_m1();
        worst = worst.max((got - want).abs() / want);
    }
    outcome(worst <= 1e-6, format!("lower-bound integral vs exp(mu^2) - 1, max rel error {worst:.2e}"))
}

fn c6() -> Outcome {
    let mut gap: f64 = 0.0;
    for g in [1.5, 2.0, 3.0] {
        let (lo, hi) = sparse_boundary_branches(sparse_breakpoint(g), g);
        gap = gap.max((lo - hi).abs());
    }
    let mut linear_exact = true;
    for i in 1..100 {
        let beta = 0.5 + i as f64 / 200.0;
        if detection_boundary_sparse(&BoundaryQuery { beta, gamma: 1.0 }) != 2.0 * beta - 1.0 {
            linear_exact = false;
        }
    }
    let mut dense_gap: f64 = 0.0;
    for i in 1..50 {
        let beta = i as f64 / 100.0;
        let below = detection_boundary_dense(beta, 0.5 - 1e-15);
        let at = detection_boundary_dense(beta, 0.5);
        dense_gap = dense_gap.max((below - at).abs());
    }
    outcome(
        gap <= 1e-12 && linear_exact && dense_gap <= 1e-12,
        format!("boundary continuity gap {gap:.2e}, gamma=1 linear exact {linear_exact}, dense gap {dense_gap:.2e}"),
    )
}

fn c7(curve: &PowerCurve) -> Outcome {
    let mut msgs = Vec::new();
    let mut pass = true;
    for (g, point) in curve.points.iter().enumerate() {
        if point.grid_value < 0.4 - 1e-12 {
            continue;
        }
        let lrt = curve.power(g, TestKind::Lrt).unwrap();
        for kind in [TestKind::Hc, TestKind::Wilcoxon, TestKind::Ks] {
            let pw = curve.power(g, kind).unwrap();
            if (pw - lrt).abs() > 0.15 {
                pass = false;
                msgs.push(format!("s={} {kind}={pw:.3} lrt={lrt:.3}", point.grid_value));
            }
        }
    }
    let last = curve.points.len() - 1;
    let tr = curve.power(last, TestKind::TailRun).unwrap();
    let wx = curve.power(last, TestKind::Wilcoxon).unwrap();
    if tr > wx - 0.2 {
        pass = false;
    }
    msgs.push(format!("s=0.5 tailrun={tr:.3} wilcoxon={wx:.3}"));
    outcome(pass, format!("dense normal m = n = 10^4: {}", msgs.join(", ")))
}

fn c8(curve: &PowerCurve) -> Outcome {
    let g = curve.points.len() - 1;
    let p = |k| curve.power(g, k).unwrap();
    let (wx, ks, tr, hc) = (p(TestKind::Wilcoxon), p(TestKind::Ks), p(TestKind::TailRun), p(TestKind::Hc));
    let pass = (curve.points[g].grid_value - 0.9).abs() < 1e-12 && wx <= 0.15 && ks <= 0.15 && tr >= hc - 0.05;
    outcome(pass, format!("very sparse normal at r=0.9: wilcoxon={wx:.3} ks={ks:.3} tailrun={tr:.3} hc={hc:.3}"))
}

fn c10() -> Outcome {
    let mut msgs = Vec::new();
    let mut pass = true;
    for (i, gamma) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let p = GGParams::standard(gamma).unwrap();
        let xs = gg_sample(100_000, &p, &mut stream(1000 + i as u64));
        let pv = ks_one_sample_pvalue(&xs, |x| p.cdf(x));
        let moment = xs.iter().map(|x| x.abs().powf(gamma)).sum::<f64>() / xs.len() as f64;
        pass &= pv > 0.001 && (moment - 1.0).abs() <= 0.02;
        msgs.push(format!("gamma={gamma} ks_p={pv:.3} E|X|^g={moment:.4}"));
    }
    outcome(pass, format!("sampler fit: {}", msgs.join(", ")))
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= timed(1, secs(10), c1);
    ok &= timed(2, secs(5), c2);
    ok &= timed(3, secs(5), c3);
    ok &= timed(4, secs(300), c4);
    ok &= timed(5, secs(1), c5);
    ok &= timed(6, secs(1), c6);

    let dense = Figure::NormalDense.config(0.1).unwrap();
    let mut first_csv = String::new();
    ok &= timed(7, secs(900), || {
        let curve = run_power_grid(&dense, &RunOptions::default()).unwrap();
        first_csv = curve.to_csv();
        c7(&curve)
    });
    ok &= timed(8, secs(900), || {
        let cfg = Figure::NormalVerysparse.config(0.1).unwrap();
        c8(&run_power_grid(&cfg, &RunOptions::default()).unwrap())
    });
    ok &= timed(9, secs(900), || {
        let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2);
        let other = if threads > 1 { threads / 2 } else { 2 };
        let again = run_power_grid(&dense, &RunOptions { threads: other, cache_dir: None }).unwrap().to_csv();
        outcome(again == first_csv, format!("criterion-7 CSV rerun with {other} threads byte-identical: {}", again == first_csv))
    });
    ok &= timed(10, secs(30), c10);

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
