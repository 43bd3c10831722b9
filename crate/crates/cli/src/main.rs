use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hcmix::calibration::{
    ks_pvalue, mc_null_table, mc_pvalue, tailrun_pvalue, wilcoxon_pvalue, LrtModel, NullTable,
};
use hcmix::distributions::{dense_calibration, sparse_calibration_real, DenseParam, GGParams, MixtureAlt, SparseParam};
use hcmix::experiments::{run_null_level, run_power_grid, Figure, RunOptions, ScenarioConfig};
use hcmix::statistics::{lrt_stat, TestKind, TwoSample};
use hcmix::theory::{
    detection_boundary_dense, detection_boundary_sparse, hc_conditions, hc_threshold_exponent, ks_condition,
    lower_bound_integral, sparse_threshold, tailrun_condition, wilcoxon_condition, BoundaryQuery,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "hcmix", version, about = "Two-sample detection of sparse mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run detection tests on two samples (one value per line).
    Test(TestArgs),
    /// Simulate power curves from a config file or a figure preset.
    Power(PowerArgs),
    /// Print a detection boundary.
    Boundary(BoundaryArgs),
    /// Evaluate a power or lower-bound condition at finite n.
    Diagnose(DiagnoseArgs),
    /// Build a Monte Carlo null table and write it to disk.
    Calibrate(CalibrateArgs),
}

/// Null model `F` and, where needed, the alternative `(ε, μ)`.
#[derive(Args, Clone)]
struct ModelArgs {
    /// Shape γ of the generalized Gaussian.
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    /// Scale of F.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
}

impl ModelArgs {
    fn base(&self) -> Result<GGParams> {
        Ok(GGParams::new(self.gamma, self.sigma)?)
    }

    fn explicit_alt(&self) -> Result<Option<MixtureAlt>> {
        match (self.epsilon, self.mu) {
            (Some(e), Some(m)) => Ok(Some(MixtureAlt::new(e, m)?)),
            (None, None) => Ok(None),
            _ => bail!("--epsilon and --mu must be given together"),
        }
    }
}

#[derive(Args)]
struct TestArgs {
    /// Control sample file.
    #[arg(long = "x")]
    x_file: PathBuf,
    /// Sample possibly containing the mixture.
    #[arg(long = "y")]
    y_file: PathBuf,
    /// Comma-separated tests; `lrt` requires --epsilon and --mu.
    #[arg(long, value_delimiter = ',', default_values_t = [TestKind::Hc, TestKind::Wilcoxon, TestKind::Ks, TestKind::TailRun])]
    tests: Vec<TestKind>,
    #[command(flatten)]
    model: ModelArgs,
    /// Monte Carlo replicates for tables built on the fly.
    #[arg(long, default_value_t = 4000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Precomputed null tables (from `calibrate`), matched by statistic.
    #[arg(long)]
    table: Vec<PathBuf>,
    /// Separate tied values by ulp-scale offsets instead of failing.
    #[arg(long)]
    dejitter: bool,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct PowerArgs {
    /// TOML scenario file.
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_figure, conflicts_with = "config")]
    preset: Option<Figure>,
    /// Sample-size scale for presets: m = n = round(1e5 * scale).
    #[arg(long, default_value_t = 0.1)]
    scale: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Power replicates per grid point.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Directory for reusable null tables.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Estimate the size of each test instead of the power curve.
    #[arg(long)]
    null_level: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Sparse,
    Dense,
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = RegimeArg::Sparse)]
    regime: RegimeArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Condition {
    Hc,
    Wilcoxon,
    Ks,
    Tailrun,
    LowerBound,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long, value_enum)]
    condition: Condition,
    #[command(flatten)]
    model: ModelArgs,
    /// Sample size n (the Y sample).
    #[arg(long, default_value_t = 1e6)]
    n: f64,
    /// Control size m for the tail-run condition; defaults to n.
    #[arg(long)]
    m: Option<f64>,
    /// Sparsity exponent; with --r (sparse) or --s (dense) fixes (ε, μ).
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// Threshold t for the hc and tail-run conditions.
    #[arg(long)]
    t: Option<f64>,
    /// Threshold exponent: t = (γ q log n)^(1/γ).
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    /// Run length l in the tail-run condition.
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    /// Upper limit of the lower-bound integral (`inf` allowed).
    #[arg(long, default_value_t = f64::INFINITY)]
    x_upper: f64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    statistic: TestKind,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 4000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn parse_figure(s: &str) -> std::result::Result<Figure, String> {
    s.parse().map_err(|e: hcmix::Error| e.to_string())
}

/// Reads one value per line; blank lines and `#` comments are skipped.
fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v: f64 = body
            .parse()
            .map_err(|_| anyhow!("{}:{}: not a number: `{body}`", path.display(), i + 1))?;
        if !v.is_finite() {
            bail!("{}:{}: value must be finite", path.display(), i + 1);
        }
        values.push(v);
    }
    if values.is_empty() {
        bail!("{}: no values", path.display());
    }
    Ok(values)
}

fn in_pool<T: Send>(threads: usize, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut out = None;
    RunOptions { threads, cache_dir: None }.install(|| {
        out = Some(job());
        Ok(())
    })?;
    out.expect("job ran")
}

fn load_tables(paths: &[PathBuf]) -> Result<BTreeMap<TestKind, NullTable>> {
    let mut out = BTreeMap::new();
    for p in paths {
        let t = NullTable::load(p).with_context(|| format!("cannot load null table {}", p.display()))?;
        out.insert(t.statistic, t);
    }
    Ok(out)
}

fn table_for(
    kind: TestKind,
    loaded: &BTreeMap<TestKind, NullTable>,
    m: usize,
    n: usize,
    reps: usize,
    seed: u64,
    model: Option<LrtModel>,
) -> Result<NullTable> {
    if let Some(t) = loaded.get(&kind) {
        if t.m != m || t.n != n {
            bail!("{kind} table was built for m = {}, n = {} but the data have m = {m}, n = {n}", t.m, t.n);
        }
        if kind == TestKind::Lrt && t.model != model {
            bail!("lrt table was built for a different model");
        }
        return Ok(t.clone());
    }
    Ok(mc_null_table(kind, m, n, reps, seed, model)?)
}

fn cmd_test(a: TestArgs) -> Result<Value> {
    let x = read_sample(&a.x_file)?;
    let y = read_sample(&a.y_file)?;
    let mut ts = TwoSample::new(x, y)?;
    if a.dejitter {
        ts = ts.dejittered();
    }
    let order = ts.pooled_order()?;
    let (m, n) = (ts.m(), ts.n());
    let loaded = load_tables(&a.table)?;
    let mut results = Vec::new();
    for kind in a.tests {
        let entry = match kind {
            TestKind::Lrt => {
                let alt = a.model.explicit_alt()?.ok_or_else(|| anyhow!("lrt needs --epsilon and --mu"))?;
                let base = a.model.base()?;
                let stat = lrt_stat(ts.y(), &base, &alt)?.value;
                let model = Some(LrtModel { base, alt });
                let table = in_pool(a.threads, || table_for(kind, &loaded, m, n, a.reps, a.seed, model))?;
                let p = mc_pvalue(stat, &table);
                json!({"test": kind, "statistic": stat, "p_value": p.p, "method": p.method, "table_reps": table.reps()})
            }
            TestKind::Hc => {
                let stat = order.hc();
                let table = in_pool(a.threads, || table_for(kind, &loaded, m, n, a.reps, a.seed, None))?;
                let p = mc_pvalue(stat, &table);
                json!({"test": kind, "statistic": stat, "p_value": p.p, "method": p.method, "table_reps": table.reps()})
            }
            TestKind::Wilcoxon => {
                let u = order.wilcoxon();
                let p = wilcoxon_pvalue(u, m, n)?;
                json!({"test": kind, "statistic": u, "p_value": p.p, "method": p.method})
            }
            TestKind::Ks => {
                let ks = order.ks();
                let p = ks_pvalue(ks.lambda)?;
                json!({"test": kind, "statistic": ks.lambda, "d": ks.d, "p_value": p.p, "method": p.method})
            }
            TestKind::TailRun => {
                let l = order.tail_run();
                let p = tailrun_pvalue(l as usize, m, n)?;
                json!({"test": kind, "statistic": l, "p_value": p.p, "method": p.method})
            }
        };
        let mut entry = entry;
        let rejects = entry["p_value"].as_f64().is_some_and(|p| p < a.level);
        entry["rejects"] = json!(rejects);
        results.push(entry);
    }
    Ok(json!({"m": m, "n": n, "dejittered": a.dejitter, "level": a.level, "results": results}))
}

fn apply_overrides(cfg: &mut ScenarioConfig, a: &PowerArgs) -> Result<()> {
    if let Some(seed) = a.seed {
        cfg.master_seed = seed;
    }
    if let Some(reps) = a.reps {
        cfg.power_reps = reps;
    }
    if let Some(level) = a.level {
        cfg.level = level;
    }
    cfg.validate()?;
    Ok(())
}

fn cmd_power(a: PowerArgs) -> Result<Value> {
    let (mut cfg, stem) = match (&a.config, a.preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let cfg = ScenarioConfig::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "power".into());
            (cfg, stem)
        }
        (None, Some(fig)) => (fig.config(a.scale)?, fig.as_str().to_string()),
        _ => bail!("give either a config file or --preset"),
    };
    apply_overrides(&mut cfg, &a)?;
    let opts = RunOptions {
        threads: a.threads,
        cache_dir: a.cache.clone(),
    };
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    if a.null_level {
        let report = run_null_level(&cfg, &opts)?;
        let per_test: BTreeMap<String, Value> = report
            .per_test
            .iter()
            .map(|(k, tp)| (k.to_string(), json!({"size": tp.power, "reject_count": tp.reject_count})))
            .collect();
        let out = json!({
            "reps": report.reps,
            "level": report.level,
            "sigma": report.sigma(),
            "lrt_alternative": {"epsilon": report.lrt_alternative.epsilon, "mu": report.lrt_alternative.mu},
            "per_test": per_test,
        });
        let path = a.out.join(format!("{stem}_null.json"));
        fs::write(&path, serde_json::to_string_pretty(&out)? + "\n")?;
        eprintln!("wrote {}", path.display());
        return Ok(out);
    }
    let curve = run_power_grid(&cfg, &opts)?;
    let (csv, json_path) = curve.write(&a.out, &stem)?;
    eprintln!("wrote {} and {}", csv.display(), json_path.display());
    Ok(json!({
        "csv": csv,
        "json": json_path,
        "grid_points": curve.points.len(),
        "tests": cfg.tests,
        "boundary_marker": curve.boundary_marker,
        "seed": curve.seed,
    }))
}

/// `%.12g`-style formatting.
fn fmt_sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..12).contains(&exp) {
        let s = format!("{v:.11e}");
        let (mant, e) = s.split_once('e').expect("exponent");
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        return format!("{mant}e{e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn cmd_boundary(a: BoundaryArgs) -> Result<String> {
    if !(a.gamma > 0.0 && a.gamma.is_finite()) {
        bail!("gamma must be positive, got {}", a.gamma);
    }
    let v = match a.regime {
        RegimeArg::Sparse => {
            if !(a.beta > 0.5 && a.beta < 1.0) {
                bail!("sparse regime needs 1/2 < beta < 1, got {}", a.beta);
            }
            detection_boundary_sparse(&BoundaryQuery { beta: a.beta, gamma: a.gamma })
        }
        RegimeArg::Dense => {
            if !(a.beta > 0.0 && a.beta < 0.5) {
                bail!("dense regime needs 0 < beta < 1/2, got {}", a.beta);
            }
            detection_boundary_dense(a.beta, a.gamma)
        }
    };
    Ok(fmt_sig12(v))
}

fn diagnose_alt(a: &DiagnoseArgs) -> Result<MixtureAlt> {
    if let Some(alt) = a.model.explicit_alt()? {
        return Ok(alt);
    }
    let beta = a.beta.ok_or_else(|| anyhow!("give --epsilon/--mu or --beta with --r or --s"))?;
    let alt = match (a.r, a.s) {
        (Some(r), None) => {
            let mut alt = sparse_calibration_real(a.n, &SparseParam::new(beta, r)?, a.gamma_checked()?)?;
            alt.mu *= a.model.sigma;
            alt
        }
        (None, Some(s)) => dense_calibration(a.n as u64, &DenseParam::new(beta, s)?)?,
        _ => bail!("give exactly one of --r (sparse) or --s (dense)"),
    };
    Ok(alt)
}

impl DiagnoseArgs {
    fn gamma_checked(&self) -> Result<f64> {
        self.model.base()?;
        Ok(self.model.gamma)
    }

    fn threshold(&self) -> Result<f64> {
        if let Some(t) = self.t {
            return Ok(t);
        }
        let q = match (self.q, self.r) {
            (Some(q), _) => q,
            (None, Some(r)) => hc_threshold_exponent(r, self.model.gamma),
            _ => bail!("give --t, --q or --r to fix the threshold"),
        };
        Ok(self.model.sigma * sparse_threshold(self.n, q, self.model.gamma))
    }
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<Value> {
    if !(a.n > 1.0 && a.n.is_finite()) {
        bail!("n must exceed 1, got {}", a.n);
    }
    let base = a.model.base()?;
    let out = match a.condition {
        Condition::LowerBound => {
            let mu = match a.model.mu {
                Some(mu) => mu,
                None => diagnose_alt(&a)?.mu,
            };
            let v = lower_bound_integral(a.x_upper, &base, mu)?;
            json!({"condition": "lower-bound", "mu": mu, "x_upper": a.x_upper.to_string(), "integral": v})
        }
        Condition::Hc => {
            let alt = diagnose_alt(&a)?;
            let t = a.threshold()?;
            let reports = hc_conditions(t, a.n, &base, &alt, a.eta)?;
            json!({"condition": "hc", "epsilon": alt.epsilon, "mu": alt.mu, "t": t, "reports": reports})
        }
        Condition::Wilcoxon => {
            let alt = diagnose_alt(&a)?;
            json!({"condition": "wilcoxon", "epsilon": alt.epsilon, "mu": alt.mu, "report": wilcoxon_condition(a.n, &base, &alt)?})
        }
        Condition::Ks => {
            let alt = diagnose_alt(&a)?;
            json!({"condition": "ks", "epsilon": alt.epsilon, "mu": alt.mu, "report": ks_condition(a.n, &base, &alt)?})
        }
        Condition::Tailrun => {
            let alt = diagnose_alt(&a)?;
            let t = a.threshold()?;
            let m = a.m.unwrap_or(a.n);
            let report = tailrun_condition(t, m, a.n, &base, &alt, a.l)?;
            json!({"condition": "tailrun", "epsilon": alt.epsilon, "mu": alt.mu, "t": t, "report": report})
        }
    };
    Ok(out)
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<Value> {
    if a.statistic == TestKind::TailRun {
        bail!("tailrun: exact null available; use `hcmix test --tests tailrun` for exact p-values");
    }
    if a.out.exists() && !a.force {
        bail!("{} exists; pass --force to overwrite", a.out.display());
    }
    let model = if a.statistic == TestKind::Lrt {
        let alt = a.model.explicit_alt()?.ok_or_else(|| anyhow!("lrt tables need --epsilon and --mu"))?;
        Some(LrtModel { base: a.model.base()?, alt })
    } else {
        None
    };
    let table = in_pool(a.threads, || Ok(mc_null_table(a.statistic, a.m, a.n, a.reps, a.seed, model)?))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    table.save(&a.out)?;
    eprintln!("wrote {}", a.out.display());
    Ok(json!({
        "path": a.out,
        "statistic": a.statistic,
        "m": a.m,
        "n": a.n,
        "reps": table.reps(),
        "seed": a.seed,
        "quantiles": {
            "0.90": table.quantile(0.90),
            "0.95": table.quantile(0.95),
            "0.99": table.quantile(0.99),
        },
    }))
}

fn print_json(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Test(a) => print_json(&cmd_test(a)?),
        Command::Power(a) => print_json(&cmd_power(a)?),
        Command::Boundary(a) => {
            println!("{}", cmd_boundary(a)?);
            Ok(())
        }
        Command::Diagnose(a) => print_json(&cmd_diagnose(a)?),
        Command::Calibrate(a) => print_json(&cmd_calibrate(a)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
