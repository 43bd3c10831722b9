//! Monte Carlo power harness.
//!
//! A scenario fixes the base law, sample sizes, a sparse or dense regime with
//! its grid of signal exponents, and the tests to run. For every grid point
//! the harness draws `power_reps` independent two-sample data sets from the
//! alternative and records how often each test's p-value falls below the
//! level. Each replicate owns a random stream derived from
//! `(master_seed, grid index, replicate index)` and results are reduced in
//! index order, so output is identical for any thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    ks_pvalue, mc_null_table, mc_pvalue, rank_stat, tailrun_pvalue, tailrun_pvalue_randomized, wilcoxon_pvalue,
    LrtModel, NullTable, NullTableCache,
};
use crate::distributions::{dense_calibration, sparse_calibration, DenseParam, GGParams, MixtureAlt, SparseParam};
use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey, StreamRng};
use crate::statistics::{lrt_sum, PooledOrder, TestKind};
use crate::theory::{detection_boundary_dense, detection_boundary_sparse, BoundaryQuery};

pub const CSV_HEADER: &str = "grid_value,test,power,ci_half_width,reject_count,reps";

/// Signal regime and the grid of exponents (`r` for sparse, `s` for dense).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regime {
    Sparse { beta: f64, grid: Vec<f64> },
    Dense { beta: f64, grid: Vec<f64> },
}

impl Regime {
    pub fn grid(&self) -> &[f64] {
        match self {
            Regime::Sparse { grid, .. } | Regime::Dense { grid, .. } => grid,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            Regime::Sparse { beta, .. } | Regime::Dense { beta, .. } => *beta,
        }
    }
}

/// How the tail-run p-value treats the atom at the observed run length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailRunMode {
    /// `P(L* > l) + U·P(L* = l)`: exact size at every level.
    #[default]
    Randomized,
    /// `P(L* >= l)`: conservative.
    Conservative,
}

fn default_level() -> f64 {
    0.05
}
fn default_power_reps() -> usize {
    200
}
fn default_calib_reps() -> usize {
    4000
}
fn default_tests() -> Vec<TestKind> {
    TestKind::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub model: GGParams,
    pub m: usize,
    pub n: usize,
    pub regime: Regime,
    #[serde(default = "default_tests")]
    pub tests: Vec<TestKind>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_power_reps")]
    pub power_reps: usize,
    #[serde(default = "default_calib_reps")]
    pub calib_reps: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Draw Y from F at every grid point while the LRT keeps the nominal (ε, μ).
    #[serde(default)]
    pub force_null: bool,
    #[serde(default)]
    pub tailrun_pvalue: TailRunMode,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config(format!("model: {e}")))?;
        if self.m == 0 || self.n == 0 {
            return Err(Error::Config("m and n must be positive".into()));
        }
        if self.n > self.m {
            return Err(Error::Config(format!("n ({}) must not exceed m ({})", self.n, self.m)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.power_reps == 0 {
            return Err(Error::Config("power_reps must be positive".into()));
        }
        if self.tests.is_empty() {
            return Err(Error::Config("tests must name at least one test".into()));
        }
        let needs_table = self.tests.iter().any(|t| matches!(t, TestKind::Hc | TestKind::Lrt));
        if needs_table && self.calib_reps < crate::calibration::MIN_TABLE_REPS {
            return Err(Error::Config(format!("calib_reps must be at least {}", crate::calibration::MIN_TABLE_REPS)));
        }
        let grid = self.regime.grid();
        if grid.is_empty() {
            return Err(Error::Config("regime.grid is empty".into()));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("regime.grid must be strictly increasing".into()));
        }
        for g in 0..grid.len() {
            self.alternative(g).map_err(|e| Error::Config(format!("regime.grid[{g}]: {e}")))?;
        }
        Ok(())
    }

    /// (ε, μ) at grid point `g`, recomputed from the exponents at this `n`.
    pub fn alternative(&self, g: usize) -> Result<MixtureAlt> {
        let n = self.n as u64;
        match &self.regime {
            Regime::Sparse { beta, grid } => {
                let sp = SparseParam::new(*beta, grid[g])?;
                let mut alt = sparse_calibration(n, &sp, self.model.gamma)?;
                alt.mu *= self.model.scale;
                Ok(alt)
            }
            Regime::Dense { beta, grid } => dense_calibration(n, &DenseParam::new(*beta, grid[g])?),
        }
    }

    pub fn boundary_marker(&self) -> f64 {
        match &self.regime {
            Regime::Sparse { beta, .. } => detection_boundary_sparse(&BoundaryQuery {
                beta: *beta,
                gamma: self.model.gamma,
            }),
            Regime::Dense { beta, .. } => detection_boundary_dense(*beta, self.model.gamma),
        }
    }
}

/// Rejection summary of one test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestPower {
    pub power: f64,
    pub ci_half_width: f64,
    pub reject_count: usize,
}

impl TestPower {
    pub fn from_count(reject_count: usize, reps: usize) -> Self {
        let power = reject_count as f64 / reps as f64;
        Self {
            power,
            ci_half_width: 1.96 * (power * (1.0 - power) / reps as f64).sqrt(),
            reject_count,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub grid_value: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub per_test: BTreeMap<TestKind, TestPower>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub config: ScenarioConfig,
    pub boundary_marker: f64,
    pub seed: u64,
    pub points: Vec<PowerPoint>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl PowerCurve {
    pub fn power(&self, g: usize, test: TestKind) -> Option<f64> {
        self.points.get(g)?.per_test.get(&test).map(|t| t.power)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for pt in &self.points {
            for test in &self.config.tests {
                let r = &pt.per_test[test];
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    pt.grid_value, test, r.power, r.ci_half_width, r.reject_count, self.config.power_reps
                )
                .unwrap();
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Writes `<stem>.csv` and the `<stem>.json` sidecar into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        fs::write(&csv, self.to_csv())?;
        fs::write(&json, self.to_json()?)?;
        Ok((csv, json))
    }
}

/// Execution knobs that must not change results.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; 0 picks the rayon default.
    pub threads: usize,
    pub cache_dir: Option<PathBuf>,
}

impl RunOptions {
    /// Runs `job` on a pool with `threads` workers.
    pub fn install<T: Send>(&self, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(job)
    }

    fn table(&self, kind: TestKind, m: usize, n: usize, reps: usize, seed: u64, model: Option<LrtModel>) -> Result<NullTable> {
        match &self.cache_dir {
            Some(dir) => NullTableCache::new(dir)?.get_or_build(kind, m, n, reps, seed, model),
            None => mc_null_table(kind, m, n, reps, seed, model),
        }
    }
}

struct Calibrated {
    hc: Option<NullTable>,
    lrt: Option<NullTable>,
}

fn draw_pair(m: usize, n: usize, base: &GGParams, alt: Option<&MixtureAlt>, rng: &mut StreamRng) -> (Vec<f64>, PooledOrder) {
    let mut x = Vec::with_capacity(m);
    let mut y = Vec::with_capacity(n);
    loop {
        x.clear();
        y.clear();
        base.sample_into(&mut x, m, rng);
        base.sample_into(&mut y, n, rng);
        if let Some(alt) = alt {
            for v in y.iter_mut() {
                if rng.random::<f64>() < alt.epsilon {
                    *v += alt.mu;
                }
            }
        }
        if let Ok(order) = PooledOrder::new(&x, &y) {
            return (y, order);
        }
    }
}

/// One replicate: which of `tests` reject at `level`.
fn replicate(
    cfg: &ScenarioConfig,
    tables: &Calibrated,
    nominal: &MixtureAlt,
    data_alt: Option<&MixtureAlt>,
    rng: &mut StreamRng,
) -> Vec<bool> {
    let (y, order) = draw_pair(cfg.m, cfg.n, &cfg.model, data_alt, rng);
    let tie_break: f64 = rng.random();
    cfg.tests
        .iter()
        .map(|test| {
            let p = match test {
                TestKind::Lrt => mc_pvalue(lrt_sum(&y, &cfg.model, nominal), tables.lrt.as_ref().unwrap()).p,
                TestKind::Hc => mc_pvalue(order.hc(), tables.hc.as_ref().unwrap()).p,
                TestKind::Wilcoxon => wilcoxon_pvalue(order.wilcoxon(), cfg.m, cfg.n).unwrap().p,
                TestKind::Ks => ks_pvalue(rank_stat(TestKind::Ks, &order)).unwrap().p,
                TestKind::TailRun => {
                    let l = order.tail_run() as usize;
                    match cfg.tailrun_pvalue {
                        TailRunMode::Randomized => tailrun_pvalue_randomized(l, cfg.m, cfg.n, tie_break).unwrap().p,
                        TailRunMode::Conservative => tailrun_pvalue(l, cfg.m, cfg.n).unwrap().p,
                    }
                }
            };
            p < cfg.level
        })
        .collect()
}

fn tally(tests: &[TestKind], outcomes: &[Vec<bool>]) -> BTreeMap<TestKind, TestPower> {
    tests
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let count = outcomes.iter().filter(|o| o[i]).count();
            (t, TestPower::from_count(count, outcomes.len()))
        })
        .collect()
}

fn hc_table(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Option<NullTable>> {
    if cfg.tests.contains(&TestKind::Hc) {
        opts.table(TestKind::Hc, cfg.m, cfg.n, cfg.calib_reps, cfg.master_seed, None).map(Some)
    } else {
        Ok(None)
    }
}

fn lrt_table(cfg: &ScenarioConfig, opts: &RunOptions, alt: &MixtureAlt) -> Result<Option<NullTable>> {
    if cfg.tests.contains(&TestKind::Lrt) {
        let model = LrtModel {
            base: cfg.model,
            alt: *alt,
        };
        opts.table(TestKind::Lrt, cfg.m, cfg.n, cfg.calib_reps, cfg.master_seed, Some(model)).map(Some)
    } else {
        Ok(None)
    }
}

fn notes_for(cfg: &ScenarioConfig) -> Vec<String> {
    let mut notes = Vec::new();
    if cfg.tests.contains(&TestKind::TailRun) && cfg.tailrun_pvalue == TailRunMode::Randomized {
        notes.push("tail-run p-values are randomized at the observed atom of the exact null".into());
    }
    if cfg.force_null {
        notes.push("force_null: Y drawn from F; LRT uses the nominal (epsilon, mu)".into());
    }
    notes
}

/// Empirical power over the scenario grid.
pub fn run_power_grid(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<PowerCurve> {
    cfg.validate()?;
    opts.install(|| {
        let hc = hc_table(cfg, opts)?;
        let mut points = Vec::with_capacity(cfg.regime.grid().len());
        for (g, &grid_value) in cfg.regime.grid().iter().enumerate() {
            let alt = cfg.alternative(g)?;
            let tables = Calibrated {
                hc: hc.clone(),
                lrt: lrt_table(cfg, opts, &alt)?,
            };
            let data_alt = if cfg.force_null { None } else { Some(alt) };
            let outcomes: Vec<Vec<bool>> = (0..cfg.power_reps)
                .into_par_iter()
                .map(|k| {
                    let mut rng = StreamKey::new(cfg.master_seed, Purpose::Power, [g as u64, k as u64, 0]).rng();
                    replicate(cfg, &tables, &alt, data_alt.as_ref(), &mut rng)
                })
                .collect();
            points.push(PowerPoint {
                grid_value,
                epsilon: alt.epsilon,
                mu: alt.mu,
                per_test: tally(&cfg.tests, &outcomes),
            });
        }
        Ok(PowerCurve {
            config: cfg.clone(),
            boundary_marker: cfg.boundary_marker(),
            seed: cfg.master_seed,
            points,
            notes: notes_for(cfg),
        })
    })
}

/// Empirical size of each test under the null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullLevelReport {
    pub reps: usize,
    pub level: f64,
    /// The (ε, μ) the LRT statistic was computed with (first grid point).
    pub lrt_alternative: MixtureAlt,
    pub per_test: BTreeMap<TestKind, TestPower>,
}

impl NullLevelReport {
    /// Binomial standard deviation of the empirical size at the nominal level.
    pub fn sigma(&self) -> f64 {
        (self.level * (1.0 - self.level) / self.reps as f64).sqrt()
    }
}

/// Draws both samples from F `power_reps` times and reports each test's rejection rate.
pub fn run_null_level(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<NullLevelReport> {
    cfg.validate()?;
    opts.install(|| {
        let alt = cfg.alternative(0)?;
        let tables = Calibrated {
            hc: hc_table(cfg, opts)?,
            lrt: lrt_table(cfg, opts, &alt)?,
        };
        let outcomes: Vec<Vec<bool>> = (0..cfg.power_reps)
            .into_par_iter()
            .map(|k| {
                let mut rng = StreamKey::new(cfg.master_seed, Purpose::NullLevel, [k as u64, 0, 0]).rng();
                replicate(cfg, &tables, &alt, None, &mut rng)
            })
            .collect();
        Ok(NullLevelReport {
            reps: cfg.power_reps,
            level: cfg.level,
            lrt_alternative: alt,
            per_test: tally(&cfg.tests, &outcomes),
        })
    })
}

/// Power-curve presets mirroring the published experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    NormalDense,
    NormalModerate,
    NormalVerysparse,
    DexpDense,
    DexpModerate,
}

impl Figure {
    pub const ALL: [Figure; 5] = [
        Figure::NormalDense,
        Figure::NormalModerate,
        Figure::NormalVerysparse,
        Figure::DexpDense,
        Figure::DexpModerate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Figure::NormalDense => "normal-dense",
            Figure::NormalModerate => "normal-moderate",
            Figure::NormalVerysparse => "normal-verysparse",
            Figure::DexpDense => "dexp-dense",
            Figure::DexpModerate => "dexp-moderate",
        }
    }

    /// Scenario at `m = n = round(10^5 · scale)` with level 0.05, 200 power
    /// replicates and 4000 calibration replicates.
    pub fn config(&self, scale: f64) -> Result<ScenarioConfig> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::Config(format!("scale must lie in (0, 1], got {scale}")));
        }
        let size = (1e5 * scale).round() as usize;
        let steps = |count: usize, denom: f64| (1..=count).map(|i| i as f64 / denom).collect::<Vec<_>>();
        let (model, regime) = match self {
            Figure::NormalDense => (GGParams::normal(), Regime::Dense { beta: 0.2, grid: steps(10, 20.0) }),
            Figure::NormalModerate => (GGParams::normal(), Regime::Sparse { beta: 0.6, grid: steps(10, 20.0) }),
            Figure::NormalVerysparse => (GGParams::normal(), Regime::Sparse { beta: 0.8, grid: steps(9, 10.0) }),
            Figure::DexpDense => (GGParams::unit_variance_laplace(), Regime::Dense { beta: 0.2, grid: steps(10, 20.0) }),
            Figure::DexpModerate => (
                GGParams::unit_variance_laplace(),
                Regime::Sparse { beta: 0.6, grid: steps(10, 20.0) },
            ),
        };
        let cfg = ScenarioConfig {
            model,
            m: size,
            n: size,
            regime,
            tests: TestKind::ALL.to_vec(),
            level: 0.05,
            power_reps: 200,
            calib_reps: 4000,
            master_seed: 0,
            force_null: false,
            tailrun_pvalue: TailRunMode::Randomized,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown figure `{s}`")))
    }
}

pub fn reproduce_figure(figure: Figure, scale: f64, opts: &RunOptions) -> Result<PowerCurve> {
    let cfg = figure.config(scale)?;
    let mut curve = run_power_grid(&cfg, opts)?;
    if matches!(figure, Figure::DexpDense | Figure::DexpModerate) {
        curve
            .notes
            .push("double-exponential grids reuse the normal-model grids; F scaled to unit variance, mu on the same axis".into());
    }
    Ok(curve)
}
