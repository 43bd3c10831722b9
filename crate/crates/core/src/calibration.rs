//! Null distributions and p-values.
//!
//! Higher criticism and the oracle LRT are calibrated by Monte Carlo tables;
//! Wilcoxon and Smirnov use their limiting laws; the tail run has an exact
//! negative hypergeometric null. Small-sample enumerations double as oracles.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{GGParams, MixtureAlt};
use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey, StreamRng};
use crate::special::{integrate_piecewise, normal_sf, QuadOptions};
use crate::statistics::{lrt_sum, PooledOrder, TestKind};

pub const MIN_TABLE_REPS: usize = 100;
const FORMAT_MAGIC: &[u8; 8] = b"HCMXNULL";
pub const FORMAT_VERSION: u32 = 1;

/// How a p-value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMethod {
    MonteCarlo,
    NormalApprox,
    SmirnovLimit,
    Exact,
    ExactRandomized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub p: f64,
    pub method: PMethod,
}

impl PValue {
    fn new(p: f64, method: PMethod) -> Self {
        Self {
            p: p.clamp(f64::MIN_POSITIVE, 1.0),
            method,
        }
    }
}

/// The model an LRT statistic is computed under.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtModel {
    pub base: GGParams,
    pub alt: MixtureAlt,
}

/// Where null data for rank statistics comes from. Any continuous law gives
/// the same distribution of ranks; uniforms are the cheapest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NullSource {
    Uniform,
    Model(GGParams),
}

/// Sorted Monte Carlo draws of a statistic under the null.
#[derive(Clone, Debug, PartialEq)]
pub struct NullTable {
    pub statistic: TestKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub model: Option<LrtModel>,
    pub draws: Vec<f64>,
}

impl NullTable {
    pub fn reps(&self) -> usize {
        self.draws.len()
    }

    /// Empirical quantile (lower order statistic at `ceil(q R)`).
    pub fn quantile(&self, q: f64) -> f64 {
        let r = self.draws.len();
        let k = ((q * r as f64).ceil() as usize).clamp(1, r);
        self.draws[k - 1]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(80 + 8 * self.draws.len());
        out.extend_from_slice(FORMAT_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.statistic.code());
        out.extend_from_slice(&(self.m as u64).to_le_bytes());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        match &self.model {
            None => out.push(0),
            Some(md) => {
                out.push(1);
                for v in [md.base.gamma, md.base.scale, md.alt.epsilon, md.alt.mu] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&(self.draws.len() as u64).to_le_bytes());
        for d in &self.draws {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0 };
        if rd.take(8)? != FORMAT_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(rd.take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let code = rd.take(1)?[0];
        let statistic = TestKind::from_code(code).ok_or_else(|| Error::Format(format!("unknown statistic code {code}")))?;
        let m = rd.u64()? as usize;
        let n = rd.u64()? as usize;
        let seed = rd.u64()?;
        let model = match rd.take(1)?[0] {
            0 => None,
            1 => Some(LrtModel {
                base: GGParams {
                    gamma: rd.f64()?,
                    scale: rd.f64()?,
                },
                alt: MixtureAlt {
                    epsilon: rd.f64()?,
                    mu: rd.f64()?,
                },
            }),
            f => return Err(Error::Format(format!("bad model flag {f}"))),
        };
        let reps = rd.u64()? as usize;
        if bytes.len() - rd.pos != reps * 8 {
            return Err(Error::Format(format!("expected {reps} draws, found {} bytes", bytes.len() - rd.pos)));
        }
        let draws: Vec<f64> = (0..reps).map(|_| rd.f64()).collect::<Result<_>>()?;
        if draws.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("draws are not sorted".into()));
        }
        Ok(Self {
            statistic,
            m,
            n,
            seed,
            model,
            draws,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos + k;
        let s = self.bytes.get(self.pos..end).ok_or_else(|| Error::Format("truncated file".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Value of a rank statistic in the units its p-value function expects
/// (KS is reported as the scaled `λ`).
pub fn rank_stat(kind: TestKind, order: &PooledOrder) -> f64 {
    match kind {
        TestKind::Hc => order.hc(),
        TestKind::Wilcoxon => order.wilcoxon() as f64,
        TestKind::Ks => order.ks().lambda,
        TestKind::TailRun => order.tail_run() as f64,
        TestKind::Lrt => unreachable!("LRT is not a rank statistic"),
    }
}

/// Draws a tie-free pooled order from `source`; a collision triggers a redraw.
pub(crate) fn draw_null_order(m: usize, n: usize, source: NullSource, rng: &mut StreamRng) -> PooledOrder {
    let mut x = Vec::with_capacity(m);
    let mut y = Vec::with_capacity(n);
    loop {
        x.clear();
        y.clear();
        match source {
            NullSource::Uniform => {
                x.extend((0..m).map(|_| rng.random::<f64>()));
                y.extend((0..n).map(|_| rng.random::<f64>()));
            }
            NullSource::Model(p) => {
                p.sample_into(&mut x, m, rng);
                p.sample_into(&mut y, n, rng);
            }
        }
        if let Ok(order) = PooledOrder::new(&x, &y) {
            return order;
        }
    }
}

fn table_key(seed: u64, kind: TestKind, m: usize, n: usize, k: usize) -> StreamKey {
    StreamKey::new(seed, Purpose::NullTable, [kind.code() as u64, ((m as u64) << 32) ^ n as u64, k as u64])
}

/// Monte Carlo null table with uniform data for rank statistics and F-samples for the LRT.
pub fn mc_null_table(
    statistic: TestKind,
    m: usize,
    n: usize,
    reps: usize,
    seed: u64,
    model: Option<LrtModel>,
) -> Result<NullTable> {
    mc_null_table_from(statistic, m, n, reps, seed, model, NullSource::Uniform)
}

/// As [`mc_null_table`], choosing the data law used for rank statistics.
///
/// Replicate `k` uses its own stream derived from `(seed, statistic, m, n, k)`,
/// so the table does not depend on the number of worker threads.
pub fn mc_null_table_from(
    statistic: TestKind,
    m: usize,
    n: usize,
    reps: usize,
    seed: u64,
    model: Option<LrtModel>,
    source: NullSource,
) -> Result<NullTable> {
    if reps < MIN_TABLE_REPS {
        return Err(Error::Config(format!("null tables need at least {MIN_TABLE_REPS} replicates, got {reps}")));
    }
    if m == 0 || n == 0 {
        return Err(Error::Config("sample sizes must be positive".into()));
    }
    let mut draws: Vec<f64> = match statistic {
        TestKind::Lrt => {
            let md = model.ok_or_else(|| Error::Config("LRT null table requires the model (F, epsilon, mu)".into()))?;
            md.base.validate()?;
            md.alt.validate()?;
            (0..reps)
                .into_par_iter()
                .map(|k| {
                    let mut rng = table_key(seed, statistic, m, n, k).rng();
                    let mut y = Vec::with_capacity(n);
                    md.base.sample_into(&mut y, n, &mut rng);
                    lrt_sum(&y, &md.base, &md.alt)
                })
                .collect()
        }
        kind => (0..reps)
            .into_par_iter()
            .map(|k| {
                let mut rng = table_key(seed, kind, m, n, k).rng();
                rank_stat(kind, &draw_null_order(m, n, source, &mut rng))
            })
            .collect(),
    };
    if draws.iter().any(|d| !d.is_finite()) {
        return Err(Error::Numeric("non-finite null statistic".into()));
    }
    draws.sort_unstable_by(f64::total_cmp);
    Ok(NullTable {
        statistic,
        m,
        n,
        seed,
        model: if statistic == TestKind::Lrt { model } else { None },
        draws,
    })
}

/// Add-one Monte Carlo p-value `(1 + #{draws >= value}) / (R + 1)`.
pub fn mc_pvalue(value: f64, table: &NullTable) -> PValue {
    let below = table.draws.partition_point(|&d| d < value);
    let at_or_above = table.draws.len() - below;
    PValue::new((1 + at_or_above) as f64 / (table.draws.len() + 1) as f64, PMethod::MonteCarlo)
}

/// Upper-tail normal approximation for `U` with continuity correction.
pub fn wilcoxon_pvalue(u: u64, m: usize, n: usize) -> Result<PValue> {
    let mn = (m * n) as f64;
    if u as f64 > mn {
        return Err(Error::Domain(format!("U = {u} exceeds mn = {mn}")));
    }
    let sd = (mn * (m + n + 1) as f64 / 12.0).sqrt();
    let z = (u as f64 - 0.5 - mn / 2.0) / sd;
    Ok(PValue::new(normal_sf(z), PMethod::NormalApprox))
}

/// Exact number of label arrangements giving each `U = 0..=mn`.
pub fn wilcoxon_exact_counts(m: usize, n: usize) -> Result<Vec<u64>> {
    if m + n > 24 {
        return Err(Error::Scale(format!("m + n = {} exceeds 24", m + n)));
    }
    // counts[i][j] is the distribution for sizes (i, j). The largest pooled
    // value is either an X (adds no pairs) or a Y (beats all i X's).
    let mut counts: Vec<Vec<Vec<u64>>> = vec![vec![Vec::new(); n + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=n {
            counts[i][j] = if i == 0 || j == 0 {
                vec![1]
            } else {
                let mut c = vec![0u64; i * j + 1];
                for (u, &v) in counts[i - 1][j].iter().enumerate() {
                    c[u] += v;
                }
                for (u, &v) in counts[i][j - 1].iter().enumerate() {
                    c[u + i] += v;
                }
                c
            };
        }
    }
    Ok(std::mem::take(&mut counts[m][n]))
}

pub fn wilcoxon_exact_null(m: usize, n: usize) -> Result<Vec<f64>> {
    let counts = wilcoxon_exact_counts(m, n)?;
    let total: u64 = counts.iter().sum();
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Integration breakpoints covering the effective support of `p` and of its
/// shift by `shift`, denser near the bulk.
pub(crate) fn support_breaks(p: &GGParams, shift: f64) -> Vec<f64> {
    // beyond this radius the density is below e^-745
    let radius = p.scale * (p.gamma * 745.0).powf(1.0 / p.gamma);
    let mut pts = vec![0.0, shift, -radius, shift + radius];
    let mut r = p.scale;
    while r < radius {
        pts.extend([-r, r, shift - r, shift + r]);
        r *= 4.0;
    }
    pts.retain(|v| v.is_finite() && *v >= -radius && *v <= shift + radius);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Mean and variance of `U/mn` under the mixture alternative.
pub fn wilcoxon_alt_moments(p: &GGParams, alt: &MixtureAlt, m: usize, n: usize) -> Result<(f64, f64)> {
    p.validate()?;
    alt.validate()?;
    let (eps, mu) = (alt.epsilon, alt.mu);
    let breaks = support_breaks(p, mu);
    let opts = QuadOptions::default();
    let shifted = |x: f64| p.pdf(x - mu);
    let int_f_dg = (1.0 - eps) / 2.0 + eps * integrate_piecewise(|x| p.cdf(x) * shifted(x), &breaks, opts)?;
    let int_f2_dg = (1.0 - eps) / 3.0 + eps * integrate_piecewise(|x| p.cdf(x).powi(2) * shifted(x), &breaks, opts)?;
    let int_g2_df = integrate_piecewise(|x| alt.sf(p, x).powi(2) * p.pdf(x), &breaks, opts)?;
    let lambda = 0.5 - int_f_dg;
    let eps1 = 1.0 / 3.0 - int_f2_dg;
    let eps2 = 1.0 / 3.0 - int_g2_df;
    let (mf, nf) = (m as f64, n as f64);
    let scaled_var = (mf + nf + 1.0) / 12.0 + (mf - 1.0) * (lambda - eps1) + (nf - 1.0) * (lambda - eps2)
        - lambda * lambda * (mf + nf - 1.0);
    Ok((int_f_dg, scaled_var / (mf * nf)))
}

/// One-sided Smirnov limit `exp(-2 λ²)`.
pub fn ks_pvalue(lambda: f64) -> Result<PValue> {
    if !lambda.is_finite() {
        return Err(Error::Domain(format!("non-finite lambda {lambda}")));
    }
    let p = if lambda <= 0.0 { 1.0 } else { (-2.0 * lambda * lambda).exp() };
    Ok(PValue::new(p, PMethod::SmirnovLimit))
}

fn ln_tail_run_sf(l: usize, m: usize, n: usize) -> f64 {
    (0..l).map(|j| ((n - j) as f64).ln() - ((m + n - j) as f64).ln()).sum()
}

/// Exact `P₀(L* >= l) = Π_{j<l} (n-j)/(m+n-j)`.
pub fn tailrun_pvalue(l: usize, m: usize, n: usize) -> Result<PValue> {
    if l > n {
        return Err(Error::Domain(format!("tail run {l} exceeds n = {n}")));
    }
    Ok(PValue::new(ln_tail_run_sf(l, m, n).exp(), PMethod::Exact))
}

/// Randomized exact p-value `P₀(L* > l) + u·P₀(L* = l)` for `u` uniform on
/// [0, 1); uniformly distributed under the null, so the test has exact size.
pub fn tailrun_pvalue_randomized(l: usize, m: usize, n: usize, u: f64) -> Result<PValue> {
    if l > n {
        return Err(Error::Domain(format!("tail run {l} exceeds n = {n}")));
    }
    let at_least = ln_tail_run_sf(l, m, n).exp();
    let above = if l == n { 0.0 } else { ln_tail_run_sf(l + 1, m, n).exp() };
    Ok(PValue::new(above + u * (at_least - above), PMethod::ExactRandomized))
}

/// Null pmf of the tail run, indexed by `l = 0..=n`.
pub fn tailrun_null_pmf(m: usize, n: usize) -> Result<Vec<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::Domain("sample sizes must be positive".into()));
    }
    let mut sf: Vec<f64> = Vec::with_capacity(n + 2);
    let mut acc = 1.0;
    sf.push(acc);
    for j in 0..n {
        acc *= (n - j) as f64 / (m + n - j) as f64;
        sf.push(acc);
    }
    sf.push(0.0);
    Ok(sf.windows(2).map(|w| w[0] - w[1]).collect())
}

/// On-disk cache of null tables keyed by statistic, sizes, reps, seed and (for the LRT) model.
#[derive(Clone, Debug)]
pub struct NullTableCache {
    dir: PathBuf,
}

impl NullTableCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn path_for(&self, statistic: TestKind, m: usize, n: usize, reps: usize, seed: u64, model: Option<&LrtModel>) -> PathBuf {
        let mut name = format!("{statistic}_m{m}_n{n}_r{reps}_s{seed}");
        if let Some(md) = model {
            for v in [md.base.gamma, md.base.scale, md.alt.epsilon, md.alt.mu] {
                name.push_str(&format!("_{:016x}", v.to_bits()));
            }
        }
        name.push_str(".bin");
        self.dir.join(name)
    }

    pub fn get_or_build(
        &self,
        statistic: TestKind,
        m: usize,
        n: usize,
        reps: usize,
        seed: u64,
        model: Option<LrtModel>,
    ) -> Result<NullTable> {
        let model = if statistic == TestKind::Lrt { model } else { None };
        let path = self.path_for(statistic, m, n, reps, seed, model.as_ref());
        if let Ok(table) = NullTable::load(&path) {
            if table.statistic == statistic && table.m == m && table.n == n && table.reps() == reps && table.seed == seed && table.model == model {
                return Ok(table);
            }
        }
        let table = mc_null_table(statistic, m, n, reps, seed, model)?;
        table.save(&path)?;
        Ok(table)
    }
}
