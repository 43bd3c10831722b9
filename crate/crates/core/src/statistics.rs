//! Two-sample test statistics.
//!
//! Every statistic here rejects for large values under the alternative that
//! the Y-sample is shifted upward. The four rank statistics only look at the
//! pooled ordering, which [`PooledOrder`] computes once.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{GGParams, MixtureAlt};
use crate::error::{Error, Result};

/// The five detection tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Lrt,
    Hc,
    Wilcoxon,
    Ks,
    #[serde(rename = "tailrun")]
    TailRun,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [TestKind::Lrt, TestKind::Hc, TestKind::Wilcoxon, TestKind::Ks, TestKind::TailRun];

    pub fn as_str(&self) -> &'static str {
        match self {
            TestKind::Lrt => "lrt",
            TestKind::Hc => "hc",
            TestKind::Wilcoxon => "wilcoxon",
            TestKind::Ks => "ks",
            TestKind::TailRun => "tailrun",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            TestKind::Lrt => 1,
            TestKind::Hc => 2,
            TestKind::Wilcoxon => 3,
            TestKind::Ks => 4,
            TestKind::TailRun => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn is_rank_based(&self) -> bool {
        !matches!(self, TestKind::Lrt)
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "lrt" => Ok(TestKind::Lrt),
            "hc" => Ok(TestKind::Hc),
            "wilcoxon" | "u" => Ok(TestKind::Wilcoxon),
            "ks" => Ok(TestKind::Ks),
            "tailrun" => Ok(TestKind::TailRun),
            other => Err(Error::Config(format!("unknown test `{other}`"))),
        }
    }
}

/// A computed statistic. All five reject for large values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatValue {
    pub name: TestKind,
    pub value: f64,
    pub rejects_for_large: bool,
}

impl StatValue {
    fn new(name: TestKind, value: f64) -> Self {
        Self {
            name,
            value,
            rejects_for_large: true,
        }
    }
}

/// Control sample `x` (from F) and test sample `y` (from G).
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TwoSample {
    /// Checks sizes and finiteness. Ties are detected when the pooled order is built.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::Domain("both samples need at least one value".into()));
        }
        if let Some(v) = x.iter().chain(&y).find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite observation {v}")));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn pooled_order(&self) -> Result<PooledOrder> {
        PooledOrder::new(&self.x, &self.y)
    }

    /// Breaks ties by nudging repeated values upward by whole ulps, in input order
    /// (x first, then y). Values that are already distinct are left untouched.
    pub fn dejittered(&self) -> Self {
        let mut pooled: Vec<f64> = self.x.iter().chain(&self.y).copied().collect();
        loop {
            let mut idx: Vec<usize> = (0..pooled.len()).collect();
            idx.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]).then(a.cmp(&b)));
            let original: Vec<f64> = idx.iter().map(|&i| pooled[i]).collect();
            let mut changed = false;
            let mut run = 0u32;
            for w in 1..idx.len() {
                if original[w] == original[w - 1] {
                    run += 1;
                    let mut v = original[w];
                    for _ in 0..run {
                        v = v.next_up();
                    }
                    pooled[idx[w]] = v;
                    changed = true;
                } else {
                    run = 0;
                }
            }
            if !changed {
                break;
            }
        }
        let y = pooled.split_off(self.x.len());
        Self { x: pooled, y }
    }
}

/// Pooled sample sorted ascending, kept as origin labels (`true` = X).
#[derive(Clone, Debug)]
pub struct PooledOrder {
    from_x: Vec<bool>,
    m: usize,
    n: usize,
}

impl PooledOrder {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let mut pooled: Vec<(f64, bool)> = x.iter().map(|&v| (v, true)).chain(y.iter().map(|&v| (v, false))).collect();
        pooled.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = pooled.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Ties { value: w[0].0 });
        }
        Ok(Self {
            from_x: pooled.into_iter().map(|(_, lab)| lab).collect(),
            m: x.len(),
            n: y.len(),
        })
    }

    /// Builds directly from labels listed in ascending order of the pooled values.
    pub fn from_labels(from_x: Vec<bool>) -> Result<Self> {
        let m = from_x.iter().filter(|&&b| b).count();
        let n = from_x.len() - m;
        if m == 0 || n == 0 {
            return Err(Error::Domain("both samples need at least one value".into()));
        }
        Ok(Self { from_x, m, n })
    }

    pub fn labels(&self) -> &[bool] {
        &self.from_x
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank_profile(&self) -> RankProfile {
        let total = self.m + self.n;
        let mut v = Vec::with_capacity(total - 1);
        let mut count = 0u64;
        for &lab in &self.from_x[..total - 1] {
            count += lab as u64;
            v.push(count);
        }
        RankProfile { v, m: self.m, n: self.n }
    }

    pub fn hc(&self) -> f64 {
        let total = (self.m + self.n) as f64;
        let (m, n) = (self.m as f64, self.n as f64);
        let inflate = (total / (total - 1.0)).sqrt();
        let mut best = f64::NEG_INFINITY;
        let mut count = 0u64;
        for (i, &lab) in self.from_x[..self.m + self.n - 1].iter().enumerate() {
            count += lab as u64;
            let s = (i + 1) as f64;
            let mean = m * s / total;
            let var = m * n * s * (total - s) / (total * total * (total - 1.0));
            let z = inflate * (count as f64 - mean) / var.sqrt();
            if z > best {
                best = z;
            }
        }
        best
    }

    pub fn wilcoxon(&self) -> u64 {
        let mut xs_below = 0u64;
        let mut u = 0u64;
        for &lab in &self.from_x {
            if lab {
                xs_below += 1;
            } else {
                u += xs_below;
            }
        }
        u
    }

    /// One-sided `sup_t [F_m(t) - G_n(t)]`.
    pub fn ks(&self) -> KsStat {
        let (m, n) = (self.m as f64, self.n as f64);
        let (mut fx, mut gy) = (0u64, 0u64);
        let mut best = 0.0f64;
        for &lab in &self.from_x {
            if lab {
                fx += 1;
                let d = fx as f64 / m - gy as f64 / n;
                if d > best {
                    best = d;
                }
            } else {
                gy += 1;
            }
        }
        KsStat {
            d: best,
            lambda: (m * n / (m + n)).sqrt() * best,
        }
    }

    pub fn tail_run(&self) -> u64 {
        self.from_x.iter().rev().take_while(|&&lab| !lab).count() as u64
    }
}

/// `v[s-1] = V_{m,s}`: how many of the `s` smallest pooled values came from X,
/// for `s = 1, ..., m + n - 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankProfile {
    pub v: Vec<u64>,
    pub m: usize,
    pub n: usize,
}

/// One-sided Smirnov statistic `D` and its scaled form `λ = √(mn/(m+n)) D`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsStat {
    pub d: f64,
    pub lambda: f64,
}

pub fn rank_profile(ts: &TwoSample) -> Result<RankProfile> {
    Ok(ts.pooled_order()?.rank_profile())
}

/// Higher criticism in rank form, maximizing the standardized hypergeometric
/// count `V_{m,s}` over `s = 1..m+n-1`.
pub fn hc_stat(ts: &TwoSample) -> Result<StatValue> {
    Ok(StatValue::new(TestKind::Hc, ts.pooled_order()?.hc()))
}

/// Higher criticism evaluated from the empirical CDFs at each pooled order
/// statistic except the largest.
pub fn hc_stat_sup_form(ts: &TwoSample) -> Result<StatValue> {
    let mut xs = ts.x.clone();
    let mut ys = ts.y.clone();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let mut pooled: Vec<f64> = xs.iter().chain(&ys).copied().collect();
    pooled.sort_unstable_by(f64::total_cmp);
    if let Some(w) = pooled.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Ties { value: w[0] });
    }
    let (m, n) = (xs.len() as f64, ys.len() as f64);
    let total = m + n;
    let scale = (m * n / total).sqrt();
    let mut best = f64::NEG_INFINITY;
    for (i, &t) in pooled[..pooled.len() - 1].iter().enumerate() {
        let fm = xs.partition_point(|&v| v <= t) as f64 / m;
        let gn = ys.partition_point(|&v| v <= t) as f64 / n;
        let h = (i + 1) as f64 / total;
        let z = scale * (fm - gn) / (h * (1.0 - h)).sqrt();
        if z > best {
            best = z;
        }
    }
    Ok(StatValue::new(TestKind::Hc, best))
}

/// Mann-Whitney count `#{(i, j) : X_i < Y_j}`.
pub fn wilcoxon_u(ts: &TwoSample) -> Result<StatValue> {
    Ok(StatValue::new(TestKind::Wilcoxon, ts.pooled_order()?.wilcoxon() as f64))
}

pub fn ks_one_sided(ts: &TwoSample) -> Result<KsStat> {
    Ok(ts.pooled_order()?.ks())
}

/// Number of Y values at the top of the pooled order before the first X.
pub fn tail_run(ts: &TwoSample) -> Result<StatValue> {
    Ok(StatValue::new(TestKind::TailRun, ts.pooled_order()?.tail_run() as f64))
}

/// Log-likelihood ratio `Σ log((1-ε) + ε f(y-μ)/f(y))` of the Y-sample with
/// the true model supplied. The X-sample carries no information when F is known.
pub fn lrt_stat(y: &[f64], p: &GGParams, alt: &MixtureAlt) -> Result<StatValue> {
    if y.is_empty() {
        return Err(Error::Domain("LRT needs a nonempty Y-sample".into()));
    }
    p.validate()?;
    alt.validate()?;
    let value = lrt_sum(y, p, alt);
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite log-likelihood ratio {value}")));
    }
    Ok(StatValue::new(TestKind::Lrt, value))
}

#[inline]
pub(crate) fn lrt_term(y: f64, p: &GGParams, alt: &MixtureAlt) -> f64 {
    let log_ratio = p.potential(y) - p.potential(y - alt.mu);
    let eps = alt.epsilon;
    if log_ratio < 30.0 {
        (eps * log_ratio.exp_m1()).ln_1p()
    } else {
        // log(ε e^L + (1-ε)) = L + log ε + log1p((1-ε)/ε · e^-L)
        log_ratio + eps.ln() + ((1.0 - eps) / eps * (-log_ratio).exp()).ln_1p()
    }
}

pub(crate) fn lrt_sum(y: &[f64], p: &GGParams, alt: &MixtureAlt) -> f64 {
    y.iter().map(|&v| lrt_term(v, p, alt)).sum()
}
