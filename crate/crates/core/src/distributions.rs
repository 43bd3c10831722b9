//! Generalized Gaussian distributions and the shifted mixture alternative.
//!
//! The standard form has density `c * exp(-|x|^γ / γ)` with
//! `c = γ^(1 - 1/γ) / (2 Γ(1/γ))`; γ = 2 is the standard normal and γ = 1 the
//! Laplace law with variance 2. A multiplicative `scale` rescales the axis.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma_p, gamma_q, ln_gamma};

/// Shape exponent and scale of a generalized Gaussian law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GGParams {
    pub gamma: f64,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl GGParams {
    pub fn new(gamma: f64, scale: f64) -> Result<Self> {
        let p = Self { gamma, scale };
        p.validate()?;
        Ok(p)
    }

    pub fn standard(gamma: f64) -> Result<Self> {
        Self::new(gamma, 1.0)
    }

    pub fn normal() -> Self {
        Self { gamma: 2.0, scale: 1.0 }
    }

    /// Laplace law rescaled to unit variance.
    pub fn unit_variance_laplace() -> Self {
        Self {
            gamma: 1.0,
            scale: std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Parameter(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }

    pub fn ln_norm_const(&self) -> f64 {
        let g = self.gamma;
        (1.0 - 1.0 / g) * g.ln() - std::f64::consts::LN_2 - ln_gamma(1.0 / g) - self.scale.ln()
    }

    /// `|x/scale|^γ / γ`, the negative log-density up to a constant.
    #[inline]
    pub fn potential(&self, x: f64) -> f64 {
        (x / self.scale).abs().powf(self.gamma) / self.gamma
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_norm_const() - self.potential(x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return self.sf(-x);
        }
        0.5 + 0.5 * gamma_p(1.0 / self.gamma, self.potential(x))
    }

    /// Upper tail `1 - F(x)`, computed without cancellation for large x.
    pub fn sf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return self.cdf(-x);
        }
        0.5 * gamma_q(1.0 / self.gamma, self.potential(x))
    }

    /// Inverse CDF by safeguarded Newton iteration, solved in tail space so
    /// extreme levels keep their precision.
    pub fn quantile(&self, q: f64) -> f64 {
        if q == 0.5 {
            0.0
        } else if q < 0.5 {
            -self.upper_point(q)
        } else {
            self.upper_point(1.0 - q)
        }
    }

    /// The `x >= 0` with `sf(x) = tail`, for `tail` in (0, 1/2].
    fn upper_point(&self, tail: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = self.scale;
        while self.sf(hi) > tail {
            lo = hi;
            hi *= 2.0;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = self.sf(x) - tail;
            if r > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if r.abs() <= 1e-14 * tail || hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            let newton = x + r / self.pdf(x);
            x = if newton > lo && newton < hi && newton.is_finite() {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }

    /// Draw one variate as `sign * scale * (γW)^(1/γ)` with `W ~ Gamma(1/γ, 1)`.
    pub fn sample_into<R: Rng + ?Sized>(&self, out: &mut Vec<f64>, count: usize, rng: &mut R) {
        let w = Gamma::new(1.0 / self.gamma, 1.0).expect("validated shape");
        let inv = 1.0 / self.gamma;
        out.reserve(count);
        for _ in 0..count {
            let mag = self.scale * (self.gamma * w.sample(rng)).powf(inv);
            out.push(if rng.random::<bool>() { mag } else { -mag });
        }
    }

    pub fn variance(&self) -> f64 {
        let g = self.gamma;
        self.scale * self.scale * g.powf(2.0 / g) * (ln_gamma(3.0 / g) - ln_gamma(1.0 / g)).exp()
    }
}

/// Contamination fraction and shift of `G = (1 - ε) F + ε F(· - μ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureAlt {
    pub epsilon: f64,
    pub mu: f64,
}

impl MixtureAlt {
    pub fn new(epsilon: f64, mu: f64) -> Result<Self> {
        let alt = Self { epsilon, mu };
        alt.validate()?;
        Ok(alt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::Parameter(format!("epsilon must lie in (0, 1/2), got {}", self.epsilon)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Parameter(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }

    /// CDF of the mixture `G` under base law `p`.
    pub fn cdf(&self, p: &GGParams, x: f64) -> f64 {
        (1.0 - self.epsilon) * p.cdf(x) + self.epsilon * p.cdf(x - self.mu)
    }

    pub fn sf(&self, p: &GGParams, x: f64) -> f64 {
        (1.0 - self.epsilon) * p.sf(x) + self.epsilon * p.sf(x - self.mu)
    }
}

/// Sparse-regime exponents: `ε = n^-β`, `μ = (γ r log n)^(1/γ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseParam {
    pub beta: f64,
    pub r: f64,
}

impl SparseParam {
    pub fn new(beta: f64, r: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Parameter(format!("sparse beta must lie in (0, 1), got {beta}")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Parameter(format!("r must lie in (0, 1), got {r}")));
        }
        Ok(Self { beta, r })
    }
}

/// Dense-regime exponents: `ε = n^-β`, `μ = n^(s - 1/2)`.
///
/// `s = 1/2` (unit shift) is admitted because the dense experiment grid ends there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseParam {
    pub beta: f64,
    pub s: f64,
}

impl DenseParam {
    pub fn new(beta: f64, s: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 0.5) {
            return Err(Error::Parameter(format!("dense beta must lie in (0, 1/2), got {beta}")));
        }
        if !(s > 0.0 && s <= 0.5) {
            return Err(Error::Parameter(format!("s must lie in (0, 1/2], got {s}")));
        }
        Ok(Self { beta, s })
    }
}

fn finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Domain(format!("non-finite argument {x}")))
    }
}

pub fn gg_pdf(x: f64, p: &GGParams) -> Result<f64> {
    p.validate()?;
    Ok(p.pdf(finite(x)?))
}

pub fn gg_cdf(x: f64, p: &GGParams) -> Result<f64> {
    p.validate()?;
    Ok(p.cdf(finite(x)?))
}

pub fn gg_survival(x: f64, p: &GGParams) -> Result<f64> {
    p.validate()?;
    Ok(p.sf(finite(x)?))
}

pub fn gg_quantile(q: f64, p: &GGParams) -> Result<f64> {
    p.validate()?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    Ok(p.quantile(q))
}

pub fn gg_sample<R: Rng + ?Sized>(count: usize, p: &GGParams, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    p.sample_into(&mut out, count, rng);
    out
}

/// Draws from `G`; each draw is independently shifted by μ with probability ε.
pub fn mixture_sample<R: Rng + ?Sized>(count: usize, p: &GGParams, alt: &MixtureAlt, rng: &mut R) -> Vec<f64> {
    let mut out = gg_sample(count, p, rng);
    for v in out.iter_mut() {
        if rng.random::<f64>() < alt.epsilon {
            *v += alt.mu;
        }
    }
    out
}

pub fn sparse_calibration(n: u64, sp: &SparseParam, gamma: f64) -> Result<MixtureAlt> {
    sparse_calibration_real(n as f64, sp, gamma)
}

/// Same as [`sparse_calibration`] for a real-valued sample size.
pub fn sparse_calibration_real(n: f64, sp: &SparseParam, gamma: f64) -> Result<MixtureAlt> {
    if n.is_nan() || n < 2.0 {
        return Err(Error::Parameter(format!("sample size must be at least 2, got {n}")));
    }
    let epsilon = n.powf(-sp.beta);
    if epsilon >= 0.5 {
        return Err(Error::Parameter(format!("n^-beta = {epsilon} is not below 1/2")));
    }
    Ok(MixtureAlt {
        epsilon,
        mu: (gamma * sp.r * n.ln()).powf(1.0 / gamma),
    })
}

pub fn dense_calibration(n: u64, dp: &DenseParam) -> Result<MixtureAlt> {
    if n < 2 {
        return Err(Error::Parameter(format!("sample size must be at least 2, got {n}")));
    }
    let n = n as f64;
    let epsilon = n.powf(-dp.beta);
    if epsilon >= 0.5 {
        return Err(Error::Parameter(format!("n^-beta = {epsilon} is not below 1/2")));
    }
    Ok(MixtureAlt {
        epsilon,
        mu: n.powf(dp.s - 0.5),
    })
}
