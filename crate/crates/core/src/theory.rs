//! Detection boundaries and finite-n evaluation of the power conditions.
//!
//! The conditions are asymptotic (`≫ log n`, `→ ∞`); the reports here
//! evaluate their left-hand sides at a given `n` and compare against the
//! stated scale. A ratio of at least 10 reads as satisfied, at most 0.1 as
//! not satisfied, anything in between as inconclusive.

use serde::{Deserialize, Serialize};

use crate::calibration::support_breaks;
use crate::distributions::{GGParams, MixtureAlt};
use crate::error::{Error, Result};
use crate::special::{integrate, integrate_piecewise, QuadOptions};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryQuery {
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub lhs: f64,
    pub scale: f64,
    pub ratio: f64,
    pub satisfied: Verdict,
}

impl ConditionReport {
    pub fn new(lhs: f64, scale: f64) -> Self {
        let ratio = lhs / scale;
        let satisfied = if ratio >= 10.0 {
            Verdict::Yes
        } else if ratio <= 0.1 {
            Verdict::No
        } else {
            Verdict::Inconclusive
        };
        Self {
            lhs,
            scale,
            ratio,
            satisfied,
        }
    }
}

/// Sparse-regime boundary `ρ*_γ(β)` (the formula is stated for `1/2 < β < 1`).
pub fn detection_boundary_sparse(q: &BoundaryQuery) -> f64 {
    let (beta, g) = (q.beta, q.gamma);
    if g <= 1.0 {
        return 2.0 * beta - 1.0;
    }
    let breakpoint = 1.0 - 2f64.powf(-g / (g - 1.0));
    if beta < breakpoint {
        (2f64.powf(1.0 / (g - 1.0)) - 1.0).powf(g - 1.0) * (beta - 0.5)
    } else {
        (1.0 - (1.0 - beta).powf(1.0 / g)).powf(g)
    }
}

/// Both branches of `ρ*_γ` for `γ > 1`, evaluated regardless of `β`.
pub fn sparse_boundary_branches(beta: f64, gamma: f64) -> (f64, f64) {
    (
        (2f64.powf(1.0 / (gamma - 1.0)) - 1.0).powf(gamma - 1.0) * (beta - 0.5),
        (1.0 - (1.0 - beta).powf(1.0 / gamma)).powf(gamma),
    )
}

pub fn sparse_breakpoint(gamma: f64) -> f64 {
    1.0 - 2f64.powf(-gamma / (gamma - 1.0))
}

/// Critical dense-regime exponent `s`.
pub fn detection_boundary_dense(beta: f64, gamma: f64) -> f64 {
    if gamma >= 0.5 {
        beta
    } else {
        0.5 - (1.0 - 2.0 * beta) / (1.0 + 2.0 * gamma)
    }
}

/// `r_γ = (1 - 2^(-1/(γ-1)))^γ`, the split between the two threshold choices for `γ > 1`.
pub fn r_gamma(gamma: f64) -> f64 {
    (1.0 - 2f64.powf(-1.0 / (gamma - 1.0))).powf(gamma)
}

/// Exponent `q` of the higher-criticism threshold: `r / r_γ` below `r_γ`,
/// otherwise 1 (γ > 1); `q = r` for γ <= 1, so that `t_n = μ_n`.
pub fn hc_threshold_exponent(r: f64, gamma: f64) -> f64 {
    if gamma <= 1.0 {
        return r;
    }
    let rg = r_gamma(gamma);
    if r < rg {
        r / rg
    } else {
        1.0
    }
}

/// Threshold `t_n = (γ q log n)^(1/γ)` used in the power analysis.
pub fn sparse_threshold(n: f64, q: f64, gamma: f64) -> f64 {
    (gamma * q * n.ln()).powf(1.0 / gamma)
}

/// The three higher-criticism power conditions at threshold `t`:
/// (i) `n (F̄(t) ∨ ε F̄(t-μ))` against `log² n`,
/// (ii) `√n ε (F̄(t-μ) - F̄(t)) / √(F̄(t) + ε η F̄(t-μ))` against `log n`,
/// (iii) at the median `t = 0`, `√n ε (F̄(-μ) - 1/2)` against `log n`.
pub fn hc_conditions(t: f64, n: f64, p: &GGParams, alt: &MixtureAlt, eta: f64) -> Result<[ConditionReport; 3]> {
    p.validate()?;
    if !(eta > 0.0 && eta <= 0.5) {
        return Err(Error::Parameter(format!("eta must lie in (0, 1/2], got {eta}")));
    }
    let (eps, mu) = (alt.epsilon, alt.mu);
    let log_n = n.ln();
    let tail = p.sf(t);
    let shifted = p.sf(t - mu);
    let first = n * tail.max(eps * shifted);
    let second = n.sqrt() * eps * (shifted - tail) / (tail + eps * eta * shifted).sqrt();
    let third = n.sqrt() * eps * (p.sf(-mu) - 0.5);
    Ok([
        ConditionReport::new(first, log_n * log_n),
        ConditionReport::new(second, log_n),
        ConditionReport::new(third, log_n),
    ])
}

/// `∫ F(x - μ) dF(x)` by adaptive quadrature.
pub fn shifted_overlap(p: &GGParams, mu: f64) -> Result<f64> {
    p.validate()?;
    integrate_piecewise(|x| p.cdf(x - mu) * p.pdf(x), &support_breaks(p, mu), QuadOptions::default())
}

/// `√n ε (1/2 - ∫F(· - μ) dF)` against `log n`.
pub fn wilcoxon_condition(n: f64, p: &GGParams, alt: &MixtureAlt) -> Result<ConditionReport> {
    let gap = 0.5 - shifted_overlap(p, alt.mu)?;
    Ok(ConditionReport::new(n.sqrt() * alt.epsilon * gap, n.ln()))
}

/// Location and value of `sup_t [F̄(t - μ) - F̄(t)]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsGap {
    pub argmax: f64,
    pub value: f64,
}

/// Maximizes `F̄(t - μ) - F̄(t)` on a bracketing grid, then refines by
/// bisection on the sign of its derivative `f(t) - f(t - μ)`.
pub fn ks_gap(p: &GGParams, mu: f64) -> Result<KsGap> {
    p.validate()?;
    let gap = |t: f64| p.sf(t - mu) - p.sf(t);
    let half_width = p.scale * (p.gamma * 40.0).powf(1.0 / p.gamma);
    let lo = -half_width;
    let hi = mu + half_width;
    let steps = 400;
    let grid: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| (i, gap(t)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid");
    if best == 0 || best == steps {
        return Err(Error::Bracket(format!("grid maximizer at t = {}", grid[best])));
    }
    let slope = |t: f64| p.ln_pdf(t) - p.ln_pdf(t - mu);
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    if slope(a) < 0.0 || slope(b) > 0.0 {
        // flat objective (μ ≈ 0): keep the grid point
        return Ok(KsGap {
            argmax: grid[best],
            value: gap(grid[best]),
        });
    }
    while b - a > 1e-12 * (1.0 + a.abs().max(b.abs())) {
        let mid = 0.5 * (a + b);
        if slope(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let argmax = 0.5 * (a + b);
    Ok(KsGap {
        argmax,
        value: gap(argmax),
    })
}

/// `√n ε sup_t [F̄(t - μ) - F̄(t)]`; divergence is judged against scale 1.
pub fn ks_condition(n: f64, p: &GGParams, alt: &MixtureAlt) -> Result<ConditionReport> {
    let g = ks_gap(p, alt.mu)?;
    Ok(ConditionReport::new(n.sqrt() * alt.epsilon * g.value, 1.0))
}

/// Tail-run condition quantities at threshold `t` and run length `l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRunReport {
    /// `m F̄(t)`; needs to vanish.
    pub control_exceedances: f64,
    /// `n ε F̄(t - μ) - 2l`; needs to be nonnegative.
    pub signal_margin: f64,
    pub satisfied: Verdict,
}

pub fn tailrun_condition(t: f64, m: f64, n: f64, p: &GGParams, alt: &MixtureAlt, l: f64) -> Result<TailRunReport> {
    p.validate()?;
    let control_exceedances = m * p.sf(t);
    let signal_margin = n * alt.epsilon * p.sf(t - alt.mu) - 2.0 * l;
    let satisfied = if control_exceedances <= 0.1 && signal_margin >= 0.0 {
        Verdict::Yes
    } else if control_exceedances >= 10.0 || signal_margin < -l {
        Verdict::No
    } else {
        Verdict::Inconclusive
    };
    Ok(TailRunReport {
        control_exceedances,
        signal_margin,
        satisfied,
    })
}

/// `[∫_{-∞}^{x_upper} f(x-μ)²/f(x) dx - 1]₊`, the chi-square-type quantity in
/// the lower bound. Tails where the integrand drops below `1e-300` are cut.
pub fn lower_bound_integral(x_upper: f64, p: &GGParams, mu: f64) -> Result<f64> {
    p.validate()?;
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Parameter(format!("mu must be nonnegative, got {mu}")));
    }
    if x_upper.is_nan() {
        return Err(Error::Domain("x_upper is NaN".into()));
    }
    let c = p.ln_norm_const();
    let ln_integrand = |x: f64| c + p.potential(x) - 2.0 * p.potential(x - mu);
    let integrand = |x: f64| ln_integrand(x).exp();
    let cutoff = (1e-300f64).ln();
    let reach = |dir: f64| -> f64 {
        let mut step = p.scale.max(mu);
        let mut x = mu + dir * step;
        while ln_integrand(x) > cutoff {
            step *= 2.0;
            x = mu + dir * step;
        }
        x
    };
    let lo = reach(-1.0);
    let hi = reach(1.0).min(x_upper);
    if hi <= lo {
        return Ok(0.0);
    }
    // the integrand peaks near 2μ for γ = 2; seed the subdivision with the bulk
    let mut breaks = vec![lo, hi];
    for b in [0.0, mu, 2.0 * mu] {
        if b > lo && b < hi {
            breaks.push(b);
        }
    }
    let mut r = p.scale;
    while mu + r < hi || mu - r > lo {
        for b in [mu - r, mu + r, 2.0 * mu + r] {
            if b > lo && b < hi {
                breaks.push(b);
            }
        }
        r *= 4.0;
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let opts = QuadOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-10,
        max_intervals: 4000,
    };
    let total: f64 = breaks
        .windows(2)
        .map(|w| integrate(integrand, w[0], w[1], opts))
        .sum::<Result<f64>>()?;
    Ok((total - 1.0).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_cdf;

    fn q(beta: f64, gamma: f64) -> BoundaryQuery {
        BoundaryQuery { beta, gamma }
    }

    #[test]
    fn sparse_boundary_examples() {
        assert!((detection_boundary_sparse(&q(0.75, 2.0)) - 0.25).abs() < 1e-15);
        assert!((detection_boundary_sparse(&q(0.6, 2.0)) - 0.1).abs() < 1e-15);
        assert_eq!(detection_boundary_sparse(&q(0.8, 1.0)), 2.0 * 0.8 - 1.0);
        assert_eq!(detection_boundary_sparse(&q(0.7, 0.5)), 2.0 * 0.7 - 1.0);
    }

    #[test]
    fn sparse_boundary_continuous_and_monotone() {
        for g in [1.5, 2.0, 3.0] {
            let (a, b) = sparse_boundary_branches(sparse_breakpoint(g), g);
            assert!((a - b).abs() < 1e-12, "gamma {g}");
            let mut last = f64::NEG_INFINITY;
            for i in 1..100 {
                let v = detection_boundary_sparse(&q(0.5 + 0.5 * i as f64 / 100.0, g));
                assert!(v >= last);
                last = v;
            }
            // 1 - ρ*(1 - δ) ≈ γ δ^(1/γ) as δ → 0
            for delta in [1e-6f64, 1e-9, 1e-12] {
                let gap = 1.0 - detection_boundary_sparse(&q(1.0 - delta, g));
                assert!(gap > 0.0 && gap <= g * delta.powf(1.0 / g) * (1.0 + 1e-3), "gamma {g} delta {delta}");
            }
        }
    }

    #[test]
    fn dense_boundary_examples() {
        assert_eq!(detection_boundary_dense(0.2, 2.0), 0.2);
        assert!((detection_boundary_dense(0.2, 0.25) - 0.1).abs() < 1e-15);
        assert!((detection_boundary_dense(0.5, 0.1) - 0.5).abs() < 1e-15);
        let below = detection_boundary_dense(0.3, 0.5 - 1e-15);
        assert!((below - 0.3).abs() < 1e-12);
    }

    #[test]
    fn hc_condition_limits() {
        let p = GGParams::normal();
        let tiny = MixtureAlt::new(1e-300, 2.0).unwrap();
        let r = hc_conditions(3.0, 1e6, &p, &tiny, 0.5).unwrap();
        assert!(r[1].lhs.abs() < 1e-200);
        let flat = MixtureAlt::new(0.1, 1e-14).unwrap();
        let r = hc_conditions(3.0, 1e6, &p, &flat, 0.5).unwrap();
        assert!(r[1].lhs.abs() < 1e-9 && r[2].lhs.abs() < 1e-9);
        assert!(hc_conditions(3.0, 1e6, &p, &flat, 0.7).is_err());
    }

    #[test]
    fn hc_condition_grows_above_boundary() {
        let p = GGParams::normal();
        let (beta, r) = (0.6, 0.4);
        assert!((r_gamma(2.0) - 0.25).abs() < 1e-15);
        let lhs = |n: f64| {
            let alt = MixtureAlt::new(n.powf(-beta), sparse_threshold(n, r, 2.0)).unwrap();
            let t = sparse_threshold(n, hc_threshold_exponent(r, 2.0), 2.0);
            hc_conditions(t, n, &p, &alt, 0.5).unwrap()[1].lhs
        };
        assert!(lhs(1e6) > lhs(1e4));
    }

    #[test]
    fn wilcoxon_condition_matches_normal_closed_form() {
        let p = GGParams::normal();
        for mu in [0.5, 1.0, 2.0] {
            let gap = 0.5 - shifted_overlap(&p, mu).unwrap();
            let exact = normal_cdf(mu / std::f64::consts::SQRT_2) - 0.5;
            assert!((gap - exact).abs() < 1e-6, "mu {mu}: {gap} vs {exact}");
        }
        assert!((0.5 - shifted_overlap(&p, 1.0).unwrap() - 0.2602).abs() < 1e-4);
        let big = MixtureAlt::new(0.1, 60.0).unwrap();
        let r = wilcoxon_condition(1e4, &p, &big).unwrap();
        assert!((r.lhs - 100.0 * 0.1 / 2.0).abs() < 1e-8);
        let tiny = MixtureAlt::new(0.1, 1e-9).unwrap();
        let r = wilcoxon_condition(1e4, &p, &tiny).unwrap();
        assert!(r.lhs.abs() < 1e-8);
        assert_eq!(r.satisfied, Verdict::No);
    }

    #[test]
    fn ks_gap_at_half_shift_for_normal() {
        let p = GGParams::normal();
        for mu in [0.3, 1.0, 2.5] {
            let g = ks_gap(&p, mu).unwrap();
            assert!((g.argmax - mu / 2.0).abs() < 1e-6);
            assert!((g.value - (2.0 * normal_cdf(mu / 2.0) - 1.0)).abs() < 1e-12);
        }
        for gamma in [0.5, 1.0, 3.0] {
            let p = GGParams::standard(gamma).unwrap();
            let g = ks_gap(&p, 1.3).unwrap();
            assert!(g.value >= p.sf(0.65 - 1.3) - p.sf(0.65) - 1e-15);
        }
        let alt = MixtureAlt::new(0.1, 1e-12).unwrap();
        assert!(ks_condition(1e4, &p, &alt).unwrap().lhs < 1e-9);
    }

    #[test]
    fn tailrun_condition_examples() {
        let p = GGParams::normal();
        let alt = MixtureAlt::new(0.01, 3.0).unwrap();
        let r = tailrun_condition(80.0, 1e4, 1e4, &p, &alt, 5.0).unwrap();
        assert!(r.control_exceedances < 1e-300 && (r.signal_margin + 10.0).abs() < 1e-12);
        let r = tailrun_condition(3.0, 1e4, 1e4, &p, &alt, 5.0).unwrap();
        assert!((r.signal_margin - (1e4 * 0.01 / 2.0 - 10.0)).abs() < 1e-12);
        let n: f64 = 1e6;
        let alt = MixtureAlt::new(n.powf(-0.8), (2.0 * 0.9 * n.ln()).sqrt()).unwrap();
        let t = (2.0 * 1.05 * n.ln()).sqrt();
        let r = tailrun_condition(t, n, n, &p, &alt, 1.0).unwrap();
        assert!(r.control_exceedances < 1.0, "{}", r.control_exceedances);
    }

    #[test]
    fn lower_bound_gaussian_closed_form() {
        let p = GGParams::normal();
        for mu in [0.5f64, 1.0, 2.0] {
            let v = lower_bound_integral(f64::INFINITY, &p, mu).unwrap();
            let exact = (mu * mu).exp() - 1.0;
            assert!((v / exact - 1.0).abs() < 1e-6, "mu {mu}: {v} vs {exact}");
        }
        assert!(lower_bound_integral(f64::INFINITY, &p, 0.0).unwrap() < 1e-9);
        assert!(lower_bound_integral(f64::INFINITY, &p, -1.0).is_err());
        // truncating well below the bulk leaves less than one unit of mass
        assert_eq!(lower_bound_integral(-1.0, &p, 1.0).unwrap(), 0.0);
    }
}
