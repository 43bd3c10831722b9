#![allow(dead_code)]

/// Kolmogorov limiting survival `P(K > t) = 2 Σ (-1)^(k-1) exp(-2 k² t²)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = (-2.0 * k * k * t * t).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov p-value of `data` against `cdf`.
pub fn ks_one_sample_pvalue(data: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = data.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            ((i + 1) as f64 / n - c).max(c - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// Two-sample two-sided Kolmogorov-Smirnov p-value (asymptotic).
pub fn ks_two_sample_pvalue(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let sn = ne.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// All length-`m + n` label sequences with `m` trues, in lexicographic order.
pub fn arrangements(m: usize, n: usize) -> Vec<Vec<bool>> {
    fn rec(m: usize, n: usize, prefix: &mut Vec<bool>, out: &mut Vec<Vec<bool>>) {
        if m == 0 && n == 0 {
            out.push(prefix.clone());
            return;
        }
        if m > 0 {
            prefix.push(true);
            rec(m - 1, n, prefix, out);
            prefix.pop();
        }
        if n > 0 {
            prefix.push(false);
            rec(m, n - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, n, &mut Vec::new(), &mut out);
    out
}
