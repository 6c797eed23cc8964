//! Small statistics helpers: Wilson intervals and binomial tails.

/// Standard normal quantile at 0.995 (two-sided 99 %).
pub const Z_TWO_SIDED_99: f64 = 2.5758293035489;
/// Standard normal quantile at 0.99 (one-sided 99 %).
pub const Z_ONE_SIDED_99: f64 = 2.3263478740408;

/// Wilson score interval `(lo, hi)` for `successes` out of `n` at quantile `z`.
pub fn wilson(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let ph = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (ph + z2 / (2.0 * nf)) / denom;
    let half = z * (ph * (1.0 - ph) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Two-sided 99 % Wilson interval.
pub fn wilson99(successes: u64, n: u64) -> (f64, f64) {
    wilson(successes, n, Z_TWO_SIDED_99)
}

/// One-sided 99 % Wilson upper bound.
pub fn wilson99_upper(successes: u64, n: u64) -> f64 {
    wilson(successes, n, Z_ONE_SIDED_99).1
}

/// One-sided 99 % Wilson lower bound.
pub fn wilson99_lower(successes: u64, n: u64) -> f64 {
    wilson(successes, n, Z_ONE_SIDED_99).0
}

fn ln_choose(n: u64, k: u64) -> f64 {
    // sum of logs; n stays in the thousands here
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `P(Bin(n, p) ≤ k)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    (0..=k)
        .map(|i| (ln_choose(n, i) + i as f64 * lp + (n - i) as f64 * lq).exp())
        .sum::<f64>()
        .min(1.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the `n − 1` denominator.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Median of the finite entries.
pub fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wilson_reference_values() {
        // independent evaluation of the score interval, 40 of 100 at z = 1.96
        let (lo, hi) = wilson(40, 100, 1.96);
        assert_relative_eq!(lo, 0.3093997461136028, epsilon = 1e-12);
        assert_relative_eq!(hi, 0.4979992153815976, epsilon = 1e-12);
        let (lo, hi) = wilson99(0, 50);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.15);
        assert_eq!(wilson99(50, 50).1, 1.0);
    }

    #[test]
    fn binomial_cdf_small_cases() {
        assert_relative_eq!(binomial_cdf(0, 3, 0.5), 0.125, epsilon = 1e-15);
        assert_relative_eq!(binomial_cdf(1, 3, 0.5), 0.5, epsilon = 1e-15);
        assert_relative_eq!(binomial_cdf(2, 4, 0.3), 0.9163, epsilon = 1e-12);
        assert_eq!(binomial_cdf(5, 5, 0.3), 1.0);
    }

    #[test]
    fn descriptive() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_relative_eq!(sample_std(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(median(&[3.0, 1.0, f64::INFINITY, 2.0]), 2.0);
        assert_relative_eq!(ols_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), 2.0);
    }
}
