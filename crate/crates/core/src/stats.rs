//! Small statistics toolkit for the experiment gates.

use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

/// Mean and standard error of a sample.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Binomial standard deviation of a hit fraction, `sqrt(p (1 - p) / n)`.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `true` when `hits / n` lies within `k` binomial sigmas of `p`.
pub fn within_binomial(hits: usize, n: usize, p: f64, k: f64) -> bool {
    let observed = hits as f64 / n as f64;
    (observed - p).abs() <= k * binomial_sigma(p, n)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    slope(&lx, &ly)
}

pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// One level of a trend test: `successes` out of `trials` at ordinal score
/// `score`.
#[derive(Debug, Clone, Copy)]
pub struct TrendLevel {
    pub score: f64,
    pub successes: f64,
    pub trials: f64,
}

/// Cochran-Armitage trend statistic. Positive `z` means the success
/// proportion rises with the score.
pub fn cochran_armitage_z(levels: &[TrendLevel]) -> f64 {
    let n: f64 = levels.iter().map(|l| l.trials).sum();
    let r: f64 = levels.iter().map(|l| l.successes).sum();
    if n == 0.0 {
        return 0.0;
    }
    let p = r / n;
    let t: f64 = levels
        .iter()
        .map(|l| l.score * (l.successes - l.trials * p))
        .sum();
    let s1: f64 = levels.iter().map(|l| l.trials * l.score * l.score).sum();
    let s2: f64 = levels.iter().map(|l| l.trials * l.score).sum();
    let var = p * (1.0 - p) * (s1 - s2 * s2 / n);
    if var <= 0.0 {
        return 0.0;
    }
    t / var.sqrt()
}

/// One-sided p-value for a decreasing trend (small when proportions fall).
pub fn decreasing_trend_p(levels: &[TrendLevel]) -> f64 {
    standard_normal_cdf(cochran_armitage_z(levels))
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(z)
}

/// Exact one-sided McNemar test on paired binary outcomes. `b` counts pairs
/// where only the first condition hit, `c` pairs where only the second did.
/// Returns `P(X >= b)` for `X ~ Bin(b + c, 1/2)`: small when the first
/// condition hits more often.
pub fn mcnemar_one_sided(b: usize, c: usize) -> f64 {
    let n = (b + c) as u64;
    if n == 0 {
        return 1.0;
    }
    let bin = Binomial::new(0.5, n).expect("valid binomial");
    if b == 0 {
        return 1.0;
    }
    bin.sf(b as u64 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((log_log_slope(&xs, &ys) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn trend_sign() {
        let rising: Vec<TrendLevel> = (0..4)
            .map(|i| TrendLevel {
                score: i as f64,
                successes: 100.0 + 50.0 * i as f64,
                trials: 400.0,
            })
            .collect();
        assert!(cochran_armitage_z(&rising) > 5.0);
        assert!(decreasing_trend_p(&rising) > 0.99);
    }

    #[test]
    fn mcnemar_values() {
        // all 10 discordant pairs favour the first condition: 2^-10
        assert!((mcnemar_one_sided(10, 0) - 1.0 / 1024.0).abs() < 1e-12);
        assert_eq!(mcnemar_one_sided(0, 0), 1.0);
        assert!(mcnemar_one_sided(3, 3) > 0.5);
    }

    #[test]
    fn binomial_window() {
        assert!(within_binomial(2000, 10_000, 0.2, 3.0));
        assert!(!within_binomial(2300, 10_000, 0.2, 3.0));
    }
}
