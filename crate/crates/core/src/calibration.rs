//! Summary statistics used to judge calibration and discrimination.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test of `samples` against `cdf`.
///
/// The p-value uses the Kolmogorov limit distribution with Stephens'
/// finite-sample scaling `(√n + 0.12 + 0.11/√n) D`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let en = n.sqrt();
    KsResult { statistic: d, p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d) }
}

/// `P(K > λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2 j² λ²}`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Area under the ROC curve for "larger score means positive", counting
/// ties as one half (the Mann-Whitney form).
pub fn auc(positive: &[f64], negative: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &p in positive {
        for &q in negative {
            wins += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (positive.len() * negative.len()) as f64
}

/// ROC points `(threshold, false positive rate, true positive rate)` for the
/// rule "flag if score ≥ threshold", from the strictest threshold down.
pub fn roc_curve(positive: &[f64], negative: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut thresholds: Vec<f64> = positive.iter().chain(negative).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let rate = |xs: &[f64], t: f64| xs.iter().filter(|&&x| x >= t).count() as f64 / xs.len() as f64;
    let mut out = vec![(f64::INFINITY, 0.0, 0.0)];
    out.extend(thresholds.into_iter().map(|t| (t, rate(negative, t), rate(positive, t))));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ intercept + slope · x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    LinearFit { slope, intercept: my - slope * mx, r_squared: sxy * sxy / (sxx * syy) }
}

/// Empirical `(sorted sample, theoretical quantile)` pairs at plotting
/// positions `(i + 0.5)/n`.
pub fn qq_pairs(samples: &[f64], quantile: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter().enumerate().map(|(i, &v)| (v, quantile((i as f64 + 0.5) / n))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_values() {
        // P(K > 1.3581) ≈ 0.05, P(K > 1.6276) ≈ 0.01
        assert!((kolmogorov_sf(1.358099) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.627624) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_on_uniform_grid_accepts() {
        let xs: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
        let r = ks_test(&xs, |x| x);
        assert!((r.statistic - 0.0025).abs() < 1e-12);
        assert!(r.p_value > 0.99);
        let shifted: Vec<f64> = xs.iter().map(|x| x * 0.5).collect();
        assert!(ks_test(&shifted, |x| x.clamp(0.0, 1.0)).p_value < 1e-6);
    }

    #[test]
    fn auc_and_roc() {
        assert_eq!(auc(&[3.0, 4.0], &[1.0, 2.0]), 1.0);
        assert_eq!(auc(&[1.0], &[1.0]), 0.5);
        assert_eq!(auc(&[1.0, 4.0], &[2.0, 3.0]), 0.5);
        let roc = roc_curve(&[3.0, 4.0], &[1.0, 2.0]);
        assert_eq!(roc.last().unwrap().1, 1.0);
        assert_eq!(roc.last().unwrap().2, 1.0);
        assert_eq!(roc[2], (3.0, 0.0, 1.0));
    }

    #[test]
    fn exact_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }
}
