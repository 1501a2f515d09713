//! Sample moments and two-sample tests.

use crate::error::{invalid, Result};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Mean and covariance of paired observations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments2 {
    pub n: usize,
    pub mean: [f64; 2],
    /// Unbiased sample covariance.
    pub cov: [[f64; 2]; 2],
}

impl Moments2 {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        // Welford update, stable for large offsets.
        let mut n = 0usize;
        let mut mean = [0.0; 2];
        let mut m2 = [[0.0; 2]; 2];
        for (x, y) in pairs {
            n += 1;
            let dx = x - mean[0];
            let dy = y - mean[1];
            mean[0] += dx / n as f64;
            mean[1] += dy / n as f64;
            let ex = x - mean[0];
            let ey = y - mean[1];
            m2[0][0] += dx * ex;
            m2[1][1] += dy * ey;
            m2[0][1] += dx * ey;
        }
        if n < 2 {
            return Err(invalid("moments need at least two samples"));
        }
        let d = (n - 1) as f64;
        let c01 = m2[0][1] / d;
        Ok(Self {
            n,
            mean,
            cov: [[m2[0][0] / d, c01], [c01, m2[1][1] / d]],
        })
    }

    /// Standard error of each mean.
    pub fn std_err(&self) -> [f64; 2] {
        [
            (self.cov[0][0] / self.n as f64).sqrt(),
            (self.cov[1][1] / self.n as f64).sqrt(),
        ]
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Result of a two-sample Kolmogorov–Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (−1)^{j−1} e^{−2j²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS test with the asymptotic p-value
/// `Q((√nₑ + 0.12 + 0.11/√nₑ) D)`, `nₑ = n₁n₂/(n₁+n₂)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("KS test needs two nonempty samples"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(invalid("KS test samples must be finite"));
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (n1, n2) = (xa.len(), xb.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x = xa[i].min(xb[j]);
        // Step past every tie at x in both samples before comparing.
        while i < n1 && xa[i] <= x {
            i += 1;
        }
        while j < n2 && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
        n1,
        n2,
    })
}

/// Upper tail `P(X ≥ x)` of a χ² variable with `dof` degrees of freedom.
pub fn chi_square_sf(x: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(invalid("χ² needs at least one degree of freedom"));
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| invalid(e.to_string()))?;
    Ok(dist.sf(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photodet::rng_stream;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn moments_of_known_pairs() {
        let m = Moments2::from_pairs([(1.0, 2.0), (3.0, 6.0), (5.0, 10.0)]).unwrap();
        assert_eq!(m.mean, [3.0, 6.0]);
        assert_abs_diff_eq!(m.cov[0][0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cov[0][1], 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cov[1][1], 16.0, epsilon = 1e-12);
        assert!(Moments2::from_pairs([(0.0, 0.0)]).is_err());
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.0098 (classical critical values).
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);

        let mut rng = rng_stream(1, 0);
        let x: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_two_sample(&x, &y).unwrap().p_value > 0.001);
        let z: Vec<f64> = y.iter().map(|v: &f64| v + 0.3).collect();
        assert!(ks_two_sample(&x, &z).unwrap().p_value < 1e-10);
    }

    #[test]
    fn ks_handles_ties() {
        let a = vec![0.0; 50];
        let b = vec![0.0; 70];
        assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, 0.0);
        let c: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let d: Vec<f64> = (0..100).map(|i| (i % 4 == 0) as u8 as f64).collect();
        // P(0) = 0.5 vs 0.75.
        assert_abs_diff_eq!(ks_two_sample(&c, &d).unwrap().statistic, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn chi_square_tail() {
        assert_abs_diff_eq!(chi_square_sf(3.841459, 1).unwrap(), 0.05, epsilon = 1e-6);
        assert_abs_diff_eq!(chi_square_sf(0.0, 3).unwrap(), 1.0, epsilon = 1e-12);
    }
}
