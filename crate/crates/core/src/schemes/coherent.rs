//! Poisson backend for coherent inputs.

use super::{chunked, InputState, Layout, PhotocurrentSample, SchemeConfig};
use crate::error::{invalid, Result};
use crate::photodet::poisson_draw;
use crate::Complex64;
use serde::Serialize;

/// Mean count `η|b_k|²` of every detector for coherent signal `a` and idler `c`.
pub fn detector_means(layout: &Layout, cfg: &SchemeConfig, a: Complex64, c: Complex64) -> Vec<f64> {
    let mut inputs = vec![Complex64::new(0.0, 0.0); layout.inputs()];
    inputs[layout.signal_port] = a * layout.signal_gain;
    inputs[layout.idler_port] = c * layout.signal_gain;
    inputs[layout.lo_port] = cfg.lo() * layout.lo_gain;
    (0..layout.detectors())
        .map(|k| {
            let b: Complex64 = (0..layout.inputs())
                .map(|l| layout.network[(k, l)] * inputs[l])
                .sum();
            cfg.eta * b.norm_sqr()
        })
        .collect()
}

pub(super) fn sample(
    layout: &Layout,
    cfg: &SchemeConfig,
    a: Complex64,
    c: Complex64,
) -> Vec<PhotocurrentSample> {
    let means = detector_means(layout, cfg, a, c);
    let threshold = cfg.normal_threshold;
    chunked(cfg.seed, cfg.sample_count, |rng| {
        let counts: Vec<u64> = means.iter().map(|&m| poisson_draw(m, threshold, rng)).collect();
        let (z1, z2) = layout.photocurrent(&counts, cfg.eta);
        PhotocurrentSample { counts, z1, z2 }
    })
}

/// Exact mean and covariance of `(z1, z2)` under independent Poisson counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExactMoments {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

/// Moments of the sampled currents for a coherent configuration.
pub fn exact_moments(cfg: &SchemeConfig) -> Result<ExactMoments> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let (InputState::Coherent(a), InputState::Coherent(c)) =
        (cfg.signal.resolve(None)?, cfg.idler.resolve(None)?)
    else {
        return Err(invalid("exact moments need coherent inputs"));
    };
    let means = detector_means(&layout, cfg, a, c);
    let d = cfg.eta * layout.scale;
    let mut mean = [0.0; 2];
    let mut cov = [[0.0; 2]; 2];
    for (m, w) in means.iter().zip(&layout.weights) {
        mean[0] += w.re * m / d;
        mean[1] += w.im * m / d;
        cov[0][0] += w.re * w.re * m / (d * d);
        cov[1][1] += w.im * w.im * m / (d * d);
        cov[0][1] += w.re * w.im * m / (d * d);
    }
    cov[1][0] = cov[0][1];
    Ok(ExactMoments { mean, cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::schemes::{SchemeKind, StateSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_means_equal_signal() {
        let alpha = c64(1.0, 0.5);
        for kind in SchemeKind::ALL {
            let cfg = SchemeConfig::new(kind).with_signal(StateSpec::coherent(alpha)).with_lo(1e3);
            let m = exact_moments(&cfg).unwrap();
            assert_abs_diff_eq!(m.mean[0], 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(m.mean[1], 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn exact_idler_enters_conjugated() {
        let beta = c64(0.3, 0.7);
        for kind in SchemeKind::ALL {
            let cfg = SchemeConfig::new(kind).with_idler(StateSpec::coherent(beta));
            let m = exact_moments(&cfg).unwrap();
            assert_abs_diff_eq!(m.mean[0], 0.3, epsilon = 1e-9);
            assert_abs_diff_eq!(m.mean[1], -0.7, epsilon = 1e-9);
        }
    }

    #[test]
    fn eightport_exact_variance() {
        let alpha = c64(1.0, 0.5);
        let z = 100.0;
        let cfg = SchemeConfig::new(SchemeKind::EightPort)
            .with_signal(StateSpec::coherent(alpha))
            .with_lo(z)
            .with_eta(0.8);
        let m = exact_moments(&cfg).unwrap();
        let expect = 1.0 / (2.0 * 0.8) + alpha.norm_sqr() / (2.0 * 0.8 * z * z);
        assert_abs_diff_eq!(m.cov[0][0], expect, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cov[1][1], expect, epsilon = 1e-12);
    }
}
