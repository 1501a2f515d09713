//! Statistical comparison of two photocurrent sample sets.

use super::{run_with_base, sample_moments, PhotocurrentSample, SchemeConfig};
use crate::error::{invalid, Result};
use crate::stats::{ks_two_sample, KsResult};
use serde::Serialize;
use std::path::Path;

/// Comparison of one marginal (`z1` or `z2`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarginalTest {
    pub ks: KsResult,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_delta: f64,
    /// Standard error of the mean difference.
    pub mean_delta_se: f64,
    pub var_a: f64,
    pub var_b: f64,
    /// `var_b / var_a`.
    pub variance_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub label_a: String,
    pub label_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub z1: MarginalTest,
    pub z2: MarginalTest,
    pub cov_a: [[f64; 2]; 2],
    pub cov_b: [[f64; 2]; 2],
    pub significance: f64,
    /// Both KS p-values above the significance level.
    pub equivalent: bool,
}

/// KS tests on both marginals plus moment deltas.
pub fn compare_samples(
    a: &[PhotocurrentSample],
    b: &[PhotocurrentSample],
    significance: f64,
) -> Result<EquivalenceReport> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(invalid("significance must lie in (0, 1)"));
    }
    let ma = sample_moments(a)?;
    let mb = sample_moments(b)?;
    let marginal = |axis: usize| -> Result<MarginalTest> {
        let xa: Vec<f64> = a.iter().map(|s| if axis == 0 { s.z1 } else { s.z2 }).collect();
        let xb: Vec<f64> = b.iter().map(|s| if axis == 0 { s.z1 } else { s.z2 }).collect();
        let (va, vb) = (ma.cov[axis][axis], mb.cov[axis][axis]);
        Ok(MarginalTest {
            ks: ks_two_sample(&xa, &xb)?,
            mean_a: ma.mean[axis],
            mean_b: mb.mean[axis],
            mean_delta: mb.mean[axis] - ma.mean[axis],
            mean_delta_se: (va / ma.n as f64 + vb / mb.n as f64).sqrt(),
            var_a: va,
            var_b: vb,
            variance_ratio: vb / va,
        })
    };
    let z1 = marginal(0)?;
    let z2 = marginal(1)?;
    Ok(EquivalenceReport {
        label_a: "a".into(),
        label_b: "b".into(),
        n_a: a.len(),
        n_b: b.len(),
        equivalent: z1.ks.p_value > significance && z2.ks.p_value > significance,
        z1,
        z2,
        cov_a: ma.cov,
        cov_b: mb.cov,
        significance,
    })
}

/// Run two schemes with matched signal, idler and efficiency and compare.
pub fn equivalence_report(
    a: &SchemeConfig,
    b: &SchemeConfig,
    significance: f64,
    base: Option<&Path>,
) -> Result<EquivalenceReport> {
    if a.signal != b.signal {
        return Err(invalid("configs differ in signal state"));
    }
    if a.idler != b.idler {
        return Err(invalid("configs differ in idler state"));
    }
    if a.eta != b.eta {
        return Err(invalid(format!("configs differ in efficiency ({} vs {})", a.eta, b.eta)));
    }
    let sa = run_with_base(a, base)?;
    let sb = run_with_base(b, base)?;
    let mut r = compare_samples(&sa, &sb, significance)?;
    r.label_a = a.scheme.to_string();
    r.label_b = b.scheme.to_string();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::schemes::{SchemeKind, StateSpec};

    #[test]
    fn self_comparison_passes() {
        let cfg = SchemeConfig::new(SchemeKind::SixPort)
            .with_signal(StateSpec::coherent(c64(1.0, -0.3)))
            .with_samples(20_000);
        let r = equivalence_report(&cfg, &cfg.clone().with_seed(1), 0.01, None).unwrap();
        assert!(r.equivalent, "{r:?}");
    }

    #[test]
    fn mismatched_efficiency_is_rejected() {
        let a = SchemeConfig::new(SchemeKind::EightPort);
        let b = SchemeConfig::new(SchemeKind::SixPort).with_eta(0.5);
        assert!(equivalence_report(&a, &b, 0.01, None).is_err());
    }

    #[test]
    fn efficiency_doubles_variance() {
        let a = SchemeConfig::new(SchemeKind::EightPort).with_samples(100_000);
        let b = a.clone().with_eta(0.5).with_seed(3);
        let r = compare_samples(&super::super::run(&a).unwrap(), &super::super::run(&b).unwrap(), 0.01)
            .unwrap();
        for m in [r.z1, r.z2] {
            assert!(m.mean_delta.abs() < 4.0 * m.mean_delta_se);
            assert!((m.variance_ratio - 2.0).abs() < 0.1);
        }
        assert!(!r.equivalent);
    }
}
