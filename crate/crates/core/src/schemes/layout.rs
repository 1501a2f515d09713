//! Port assignments, detector weights and rescaling of each scheme.

use super::SchemeKind;
use crate::error::{invalid, Result};
use crate::linopt::{eightport_matrix, triple_coupler_matrix};
use crate::{c64, CMatrix, Complex64};
use std::f64::consts::FRAC_PI_3;

/// Network feeding the detectors and the linear combination of counts that
/// forms the complex photocurrent `z1 + i z2 = Σ_k w_k n_k / (η · scale)`.
#[derive(Clone, Debug)]
pub struct Layout {
    pub kind: SchemeKind,
    /// Detector modes × network inputs.
    pub network: CMatrix,
    pub signal_port: usize,
    pub idler_port: usize,
    pub lo_port: usize,
    /// Amplitude factor applied to signal and idler before the network.
    pub signal_gain: f64,
    /// Amplitude factor applied to the local oscillator before the network.
    pub lo_gain: f64,
    pub weights: Vec<Complex64>,
    /// Rescale without the efficiency factor.
    pub scale: f64,
}

impl Layout {
    pub fn detectors(&self) -> usize {
        self.network.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.network.ncols()
    }

    /// Network inputs that carry vacuum.
    pub fn vacuum_ports(&self) -> Vec<usize> {
        (0..self.inputs())
            .filter(|&p| p != self.signal_port && p != self.idler_port && p != self.lo_port)
            .collect()
    }

    /// `(z1, z2)` from raw counts.
    pub fn photocurrent(&self, counts: &[u64], eta: f64) -> (f64, f64) {
        let z: Complex64 = counts
            .iter()
            .zip(&self.weights)
            .map(|(&n, w)| w * n as f64)
            .sum::<Complex64>()
            / (eta * self.scale);
        (z.re, z.im)
    }
}

/// Signal 0, vacuum 1, idler 2, local oscillator 3 on the 4-point Fourier
/// coupler; `z1 = (n1 − n3)/(η|z|)`, `z2 = (n4 − n2)/(η|z|)` with detectors
/// numbered from 1.
pub fn eightport(lo_amplitude: f64) -> Layout {
    Layout {
        kind: SchemeKind::EightPort,
        network: eightport_matrix().matrix().clone(),
        signal_port: 0,
        idler_port: 2,
        lo_port: 3,
        signal_gain: 1.0,
        lo_gain: 1.0,
        weights: vec![c64(1.0, 0.0), c64(0.0, -1.0), c64(-1.0, 0.0), c64(0.0, 1.0)],
        scale: lo_amplitude,
    }
}

/// Signal 0, local oscillator 1, idler 2 on the symmetric triple coupler.
///
/// `z1 + i z2 = Σ_n I_n e^{iθ_n} / (η|z|) = √3 ℐ₃/(η|z|)`, so
/// `z1 = √3(ℐ₂ + ℐ₃)/(2η|z|)` and `z2 = √3(ℐ₃ − ℐ₂)/(2iη|z|)`.
pub fn sixport(lo_amplitude: f64) -> Layout {
    let weights = (0..3)
        .map(|n| Complex64::from_polar(1.0, 2.0 * FRAC_PI_3 * n as f64))
        .collect();
    Layout {
        kind: SchemeKind::SixPort,
        network: triple_coupler_matrix().matrix().clone(),
        signal_port: 0,
        idler_port: 2,
        lo_port: 1,
        signal_gain: 1.0,
        lo_gain: 1.0,
        weights,
        scale: lo_amplitude,
    }
}

/// Single detector behind a beam splitter of transmissivity
/// `τ = 1 − (k/|z|)²`, read out in four time bins.
///
/// The detected field has frequency components `ω₀` (local oscillator),
/// `ω` (signal), `2ω − ω₀` (empty) and `2ω₀ − ω` (image, the idler). The
/// time bins are their 4-point Fourier transform and the current at the
/// intermediate frequency is `Σ_j i^j n_j`, rescaled by `|z| η √(τ(1−τ))`.
pub fn heterodyne(lo_amplitude: f64, mixing: f64) -> Result<Layout> {
    let tau = heterodyne_tau(lo_amplitude, mixing)?;
    let powers = [c64(1.0, 0.0), c64(0.0, -1.0), c64(-1.0, 0.0), c64(0.0, 1.0)];
    let network = CMatrix::from_fn(4, 4, |j, f| powers[(j * f) % 4] * 0.5);
    Ok(Layout {
        kind: SchemeKind::Heterodyne,
        network,
        signal_port: 1,
        idler_port: 3,
        lo_port: 0,
        signal_gain: tau.sqrt(),
        lo_gain: (1.0 - tau).sqrt(),
        weights: vec![c64(1.0, 0.0), c64(0.0, 1.0), c64(-1.0, 0.0), c64(0.0, -1.0)],
        scale: lo_amplitude * (tau * (1.0 - tau)).sqrt(),
    })
}

/// `τ = 1 − (k/|z|)²`; requires `0 < k < |z|`.
pub fn heterodyne_tau(lo_amplitude: f64, mixing: f64) -> Result<f64> {
    if !(mixing > 0.0) {
        return Err(invalid(format!("heterodyne mixing k = {mixing} must be positive")));
    }
    if mixing >= lo_amplitude {
        return Err(invalid(format!(
            "heterodyne mixing k = {mixing} must be below |z| = {lo_amplitude} (τ would be ≤ 0)"
        )));
    }
    Ok(1.0 - (mixing / lo_amplitude).powi(2))
}

pub fn layout(kind: SchemeKind, lo_amplitude: f64, mixing: f64) -> Result<Layout> {
    if !(lo_amplitude > 0.0 && lo_amplitude.is_finite()) {
        return Err(invalid(format!("LO amplitude {lo_amplitude} must be positive")));
    }
    match kind {
        SchemeKind::EightPort => Ok(eightport(lo_amplitude)),
        SchemeKind::SixPort => Ok(sixport(lo_amplitude)),
        SchemeKind::Heterodyne => heterodyne(lo_amplitude, mixing),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sixport_fourier_examples() {
        let l = sixport(1.0);
        let (z1, z2) = l.photocurrent(&[1, 1, 1], 1.0);
        assert_abs_diff_eq!(z1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z2, 0.0, epsilon = 1e-15);
        // Counts (3, 0, 0): every ℐ_s = 3/√3 = √3, so z1 = √3·√3 = 3.
        let (z1, z2) = l.photocurrent(&[3, 0, 0], 1.0);
        assert_abs_diff_eq!(z1, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z2, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn eightport_pairs() {
        let l = eightport(2.0);
        let (z1, z2) = l.photocurrent(&[5, 1, 3, 4], 0.5);
        assert_abs_diff_eq!(z1, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z2, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn heterodyne_rejects_large_mixing() {
        assert!(heterodyne(10.0, 10.0).is_err());
        assert!(heterodyne(10.0, 0.0).is_err());
        let l = heterodyne(100.0, 10.0).unwrap();
        assert_abs_diff_eq!(l.signal_gain.powi(2), 0.99, epsilon = 1e-14);
        assert_abs_diff_eq!(l.lo_gain * 100.0, 10.0, epsilon = 1e-12);
    }
}
