//! Leading-order photocurrent operators.
//!
//! With the efficiency written as a beam splitter, detector `k` sees
//! `B_k = Σ_l F_kl a_l` with `F = [√η E | √(1−η) I]`: the network inputs
//! followed by one vacuum loss mode per detector. Replacing the local
//! oscillator by its amplitude `z` and keeping the terms linear in `z`,
//!
//! `Z = Σ_k w_k B_k†B_k / (η·scale) ≈ Σ_l x_l a_l + y_l a_l†`,
//!
//! with `x_l = Σ_k w_k F̄_{k,lo} F_kl e^{−iθ} / (η s)` and
//! `y_l = Σ_k w_k F_{k,lo} F̄_kl e^{iθ} / (η s)`, `s = scale/|z|`. The
//! heterodyne coefficients are taken in the limit `τ → 1` at fixed
//! `|z|√(1−τ)`.
//!
//! All vacuum inputs are then regrouped into two modes: `u₁ ∝ Σ p_j v_j`
//! collects the annihilation parts and `u₂ ∝ Σ q̄_j v_j` the creation parts.
//! This gives every scheme the same canonical space
//! `signal ⊗ idler ⊗ u₁ ⊗ u₂`.

use super::layout::{self, Layout};
use super::SchemeKind;
use crate::error::{invalid, Result};
use crate::fock::{annihilation, ModeOperator};
use crate::{c64, CMatrix, Complex64};
use serde::Serialize;

/// Linear coefficients over the extended inputs (network ports, then one
/// loss mode per detector).
#[derive(Clone, Debug)]
pub struct LeadingOrder {
    pub kind: SchemeKind,
    pub eta: f64,
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub signal_port: usize,
    pub idler_port: usize,
    pub lo_port: usize,
    /// Network inputs plus loss modes that carry vacuum.
    pub vacuum_ports: Vec<usize>,
    /// `|Σ_k w_k |F_{k,lo}|²|`: the `|z|`-proportional offset, which must vanish.
    pub offset: f64,
}

fn asymptotic_layout(kind: SchemeKind) -> Layout {
    match kind {
        SchemeKind::EightPort => layout::eightport(1.0),
        SchemeKind::SixPort => layout::sixport(1.0),
        SchemeKind::Heterodyne => {
            let mut l = layout::heterodyne(2.0, 1.0).expect("valid mixing");
            l.signal_gain = 1.0;
            l.lo_gain = 1.0;
            l.scale = 1.0;
            l
        }
    }
}

/// Coefficients of `Z` at local-oscillator phase `lo_phase`.
pub fn leading_order(kind: SchemeKind, eta: f64, lo_phase: f64) -> Result<LeadingOrder> {
    crate::photodet::Efficiency::new(eta)?;
    let l = asymptotic_layout(kind);
    let kdet = l.detectors();
    let nin = l.inputs();
    let se = eta.sqrt();
    let sl = (1.0 - eta).sqrt();
    let f = CMatrix::from_fn(kdet, nin + kdet, |k, j| {
        if j < nin {
            l.network[(k, j)] * se
        } else if j - nin == k {
            c64(sl, 0.0)
        } else {
            c64(0.0, 0.0)
        }
    });
    let rot = Complex64::from_polar(1.0, -lo_phase);
    let norm = eta * l.scale;
    let lo = l.lo_port;
    let x: Vec<Complex64> = (0..nin + kdet)
        .map(|j| (0..kdet).map(|k| l.weights[k] * f[(k, lo)].conj() * f[(k, j)]).sum::<Complex64>() * rot / norm)
        .collect();
    let y: Vec<Complex64> = (0..nin + kdet)
        .map(|j| (0..kdet).map(|k| l.weights[k] * f[(k, lo)] * f[(k, j)].conj()).sum::<Complex64>() * rot.conj() / norm)
        .collect();
    let offset = (0..kdet)
        .map(|k| l.weights[k] * f[(k, lo)].norm_sqr())
        .sum::<Complex64>()
        .norm();
    let mut vacuum_ports = l.vacuum_ports();
    vacuum_ports.extend(nin..nin + kdet);
    Ok(LeadingOrder {
        kind,
        eta,
        x,
        y,
        signal_port: l.signal_port,
        idler_port: l.idler_port,
        lo_port: lo,
        vacuum_ports,
        offset,
    })
}

/// `Z = xs·a + ys·a† + xi·b + yi·b† + Σ_{u₁,u₂} (x·u + y·u†)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CanonicalForm {
    pub signal: [Complex64; 2],
    pub idler: [Complex64; 2],
    pub u1: [Complex64; 2],
    pub u2: [Complex64; 2],
    /// Coefficient magnitude left on the local-oscillator fluctuation.
    pub lo_residual: f64,
    /// `|Σ p_j q_j| / (‖p‖‖q‖)`; `u₁` and `u₂` commute only if this is zero.
    pub orthogonality_residual: f64,
    /// Norm of vacuum coefficients not captured by `u₁`, `u₂`.
    pub remainder: f64,
}

impl CanonicalForm {
    pub fn has_noise(&self) -> bool {
        self.u1.iter().chain(&self.u2).any(|c| c.norm() > 1e-14)
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn canonical_form(lead: &LeadingOrder) -> CanonicalForm {
    let p: Vec<Complex64> = lead.vacuum_ports.iter().map(|&j| lead.x[j]).collect();
    let q: Vec<Complex64> = lead.vacuum_ports.iter().map(|&j| lead.y[j]).collect();
    let (np, nq) = (norm(&p), norm(&q));
    let zero = c64(0.0, 0.0);
    let (pu, qu): (Vec<Complex64>, Vec<Complex64>) = (
        p.iter().map(|c| if np > 0.0 { c / np } else { zero }).collect(),
        q.iter().map(|c| if nq > 0.0 { c.conj() / nq } else { zero }).collect(),
    );
    let proj = |coef: &[Complex64], basis: &[Complex64], creation: bool| -> Complex64 {
        coef.iter()
            .zip(basis)
            .map(|(c, b)| if creation { c * b } else { c * b.conj() })
            .sum()
    };
    let u1 = [proj(&p, &pu, false), proj(&q, &pu, true)];
    let u2 = [proj(&p, &qu, false), proj(&q, &qu, true)];
    let captured = u1.iter().chain(&u2).map(|c| c.norm_sqr()).sum::<f64>();
    let remainder = (np * np + nq * nq - captured).max(0.0).sqrt();
    let pq: Complex64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
    let orthogonality_residual = if np > 0.0 && nq > 0.0 {
        pq.norm() / (np * nq)
    } else {
        0.0
    };
    CanonicalForm {
        signal: [lead.x[lead.signal_port], lead.y[lead.signal_port]],
        idler: [lead.x[lead.idler_port], lead.y[lead.idler_port]],
        u1,
        u2,
        lo_residual: lead.x[lead.lo_port].norm() + lead.y[lead.lo_port].norm() + lead.offset,
        orthogonality_residual,
        remainder,
    }
}

/// Cutoffs of the canonical space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OperatorCutoffs {
    pub signal: usize,
    pub idler: usize,
    pub noise: usize,
}

impl Default for OperatorCutoffs {
    fn default() -> Self {
        Self {
            signal: 8,
            idler: 8,
            noise: 4,
        }
    }
}

/// `Z1 = (Z + Z†)/2` and `Z2 = (Z − Z†)/2i` on `signal ⊗ idler` (η = 1) or
/// `signal ⊗ idler ⊗ u₁ ⊗ u₂` (η < 1).
#[derive(Clone, Debug)]
pub struct PhotocurrentOperators {
    pub kind: SchemeKind,
    pub eta: f64,
    pub z1: ModeOperator,
    pub z2: ModeOperator,
    pub form: CanonicalForm,
}

impl PhotocurrentOperators {
    /// `Z1 + i Z2`.
    pub fn complex(&self) -> Result<ModeOperator> {
        self.z1.add(&self.z2.scale(c64(0.0, 1.0)))
    }
}

pub fn photocurrent_operators(
    kind: SchemeKind,
    eta: f64,
    cutoffs: OperatorCutoffs,
) -> Result<PhotocurrentOperators> {
    let lead = leading_order(kind, eta, 0.0)?;
    let form = canonical_form(&lead);
    let mut cut = vec![cutoffs.signal, cutoffs.idler];
    let mut terms = vec![form.signal, form.idler];
    if eta < 1.0 {
        cut.extend([cutoffs.noise, cutoffs.noise]);
        terms.extend([form.u1, form.u2]);
    } else if form.has_noise() {
        return Err(invalid("noise coefficients at unit efficiency"));
    }
    let dim: usize = cut.iter().product();
    let mut z = CMatrix::zeros(dim, dim);
    for (mode, [xc, yc]) in terms.iter().enumerate() {
        let a = annihilation(cut[mode])?.embed(mode, &cut)?;
        z += a.matrix() * *xc + a.matrix().adjoint() * *yc;
    }
    let zd = z.adjoint();
    let z1 = (&z + &zd) * c64(0.5, 0.0);
    let z2 = (&z - &zd) * c64(0.0, -0.5);
    Ok(PhotocurrentOperators {
        kind,
        eta,
        z1: ModeOperator::new(cut.clone(), z1)?,
        z2: ModeOperator::new(cut, z2)?,
        form,
    })
}
