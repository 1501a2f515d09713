//! Characteristic functions, Wigner functions and propensities on a grid.
//!
//! Conventions, in one place:
//! - `χ(γ) = Tr ρ D(γ)`, `D(γ) = exp(γa† − γ̄a)`.
//! - `W(α) = π⁻² ∫ d²γ e^{αγ̄ − ᾱγ} χ(γ)`, so `∫ W d²α = 1` and `W_vac(0) = 2/π`.
//! - For `Z = a + b†`, `Ξ(γ) = χ_a(γ) χ_b(−γ̄) e^{−(1−η)|γ|²/η}` and the
//!   propensity `K` is its transform with the same kernel; `∫ K d²α = 1`.
//!   A coherent signal `α₀` and coherent probe `β` give a Gaussian centred on
//!   `α₀ + β̄`, the mean of the sampled `z1 + i z2`.
//!
//! A grid with half extent `L` and `N` points per axis (`N` a power of two)
//! samples `α = x + iy` at `x_j = −L + j·2L/N`, `j = 0..N`. Its dual grid,
//! where `χ` and `Ξ` live, samples `γ = u + iv` at `u_a = (a − N/2)·π/(2L)`.

use crate::error::{invalid, Result};
use crate::fock::DensityOperator;
use crate::photodet::Efficiency;
use crate::schemes::PhotocurrentSample;
use crate::stats::chi_square_sf;
use crate::{c64, Complex64};
use log::warn;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;

/// Geometry of a square phase-space grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub half_extent: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(half_extent: f64, points: usize) -> Result<Self> {
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(invalid(format!("half extent {half_extent} must be positive")));
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(invalid(format!("points per axis {points} must be a power of two ≥ 4")));
        }
        Ok(Self { half_extent, points })
    }

    /// `L = max(6, |centroid| + 5)`, 256 points.
    pub fn default_for(centroid: Complex64) -> Self {
        Self {
            half_extent: (centroid.norm() + 5.0).max(6.0),
            points: 256,
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.points as f64
    }

    pub fn coord(&self, j: usize) -> f64 {
        -self.half_extent + j as f64 * self.spacing()
    }

    pub fn dual_spacing(&self) -> f64 {
        PI / (2.0 * self.half_extent)
    }

    pub fn dual_coord(&self, a: usize) -> f64 {
        (a as f64 - (self.points / 2) as f64) * self.dual_spacing()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Values on the dual grid.
    Characteristic,
    Wigner,
    Propensity,
    /// Histogram density; cell `(j, l)` covers `[x_j, x_{j+1}) × [y_l, y_{l+1})`.
    Empirical,
}

/// Values on a grid, row-major with the row index along `Re` and the column
/// index along `Im`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceGrid {
    pub spec: GridSpec,
    pub kind: GridKind,
    pub values: Vec<Complex64>,
    /// Empirical grids: fraction of samples outside the extent.
    pub outside_fraction: f64,
}

impl PhaseSpaceGrid {
    pub fn value(&self, j: usize, l: usize) -> Complex64 {
        self.values[j * self.spec.points + l]
    }

    pub fn real(&self, j: usize, l: usize) -> f64 {
        self.value(j, l).re
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.im.abs()))
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, v| a.min(v.re))
    }

    pub fn max_real(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |a, v| a.max(v.re))
    }

    /// Value at the grid point nearest to `α`.
    pub fn at(&self, alpha: Complex64) -> f64 {
        let n = self.spec.points;
        let idx = |x: f64| {
            (((x + self.spec.half_extent) / self.spec.spacing()).round() as isize).clamp(0, n as isize - 1)
                as usize
        };
        self.real(idx(alpha.re), idx(alpha.im))
    }

    /// Trapezoid weights along one axis (½ on the first and last point).
    fn weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.spec.points {
            0.5
        } else {
            1.0
        }
    }

    /// `∫ f d²α` (trapezoid; a plain cell sum for empirical grids).
    pub fn integral(&self) -> f64 {
        let n = self.spec.points;
        let d2 = self.spec.spacing().powi(2);
        let mut s = 0.0;
        for j in 0..n {
            for l in 0..n {
                let w = if self.kind == GridKind::Empirical {
                    1.0
                } else {
                    self.weight(j) * self.weight(l)
                };
                s += w * self.real(j, l);
            }
        }
        s * d2
    }

    /// Normalized mean and covariance `[[xx, xy], [xy, yy]]` of the grid
    /// as a distribution (cell centres for empirical grids).
    pub fn moments(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let n = self.spec.points;
        let half = if self.kind == GridKind::Empirical { 0.5 * self.spec.spacing() } else { 0.0 };
        let mut m0 = 0.0;
        let mut m1 = [0.0; 2];
        let mut m2 = [[0.0; 2]; 2];
        for j in 0..n {
            let x = self.spec.coord(j) + half;
            for l in 0..n {
                let y = self.spec.coord(l) + half;
                let f = self.real(j, l);
                m0 += f;
                m1[0] += f * x;
                m1[1] += f * y;
                m2[0][0] += f * x * x;
                m2[1][1] += f * y * y;
                m2[0][1] += f * x * y;
            }
        }
        let mean = [m1[0] / m0, m1[1] / m0];
        let c01 = m2[0][1] / m0 - mean[0] * mean[1];
        (
            mean,
            [
                [m2[0][0] / m0 - mean[0] * mean[0], c01],
                [c01, m2[1][1] / m0 - mean[1] * mean[1]],
            ],
        )
    }

    /// Probability of each `factor × factor` block of cells, row-major over
    /// `N/factor` blocks per axis. Analytic grids integrate each block by the
    /// trapezoid rule on its `(factor+1)²` corner-inclusive points (the point
    /// past the last row wraps to the first, where the grid is negligible);
    /// empirical grids sum their cells. Negative values are clamped to zero.
    pub fn block_probabilities(&self, factor: usize) -> Result<Vec<f64>> {
        let n = self.spec.points;
        if factor == 0 || !n.is_multiple_of(factor) {
            return Err(invalid(format!("block factor {factor} must divide {n}")));
        }
        let nb = n / factor;
        let d2 = self.spec.spacing().powi(2);
        let mut out = vec![0.0; nb * nb];
        for bj in 0..nb {
            for bl in 0..nb {
                let mut s = 0.0;
                if self.kind == GridKind::Empirical {
                    for j in bj * factor..(bj + 1) * factor {
                        for l in bl * factor..(bl + 1) * factor {
                            s += self.real(j, l);
                        }
                    }
                } else {
                    for dj in 0..=factor {
                        let wj = if dj == 0 || dj == factor { 0.5 } else { 1.0 };
                        let j = (bj * factor + dj) % n;
                        for dl in 0..=factor {
                            let wl = if dl == 0 || dl == factor { 0.5 } else { 1.0 };
                            let l = (bl * factor + dl) % n;
                            s += wj * wl * self.real(j, l).max(0.0);
                        }
                    }
                }
                out[bj * nb + bl] = s * d2;
            }
        }
        Ok(out)
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// `Tr ρ D(γ)` from the closed-form displacement elements.
fn chi_at(rho: &DensityOperator, gamma: Complex64, lnf: &[f64]) -> Complex64 {
    let c = rho.dim();
    let x = gamma.norm_sqr();
    let r = gamma.norm();
    let ln_r = if r > 0.0 { r.ln() } else { f64::NEG_INFINITY };
    let m = rho.matrix();
    let mut sum = c64(0.0, 0.0);
    for k in 0..c {
        // L_j^{(k)}(x) for j = 0..c−k by upward recurrence.
        let kf = k as f64;
        let mut lag = Vec::with_capacity(c - k);
        for j in 0..c - k {
            let v = match j {
                0 => 1.0,
                1 => 1.0 + kf - x,
                _ => {
                    let jf = (j - 1) as f64;
                    ((2.0 * jf + 1.0 + kf - x) * lag[j - 1] - (jf + kf) * lag[j - 2]) / (jf + 1.0)
                }
            };
            lag.push(v);
        }
        if k > 0 && r == 0.0 {
            continue;
        }
        let ln_rk = if k > 0 { kf * ln_r } else { 0.0 };
        // ⟨lo+k|D|lo⟩ carries γ^k, ⟨lo|D|lo+k⟩ carries (−γ̄)^k.
        let up = Complex64::from_polar(1.0, kf * gamma.arg());
        let down = Complex64::from_polar(1.0, kf * (-gamma.conj()).arg());
        for (lo, &l) in lag.iter().enumerate() {
            let hi = lo + k;
            let ln_pref = 0.5 * (lnf[lo] - lnf[hi]) - 0.5 * x + ln_rk;
            if ln_pref < -700.0 || l == 0.0 {
                continue;
            }
            let mag = ln_pref.exp() * l;
            // χ = Σ_{m,n} ρ_{nm} D_{mn}.
            sum += m[(lo, hi)] * up * mag;
            if k > 0 {
                sum += m[(hi, lo)] * down * mag;
            }
        }
    }
    sum
}

/// `χ(γ) = Tr ρ D(γ)` on the dual grid of `spec`.
pub fn characteristic_function(rho: &DensityOperator, spec: GridSpec) -> Result<PhaseSpaceGrid> {
    if rho.cutoffs().len() != 1 {
        return Err(invalid("characteristic function needs a single-mode state"));
    }
    let n = spec.points;
    let lnf = ln_factorials(rho.dim() + 1);
    let values: Vec<Complex64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            let u = spec.dual_coord(a);
            let lnf = &lnf;
            (0..n).map(move |b| chi_at(rho, c64(u, spec.dual_coord(b)), lnf))
        })
        .collect();
    let grid = PhaseSpaceGrid {
        spec,
        kind: GridKind::Characteristic,
        values,
        outside_fraction: 0.0,
    };
    let edge = (0..n)
        .map(|i| grid.value(0, i).norm().max(grid.value(i, 0).norm()))
        .fold(0.0, f64::max);
    if edge > 1e-4 {
        warn!("|χ| reaches {edge:.2e} on the dual-grid boundary; refine the grid");
    }
    Ok(grid)
}

/// `K(x_j, y_l) = (Δu²/π²) Σ_ab Ξ(u_a, v_b) e^{2i(y_l u_a − x_j v_b)}` via two
/// passes of 1-D FFTs.
fn transform(xi: &[Complex64], spec: GridSpec, kind: GridKind) -> PhaseSpaceGrid {
    let n = spec.points;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let sign = |i: usize| if i.is_multiple_of(2) { 1.0 } else { -1.0 };
    // h[a][j] = Σ_b Ξ[a][b] (−1)^{a+b} e^{−2πi bj/N}
    let mut h: Vec<Complex64> = xi
        .iter()
        .enumerate()
        .map(|(i, v)| v * sign(i / n + i % n))
        .collect();
    h.par_chunks_mut(n).for_each(|row| fwd.process(row));
    // Transpose so that a runs along rows for the second pass.
    let mut t = vec![c64(0.0, 0.0); n * n];
    for a in 0..n {
        for j in 0..n {
            t[j * n + a] = h[a * n + j];
        }
    }
    t.par_chunks_mut(n).for_each(|row| inv.process(row));
    let scale = (spec.dual_spacing() / PI).powi(2);
    let values = t
        .iter()
        .enumerate()
        .map(|(i, v)| v * (scale * sign(i / n + i % n)))
        .collect();
    PhaseSpaceGrid {
        spec,
        kind,
        values,
        outside_fraction: 0.0,
    }
}

/// Wigner function, normalized under `d²α`.
pub fn wigner_function(rho: &DensityOperator, spec: GridSpec) -> Result<PhaseSpaceGrid> {
    let chi = characteristic_function(rho, spec)?;
    Ok(transform(&chi.values, spec, GridKind::Wigner))
}

/// Probe-filtered, efficiency-smoothed output distribution of `Z = a + b†`.
pub fn propensity(
    signal: &DensityOperator,
    probe: &DensityOperator,
    spec: GridSpec,
    eta: f64,
) -> Result<PhaseSpaceGrid> {
    let eta = Efficiency::new(eta)?.value();
    let chi_a = characteristic_function(signal, spec)?;
    let chi_b = reflected_characteristic(probe, spec)?;
    let n = spec.points;
    let noise = (1.0 - eta) / eta;
    let xi: Vec<Complex64> = (0..n * n)
        .map(|i| {
            let v = chi_a.values[i] * chi_b[i];
            if eta == 1.0 {
                v
            } else {
                let g = c64(spec.dual_coord(i / n), spec.dual_coord(i % n));
                v * (-noise * g.norm_sqr()).exp()
            }
        })
        .collect();
    let grid = transform(&xi, spec, GridKind::Propensity);
    let (imag, min) = (grid.max_imag(), grid.min_real());
    if imag > 1e-9 {
        warn!("propensity has imaginary residue {imag:.2e}");
    }
    if min < -1e-6 {
        warn!("propensity dips to {min:.2e}; discretization ripple");
    }
    Ok(grid)
}

/// `χ_b(−γ̄)` on the dual grid.
fn reflected_characteristic(probe: &DensityOperator, spec: GridSpec) -> Result<Vec<Complex64>> {
    if probe.cutoffs().len() != 1 {
        return Err(invalid("probe must be a single-mode state"));
    }
    let n = spec.points;
    let lnf = ln_factorials(probe.dim() + 1);
    Ok((0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            let u = spec.dual_coord(a);
            let lnf = &lnf;
            (0..n).map(move |b| chi_at(probe, c64(-u, spec.dual_coord(b)), lnf))
        })
        .collect())
}

/// Gaussian efficiency filter `G_η(α) = η/(π(1−η)) exp(−η|α|²/(1−η))` on the grid.
pub fn efficiency_filter(spec: GridSpec, eta: f64) -> Result<PhaseSpaceGrid> {
    let eta = Efficiency::new(eta)?.value();
    if eta == 1.0 {
        return Err(invalid("the efficiency filter degenerates to a delta at η = 1"));
    }
    let n = spec.points;
    let s = eta / (1.0 - eta);
    let values = (0..n * n)
        .map(|i| {
            let x = spec.coord(i / n);
            let y = spec.coord(i % n);
            c64(s / PI * (-s * (x * x + y * y)).exp(), 0.0)
        })
        .collect();
    Ok(PhaseSpaceGrid {
        spec,
        kind: GridKind::Propensity,
        values,
        outside_fraction: 0.0,
    })
}

/// Normalized 2-D histogram of `(z1, z2)`.
pub fn empirical_density(samples: &[PhotocurrentSample], spec: GridSpec) -> Result<PhaseSpaceGrid> {
    empirical_density_from_pairs(samples.iter().map(|s| (s.z1, s.z2)), spec)
}

pub fn empirical_density_from_pairs(
    pairs: impl IntoIterator<Item = (f64, f64)>,
    spec: GridSpec,
) -> Result<PhaseSpaceGrid> {
    let n = spec.points;
    let d = spec.spacing();
    let mut counts = vec![0u64; n * n];
    let mut total = 0u64;
    let mut outside = 0u64;
    for (x, y) in pairs {
        total += 1;
        let j = ((x + spec.half_extent) / d).floor();
        let l = ((y + spec.half_extent) / d).floor();
        if j >= 0.0 && l >= 0.0 && (j as usize) < n && (l as usize) < n {
            counts[j as usize * n + l as usize] += 1;
        } else {
            outside += 1;
        }
    }
    if total == 0 {
        return Err(invalid("empirical density needs at least one sample"));
    }
    let norm = 1.0 / (total as f64 * d * d);
    Ok(PhaseSpaceGrid {
        spec,
        kind: GridKind::Empirical,
        values: counts.iter().map(|&c| c64(c as f64 * norm, 0.0)).collect(),
        outside_fraction: outside as f64 / total as f64,
    })
}

/// Agreement between an analytic distribution and a histogram.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceReport {
    pub block_factor: usize,
    pub total_variation: f64,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins entering the χ² statistic, the pooled bin included.
    pub bins_used: usize,
    /// Expected count of the pooled bin (sparse bins plus the outside region).
    pub pooled_expected: f64,
    pub outside_fraction: f64,
    /// Most negative analytic value before clamping.
    pub analytic_min: f64,
    pub significance: f64,
    pub pass: bool,
}

/// χ² and total-variation comparison on `factor × factor` blocks.
///
/// Blocks expecting fewer than five counts are pooled together with the
/// region outside the grid; degrees of freedom are the bins used minus one.
pub fn distribution_distance(
    analytic: &PhaseSpaceGrid,
    empirical: &PhaseSpaceGrid,
    n_samples: usize,
    factor: usize,
    significance: f64,
) -> Result<DistanceReport> {
    if analytic.spec != empirical.spec {
        return Err(invalid("analytic and empirical grids differ in geometry"));
    }
    if empirical.kind != GridKind::Empirical || analytic.kind == GridKind::Empirical {
        return Err(invalid("expected one analytic and one empirical grid"));
    }
    if n_samples == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let p = analytic.block_probabilities(factor)?;
    let q = empirical.block_probabilities(factor)?;
    let n = n_samples as f64;
    let p_out = (1.0 - p.iter().sum::<f64>()).max(0.0);
    let q_out = empirical.outside_fraction;
    let total_variation =
        0.5 * (p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>() + (p_out - q_out).abs());

    let mut chi = 0.0;
    let mut bins = 0usize;
    let mut pool_e = p_out * n;
    let mut pool_o = q_out * n;
    for (pe, qo) in p.iter().zip(&q) {
        let e = pe * n;
        let o = qo * n;
        if e < 5.0 {
            pool_e += e;
            pool_o += o;
        } else {
            chi += (o - e).powi(2) / e;
            bins += 1;
        }
    }
    if pool_e > 0.0 {
        chi += (pool_o - pool_e).powi(2) / pool_e;
        bins += 1;
    }
    if bins < 2 {
        return Err(invalid("too few populated bins for a χ² test"));
    }
    let dof = bins - 1;
    let p_value = chi_square_sf(chi, dof)?;
    Ok(DistanceReport {
        block_factor: factor,
        total_variation,
        chi_square: chi,
        dof,
        p_value,
        bins_used: bins,
        pooled_expected: pool_e,
        outside_fraction: q_out,
        analytic_min: analytic.min_real(),
        significance,
        pass: p_value > significance,
    })
}
