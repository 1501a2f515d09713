//! Truncated Fock-space backend.
//!
//! Each input mode in a pure state `Σ c_n |n⟩` is created from the vacuum as
//! `Σ c_n (B_k†)ⁿ/√n! |0⟩`, where `B_k† = Σ_l E_lk b_l†` is its image on the
//! detector modes. Applying the inputs one after another yields the output
//! state on all compositions of at most `N` photons; mixed inputs are
//! expanded into their eigenvectors. Detector efficiency is applied to the
//! sampled counts by binomial thinning, which is exact for ideal counting
//! behind a vacuum beam splitter.

use super::{chunked, InputState, Layout, PhotocurrentSample, SchemeConfig, SchemeKind};
use crate::error::{invalid, Error, Result};
use crate::fock::coherent_vector;
use crate::photodet::{loss_channel, thin, InverseCdf};
use crate::{c64, state_dim_limit, CMatrix, Complex64};
use log::debug;

const MAX_LOOKUP: usize = 50_000_000;

/// Joint photon-count distribution of all detectors before efficiency loss.
#[derive(Clone, Debug)]
pub struct JointCounts {
    pub detectors: usize,
    pub max_photons: usize,
    /// Occupations, `detectors` entries per state.
    pub occupations: Vec<u32>,
    pub probs: Vec<f64>,
    /// Probability mass outside the truncated space.
    pub deficit: f64,
}

impl JointCounts {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn state(&self, i: usize) -> &[u32] {
        &self.occupations[i * self.detectors..(i + 1) * self.detectors]
    }

    /// Marginal count distribution of one detector.
    pub fn marginal(&self, detector: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.max_photons + 1];
        for i in 0..self.len() {
            out[self.state(i)[detector] as usize] += self.probs[i];
        }
        out
    }
}

/// Compositions of at most `n_max` photons over `k` modes with a lookup
/// table for the creation step.
struct Space {
    k: usize,
    occ: Vec<u32>,
    /// `up[i * k + l]`: index of state `i` with one more photon in mode `l`.
    up: Vec<u32>,
}

fn binom(n: usize, k: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for j in 0..k {
        acc = acc.checked_mul(n - j)? / (j + 1);
    }
    Some(acc)
}

fn enumerate(k: usize, budget: u32, cur: &mut Vec<u32>, out: &mut Vec<u32>) {
    if cur.len() == k {
        out.extend_from_slice(cur);
        return;
    }
    for n in 0..=budget {
        cur.push(n);
        enumerate(k, budget - n, cur, out);
        cur.pop();
    }
}

impl Space {
    fn new(k: usize, n_max: usize) -> Result<Self> {
        let count = binom(n_max + k, k).unwrap_or(usize::MAX);
        let limit = state_dim_limit();
        if count > limit {
            return Err(Error::ResourceLimit {
                what: "truncated multimode output state",
                requested: count,
                limit,
            });
        }
        let radix = n_max + 1;
        let box_size = radix
            .checked_pow(k as u32)
            .filter(|&b| b <= MAX_LOOKUP)
            .ok_or(Error::ResourceLimit {
                what: "occupation lookup table",
                requested: count,
                limit: MAX_LOOKUP,
            })?;
        let mut occ = Vec::with_capacity(count * k);
        enumerate(k, n_max as u32, &mut Vec::with_capacity(k), &mut occ);
        let n_states = occ.len() / k;
        let mut lookup = vec![u32::MAX; box_size];
        for i in 0..n_states {
            let key = occ[i * k..(i + 1) * k]
                .iter()
                .fold(0usize, |a, &n| a * radix + n as usize);
            lookup[key] = i as u32;
        }
        let m = n_states;
        let mut up = vec![u32::MAX; m * k];
        for i in 0..m {
            let o = &occ[i * k..(i + 1) * k];
            let total: u32 = o.iter().sum();
            if total as usize >= n_max {
                continue;
            }
            for l in 0..k {
                let key = o
                    .iter()
                    .enumerate()
                    .fold(0usize, |a, (j, &n)| a * radix + n as usize + (j == l) as usize);
                up[i * k + l] = lookup[key];
            }
        }
        Ok(Self { k, occ, up })
    }

    fn len(&self) -> usize {
        self.occ.len() / self.k
    }

    /// `Σ_l col_l b_l† w`.
    fn create(&self, col: &[Complex64], w: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![c64(0.0, 0.0); w.len()];
        for (i, &wi) in w.iter().enumerate() {
            if wi.re == 0.0 && wi.im == 0.0 {
                continue;
            }
            for l in 0..self.k {
                let j = self.up[i * self.k + l];
                if j == u32::MAX {
                    continue;
                }
                let amp = ((self.occ[i * self.k + l] + 1) as f64).sqrt();
                out[j as usize] += col[l] * wi * amp;
            }
        }
        out
    }
}

/// Photon-number distribution of an input, with the tail below 1e−16.
fn number_distribution(state: &InputState) -> Vec<f64> {
    match state {
        InputState::Coherent(z) => {
            let mu = z.norm_sqr();
            let mut p = (-mu).exp();
            let mut out = vec![p];
            let mut acc = p;
            let mut n = 0usize;
            while 1.0 - acc > 1e-16 && n < 10_000 || (n as f64) < mu {
                n += 1;
                p *= mu / n as f64;
                out.push(p);
                acc += p;
            }
            out
        }
        InputState::Density(r) => r.diagonal_probabilities(),
    }
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Weighted pure components with amplitudes on `|0⟩..|n_cap⟩`.
fn components(state: &InputState, n_cap: usize) -> Result<Vec<(f64, Vec<Complex64>)>> {
    match state {
        InputState::Coherent(z) => {
            let v = coherent_vector(*z, n_cap + 1)?;
            Ok(vec![(1.0, v.amplitudes().iter().cloned().collect())])
        }
        InputState::Density(r) => Ok(r
            .pure_components(1e-15)
            .into_iter()
            .map(|(w, v)| (w, v.amplitudes().iter().take(n_cap + 1).cloned().collect()))
            .collect()),
    }
}

fn is_vacuum(state: &InputState) -> bool {
    match state {
        InputState::Coherent(z) => z.norm() == 0.0,
        InputState::Density(r) => {
            (r.matrix()[(0, 0)].re - 1.0).abs() < 1e-15
        }
    }
}

/// Joint count distribution of the detectors of `network` for the given
/// independent inputs `(port, state)`; ports not listed are in the vacuum.
pub fn joint_count_distribution(
    network: &CMatrix,
    inputs: &[(usize, InputState)],
    tail: f64,
    max_photons: Option<usize>,
) -> Result<JointCounts> {
    let k = network.nrows();
    for (p, _) in inputs {
        if *p >= network.ncols() {
            return Err(invalid(format!("input port {p} out of range")));
        }
    }
    let active: Vec<&(usize, InputState)> = inputs.iter().filter(|(_, s)| !is_vacuum(s)).collect();
    let n_max = match max_photons {
        Some(n) => n,
        None => {
            let mut dist = vec![1.0];
            for (_, s) in &active {
                dist = convolve(&dist, &number_distribution(s));
            }
            let mut acc = 0.0;
            let total: f64 = dist.iter().sum();
            let mut n = dist.len() - 1;
            for (i, p) in dist.iter().enumerate() {
                acc += p;
                if total - acc < tail {
                    n = i;
                    break;
                }
            }
            n
        }
    };
    debug!("Fock backend: {} detectors, at most {n_max} photons", k);
    let space = Space::new(k, n_max)?;
    let m = space.len();

    let per_input: Vec<(usize, Vec<(f64, Vec<Complex64>)>)> = active
        .iter()
        .map(|(p, s)| Ok((*p, components(s, n_max)?)))
        .collect::<Result<_>>()?;

    let mut probs = vec![0.0; m];
    let mut choice = vec![0usize; per_input.len()];
    loop {
        let weight: f64 = per_input
            .iter()
            .zip(&choice)
            .map(|((_, comps), &c)| comps[c].0)
            .product();
        if weight > 1e-16 {
            let mut v = vec![c64(0.0, 0.0); m];
            v[0] = c64(1.0, 0.0);
            for ((port, comps), &c) in per_input.iter().zip(&choice) {
                let col: Vec<Complex64> = (0..k).map(|l| network[(l, *port)]).collect();
                let amps = &comps[c].1;
                let mut w = v.clone();
                let mut acc: Vec<Complex64> = v.iter().map(|x| x * amps[0]).collect();
                for (n, &cn) in amps.iter().enumerate().skip(1) {
                    w = space.create(&col, &w);
                    let s = 1.0 / (n as f64).sqrt();
                    w.iter_mut().for_each(|x| *x *= s);
                    if cn.norm() > 0.0 {
                        acc.iter_mut().zip(&w).for_each(|(a, x)| *a += cn * x);
                    }
                }
                v = acc;
            }
            probs.iter_mut().zip(&v).for_each(|(p, a)| *p += weight * a.norm_sqr());
        }
        // Advance the mixed-radix component counter.
        let mut j = 0;
        while j < choice.len() {
            choice[j] += 1;
            if choice[j] < per_input[j].1.len() {
                break;
            }
            choice[j] = 0;
            j += 1;
        }
        if j == choice.len() {
            break;
        }
    }
    let total: f64 = probs.iter().sum();
    Ok(JointCounts {
        detectors: k,
        max_photons: n_max,
        occupations: space.occ,
        probs,
        deficit: (1.0 - total).max(0.0),
    })
}

/// Joint distribution of the detectors of a scheme (efficiency not applied).
pub(super) fn scheme_distribution(
    layout: &Layout,
    cfg: &SchemeConfig,
    signal: &InputState,
    idler: &InputState,
) -> Result<JointCounts> {
    let lo = InputState::Coherent(cfg.lo() * layout.lo_gain);
    let attenuate = |s: &InputState| -> Result<InputState> {
        if layout.kind != SchemeKind::Heterodyne {
            return Ok(s.clone());
        }
        let tau = layout.signal_gain * layout.signal_gain;
        Ok(match s {
            InputState::Coherent(z) => InputState::Coherent(z * layout.signal_gain),
            InputState::Density(r) => InputState::Density(loss_channel(r, tau)?),
        })
    };
    let inputs = vec![
        (layout.signal_port, attenuate(signal)?),
        (layout.idler_port, attenuate(idler)?),
        (layout.lo_port, lo),
    ];
    joint_count_distribution(&layout.network, &inputs, cfg.fock_tail, cfg.max_photons)
}

pub(super) fn sample(
    layout: &Layout,
    cfg: &SchemeConfig,
    signal: &InputState,
    idler: &InputState,
) -> Result<Vec<PhotocurrentSample>> {
    let joint = scheme_distribution(layout, cfg, signal, idler)?;
    if joint.deficit > cfg.deficit_threshold {
        return Err(Error::Truncation {
            deficit: joint.deficit,
            threshold: cfg.deficit_threshold,
        });
    }
    let cdf = InverseCdf::new(&joint.probs);
    let eta = cfg.eta;
    Ok(chunked(cfg.seed, cfg.sample_count, |rng| {
        let i = cdf.draw(rng);
        let counts: Vec<u64> = joint.state(i).iter().map(|&n| thin(n as u64, eta, rng)).collect();
        let (z1, z2) = layout.photocurrent(&counts, eta);
        PhotocurrentSample { counts, z1, z2 }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockVector;
    use crate::linopt::{beamsplitter_matrix, triple_coupler_matrix};
    use approx::assert_abs_diff_eq;

    #[test]
    fn composition_count() {
        let s = Space::new(3, 4).unwrap();
        assert_eq!(s.len(), binom(7, 3).unwrap());
        assert_eq!(&s.occ[..3], &[0, 0, 0]);
    }

    #[test]
    fn hong_ou_mandel() {
        let bs = beamsplitter_matrix(0.5).unwrap();
        let one = InputState::Density(FockVector::number(1, 2).unwrap().to_density());
        let j = joint_count_distribution(bs.matrix(), &[(0, one.clone()), (1, one)], 1e-13, None)
            .unwrap();
        for i in 0..j.len() {
            if j.state(i) == [1, 1] {
                assert!(j.probs[i] < 1e-30);
            }
            if j.state(i) == [2, 0] || j.state(i) == [0, 2] {
                assert_abs_diff_eq!(j.probs[i], 0.5, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn coherent_outputs_are_poisson() {
        let t = triple_coupler_matrix();
        let z = c64(1.5, -0.5);
        let j = joint_count_distribution(t.matrix(), &[(1, InputState::Coherent(z))], 1e-13, None)
            .unwrap();
        assert!(j.deficit < 1e-12);
        let mu = z.norm_sqr() / 3.0;
        let marg = j.marginal(2);
        let mut p = (-mu).exp();
        for (n, q) in marg.iter().enumerate().take(8) {
            if n > 0 {
                p *= mu / n as f64;
            }
            assert_abs_diff_eq!(*q, p, epsilon = 1e-12);
        }
    }

    #[test]
    fn resource_limit_is_reported() {
        let t = triple_coupler_matrix();
        let r = joint_count_distribution(t.matrix(), &[], 1e-13, Some(500));
        assert!(matches!(r, Err(Error::ResourceLimit { .. })));
    }
}
