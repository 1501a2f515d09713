//! Photon counting with finite quantum efficiency.
//!
//! Two loss models are provided: the binomial convolution of the ideal count
//! distribution, and an ideal detector behind a beam splitter of
//! transmissivity `η` whose second port is in the vacuum. They agree exactly;
//! [`equivalence_check`] reports the difference.

use crate::error::{invalid, Error, Result};
use crate::fock::{partial_trace, tensor_densities, DensityOperator};
use crate::linopt::{beamsplitter_matrix, lift_to_fock};
use log::debug;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};
use statrs::function::factorial::ln_binomial;

/// Count distributions with a larger deficit are refused by the samplers.
pub const DEFAULT_DEFICIT_THRESHOLD: f64 = 1e-6;
/// Poisson means above this are drawn from the normal approximation.
pub const DEFAULT_NORMAL_THRESHOLD: f64 = 1e6;

/// Probabilities of counting `m = 0..len` photons, plus the mass lost to
/// truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct CountDistribution {
    probs: Vec<f64>,
    deficit: f64,
}

impl CountDistribution {
    /// Entries down to −1e−14 are clamped to zero; the deficit is `1 − Σ p`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("count distribution needs at least one entry"));
        }
        if let Some(p) = probs.iter().find(|&&p| !(p >= -1e-14) || p > 1.0 + 1e-10) {
            return Err(invalid(format!("probability {p} outside [0, 1]")));
        }
        let probs: Vec<f64> = probs.into_iter().map(|p| p.max(0.0)).collect();
        let total: f64 = probs.iter().sum();
        if total > 1.0 + 1e-10 {
            return Err(invalid(format!("probabilities sum to {total} > 1")));
        }
        Ok(Self {
            probs,
            deficit: (1.0 - total).max(0.0),
        })
    }

    pub fn delta(n: usize) -> Self {
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        Self { probs, deficit: 0.0 }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, m: usize) -> f64 {
        self.probs.get(m).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(m, p)| m as f64 * p).sum()
    }

    /// `max_m |p_m − q_m|`, padding the shorter one with zeros.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.len().max(other.len());
        (0..n).fold(0.0, |acc, m| acc.max((self.get(m) - other.get(m)).abs()))
    }
}

/// Quantum efficiency `η ∈ (0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Efficiency(f64);

impl Efficiency {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(invalid(format!("efficiency {eta} outside (0, 1]")));
        }
        Ok(Self(eta))
    }

    pub fn ideal() -> Self {
        Self(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Photon-number distribution `⟨m|ρ|m⟩` of one mode; other modes are traced out.
pub fn ideal_counts(rho: &DensityOperator, mode: usize) -> Result<CountDistribution> {
    let single;
    let r = if rho.cutoffs().len() == 1 {
        if mode != 0 {
            return Err(invalid(format!("mode {mode} out of range for a single-mode state")));
        }
        rho
    } else {
        single = partial_trace(rho, &[mode])?;
        &single
    };
    CountDistribution::new(r.diagonal_probabilities())
}

/// `C(n, m) ηᵐ (1−η)ⁿ⁻ᵐ`, in log space above `n = 50`.
pub fn binomial_pmf(n: usize, m: usize, eta: f64) -> f64 {
    if m > n {
        return 0.0;
    }
    if n <= 50 {
        let mut c = 1.0;
        for j in 0..m {
            c = c * (n - j) as f64 / (j + 1) as f64;
        }
        c * eta.powi(m as i32) * (1.0 - eta).powi((n - m) as i32)
    } else {
        let ln_eta = if m == 0 { 0.0 } else { m as f64 * eta.ln() };
        let ln_rest = if n == m { 0.0 } else { (n - m) as f64 * (1.0 - eta).ln() };
        (ln_binomial(n as u64, m as u64) + ln_eta + ln_rest).exp()
    }
}

/// Binomial convolution `P^η_m = Σ_{n≥m} p_n C(n,m) ηᵐ(1−η)ⁿ⁻ᵐ`.
pub fn lossy_counts_binomial(p: &CountDistribution, eta: Efficiency) -> CountDistribution {
    let e = eta.value();
    let n_max = p.len();
    let probs: Vec<f64> = (0..n_max)
        .map(|m| (m..n_max).map(|n| p.probs[n] * binomial_pmf(n, m, e)).sum())
        .collect();
    CountDistribution {
        probs,
        deficit: p.deficit,
    }
}

/// Single-mode state after a beam splitter of transmissivity `τ` with vacuum
/// on the other port, reflected mode traced out.
pub fn loss_channel(rho: &DensityOperator, tau: f64) -> Result<DensityOperator> {
    if rho.cutoffs().len() != 1 {
        return Err(invalid("loss channel acts on single-mode states"));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(invalid(format!("transmissivity {tau} outside (0, 1]")));
    }
    let c = rho.dim();
    let vac = DensityOperator::diagonal(&{
        let mut v = vec![0.0; c];
        v[0] = 1.0;
        v
    })?;
    let joint = tensor_densities(&[rho, &vac])?;
    let u = lift_to_fock(&beamsplitter_matrix(tau)?, &[c, c])?;
    let out = joint.evolve(&u)?;
    partial_trace(&out, &[0])
}

/// Counts of an ideal detector on the transmitted port of a beam splitter.
pub fn lossy_counts_beamsplitter(rho: &DensityOperator, tau: f64) -> Result<CountDistribution> {
    let out = loss_channel(rho, tau)?;
    let deficit = rho.truncation_error();
    let mut d = ideal_counts(&out, 0)?;
    d.deficit = deficit.max(d.deficit);
    Ok(d)
}

/// Difference between the two loss models.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEquivalence {
    pub eta: f64,
    pub max_abs_diff: f64,
    /// `(m, binomial, beam splitter)` rows.
    pub table: Vec<(usize, f64, f64)>,
}

pub fn equivalence_check(rho: &DensityOperator, eta: Efficiency) -> Result<LossEquivalence> {
    let bin = lossy_counts_binomial(&ideal_counts(rho, 0)?, eta);
    let bs = lossy_counts_beamsplitter(rho, eta.value())?;
    let table: Vec<(usize, f64, f64)> = (0..bin.len().max(bs.len()))
        .map(|m| (m, bin.get(m), bs.get(m)))
        .collect();
    Ok(LossEquivalence {
        eta: eta.value(),
        max_abs_diff: bin.max_abs_diff(&bs),
        table,
    })
}

/// Independent generator for `(seed, stream)`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Inverse-CDF sampling, refusing distributions with deficit above 1e−6.
pub fn sample_counts<R: Rng + ?Sized>(
    p: &CountDistribution,
    rng: &mut R,
    n: usize,
) -> Result<Vec<u64>> {
    sample_counts_with_threshold(p, DEFAULT_DEFICIT_THRESHOLD, rng, n)
}

pub fn sample_counts_with_threshold<R: Rng + ?Sized>(
    p: &CountDistribution,
    threshold: f64,
    rng: &mut R,
    n: usize,
) -> Result<Vec<u64>> {
    if p.deficit > threshold {
        return Err(Error::Truncation {
            deficit: p.deficit,
            threshold,
        });
    }
    let sampler = InverseCdf::new(p.probs());
    Ok((0..n).map(|_| sampler.draw(rng) as u64).collect())
}

/// Inverse-CDF table over a finite probability vector (renormalized).
#[derive(Clone, Debug)]
pub struct InverseCdf {
    cdf: Vec<f64>,
}

impl InverseCdf {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|&p| {
                acc += p.max(0.0);
                acc
            })
            .collect();
        if acc > 0.0 {
            cdf.iter_mut().for_each(|c| *c /= acc);
        }
        Self { cdf }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.cdf.len() - 1)
    }
}

/// One Poisson draw; normal approximation above `normal_threshold`.
pub fn poisson_draw<R: Rng + ?Sized>(mean: f64, normal_threshold: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean > normal_threshold {
        let x: f64 = Normal::new(mean, mean.sqrt())
            .expect("finite positive mean")
            .sample(rng);
        return x.round().max(0.0) as u64;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// `n` Poisson samples with the default normal-approximation threshold.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R, n: usize) -> Result<Vec<u64>> {
    sample_poisson_with_threshold(mean, DEFAULT_NORMAL_THRESHOLD, rng, n)
}

pub fn sample_poisson_with_threshold<R: Rng + ?Sized>(
    mean: f64,
    normal_threshold: f64,
    rng: &mut R,
    n: usize,
) -> Result<Vec<u64>> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(invalid(format!("Poisson mean {mean} must be finite and nonnegative")));
    }
    if mean > normal_threshold {
        debug!("Poisson mean {mean:.3e} above {normal_threshold:.1e}: normal approximation");
    }
    Ok((0..n).map(|_| poisson_draw(mean, normal_threshold, rng)).collect())
}

/// Binomial thinning of a count: each photon survives with probability `η`.
pub fn thin<R: Rng + ?Sized>(count: u64, eta: f64, rng: &mut R) -> u64 {
    if eta >= 1.0 || count == 0 {
        return count;
    }
    Binomial::new(count, eta).expect("eta in (0, 1)").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::fock::{coherent_vector, FockVector};
    use approx::assert_abs_diff_eq;

    fn fock(n: usize, c: usize) -> DensityOperator {
        FockVector::number(n, c).unwrap().to_density()
    }

    #[test]
    fn ideal_counts_basic() {
        let d = ideal_counts(&fock(0, 5), 0).unwrap();
        assert_eq!(d.probs()[0], 1.0);
        let d = ideal_counts(&fock(2, 5), 0).unwrap();
        assert_eq!(d.probs()[2], 1.0);
        let coh = coherent_vector(c64(1.0, 0.0), 20).unwrap().to_density();
        let d = ideal_counts(&coh, 0).unwrap();
        assert_abs_diff_eq!(d.probs()[0], (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(d.probs()[3], (-1.0f64).exp() / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn binomial_cases() {
        let p = CountDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(lossy_counts_binomial(&p, Efficiency::ideal()), p);
        let d = lossy_counts_binomial(&CountDistribution::delta(1), Efficiency::new(0.6).unwrap());
        assert_abs_diff_eq!(d.probs()[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(d.probs()[1], 0.6, epsilon = 1e-15);
        let d = lossy_counts_binomial(&CountDistribution::delta(2), Efficiency::new(0.5).unwrap());
        assert_eq!(d.probs(), &[0.25, 0.5, 0.25]);
        assert!(Efficiency::new(0.0).is_err());
        assert!(Efficiency::new(1.01).is_err());
    }

    #[test]
    fn binomial_log_space_branch_is_continuous() {
        let direct = binomial_pmf(50, 20, 0.3);
        let via_log = (ln_binomial(50, 20) + 20.0 * 0.3f64.ln() + 30.0 * 0.7f64.ln()).exp();
        assert_abs_diff_eq!(direct, via_log, epsilon = 1e-15);
        let total: f64 = (0..=200).map(|m| binomial_pmf(200, m, 0.37)).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn beamsplitter_cases() {
        let d = lossy_counts_beamsplitter(&fock(1, 4), 0.6).unwrap();
        assert_abs_diff_eq!(d.probs()[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(d.probs()[1], 0.6, epsilon = 1e-12);

        let coh = coherent_vector(c64(2.0, 0.0), 24).unwrap().to_density();
        let d = lossy_counts_beamsplitter(&coh, 0.5).unwrap();
        let mut fact = 1.0;
        for m in 0..8 {
            if m > 0 {
                fact *= m as f64;
            }
            let poisson = (-2.0f64).exp() * 2f64.powi(m) / fact;
            assert!((d.probs()[m as usize] - poisson).abs() < 1e-8);
        }
        let id = lossy_counts_beamsplitter(&coh, 1.0).unwrap();
        assert!(id.max_abs_diff(&ideal_counts(&coh, 0).unwrap()) < 1e-13);
    }

    #[test]
    fn loss_models_agree() {
        let th = DensityOperator::thermal(0.8, 12).unwrap();
        for eta in [0.3, 0.5, 0.6, 0.9] {
            let r = equivalence_check(&th, Efficiency::new(eta).unwrap()).unwrap();
            assert!(r.max_abs_diff <= 1e-10, "η={eta}: {}", r.max_abs_diff);
        }
        let r = equivalence_check(&fock(3, 8), Efficiency::ideal()).unwrap();
        assert!(r.max_abs_diff <= 1e-13);
    }

    #[test]
    fn count_sampling() {
        let mut rng = rng_stream(7, 0);
        let s = sample_counts(&CountDistribution::delta(0), &mut rng, 100).unwrap();
        assert!(s.iter().all(|&x| x == 0));

        let p = CountDistribution::new(vec![0.5, 0.5]).unwrap();
        let s = sample_counts(&p, &mut rng, 100_000).unwrap();
        let mean = s.iter().sum::<u64>() as f64 / 1e5;
        assert!((mean - 0.5).abs() < 0.005);

        let a = sample_counts(&p, &mut rng_stream(3, 1), 50).unwrap();
        let b = sample_counts(&p, &mut rng_stream(3, 1), 50).unwrap();
        assert_eq!(a, b);

        let short = CountDistribution::new(vec![0.5, 0.4]).unwrap();
        assert!(matches!(
            sample_counts(&short, &mut rng, 10),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn poisson_sampling() {
        let mut rng = rng_stream(11, 0);
        assert!(sample_poisson(0.0, &mut rng, 100).unwrap().iter().all(|&x| x == 0));
        let n = 100_000;
        let s = sample_poisson(4.0, &mut rng, n).unwrap();
        let mean = s.iter().sum::<u64>() as f64 / n as f64;
        assert!((mean - 4.0).abs() < 3.0 * 2.0 / (n as f64).sqrt());

        let s = sample_poisson(1e8, &mut rng, 20_000).unwrap();
        let m = s.iter().map(|&x| x as f64).sum::<f64>() / s.len() as f64;
        let v = s.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / (s.len() - 1) as f64;
        assert!((m / 1e8 - 1.0).abs() < 1e-3);
        assert!((v / m - 1.0).abs() < 0.03);
        assert!(sample_poisson(-1.0, &mut rng, 1).is_err());
    }
}
