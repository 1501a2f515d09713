//! The three two-photocurrent detectors end to end.
//!
//! Each scheme drives a passive network with a signal, an idler, a local
//! oscillator and vacuum, counts photons at every output with efficiency
//! `η`, and combines the counts into the rescaled photocurrents `(z1, z2)`.
//! For a coherent signal `α` and vacuum idler, `lo_phase = 0` gives
//! `E[z1 + i z2] = α`; in general the currents measure `Z = a + b†` with `a`
//! the signal and `b` the idler.
//!
//! Two sampling backends exist. [`Backend::CoherentExact`] uses that coherent
//! inputs leave a passive network as independent coherent outputs, so each
//! detector draws Poisson counts. [`Backend::FockTruncated`] propagates
//! arbitrary input states through the network in a truncated Fock space
//! and samples the joint count distribution.

mod coherent;
mod equivalence;
mod fockengine;
pub mod layout;
mod operators;

pub use coherent::{detector_means, exact_moments, ExactMoments};
pub use equivalence::{compare_samples, equivalence_report, EquivalenceReport, MarginalTest};
pub use fockengine::{joint_count_distribution, JointCounts};
pub use layout::Layout;
pub use operators::{
    canonical_form, leading_order, photocurrent_operators, CanonicalForm, LeadingOrder,
    OperatorCutoffs, PhotocurrentOperators,
};

use crate::error::{invalid, Result};
use crate::fock::{DensityOperator, FockVector};
use crate::photodet::{rng_stream, DEFAULT_DEFICIT_THRESHOLD, DEFAULT_NORMAL_THRESHOLD};
use crate::stats::Moments2;
use crate::{c64, CMatrix, Complex64};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Samples per RNG stream; chunk `c` uses stream `c` of the run seed.
pub const CHUNK_SIZE: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    EightPort,
    SixPort,
    Heterodyne,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [Self::EightPort, Self::SixPort, Self::Heterodyne];

    pub fn name(self) -> &'static str {
        match self {
            Self::EightPort => "eight_port",
            Self::SixPort => "six_port",
            Self::Heterodyne => "heterodyne",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    CoherentExact,
    FockTruncated,
}

/// Input state of the signal or idler mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    #[default]
    Vacuum,
    Coherent {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Fock {
        n: usize,
    },
    /// Row-major density matrix over `|0⟩..|cutoff−1⟩`.
    Density {
        cutoff: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    },
    /// JSON file holding a `Density` body (`cutoff`, `re`, `im`).
    DensityFile {
        path: PathBuf,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityBody {
    cutoff: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// A resolved input state.
#[derive(Clone, Debug, PartialEq)]
pub enum InputState {
    Coherent(Complex64),
    Density(DensityOperator),
}

impl InputState {
    pub fn is_coherent(&self) -> bool {
        matches!(self, InputState::Coherent(_))
    }
}

fn density_from_parts(cutoff: usize, re: &[f64], im: &[f64]) -> Result<DensityOperator> {
    let d = cutoff * cutoff;
    if re.len() != d || im.len() != d {
        return Err(invalid(format!(
            "density matrix with cutoff {cutoff} needs {d} entries in re and im"
        )));
    }
    let m = CMatrix::from_fn(cutoff, cutoff, |i, j| c64(re[i * cutoff + j], im[i * cutoff + j]));
    DensityOperator::new(vec![cutoff], m)
}

impl StateSpec {
    pub fn coherent(z: Complex64) -> Self {
        StateSpec::Coherent { re: z.re, im: z.im }
    }

    /// Coherent amplitude, if the state is coherent (vacuum counts).
    pub fn coherent_amplitude(&self) -> Option<Complex64> {
        match *self {
            StateSpec::Vacuum => Some(c64(0.0, 0.0)),
            StateSpec::Coherent { re, im } => Some(c64(re, im)),
            _ => None,
        }
    }

    /// Resolve to a state; relative file paths are taken from `base`.
    pub fn resolve(&self, base: Option<&Path>) -> Result<InputState> {
        match self {
            StateSpec::Vacuum => Ok(InputState::Coherent(c64(0.0, 0.0))),
            StateSpec::Coherent { re, im } => {
                if !re.is_finite() || !im.is_finite() {
                    return Err(invalid("coherent amplitude must be finite"));
                }
                Ok(InputState::Coherent(c64(*re, *im)))
            }
            StateSpec::Fock { n } => Ok(InputState::Density(
                FockVector::number(*n, n + 1)?.to_density(),
            )),
            StateSpec::Density { cutoff, re, im } => {
                Ok(InputState::Density(density_from_parts(*cutoff, re, im)?))
            }
            StateSpec::DensityFile { path } => {
                let full = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&full)?;
                let body: DensityBody = serde_json::from_str(&text)
                    .map_err(|e| crate::Error::Parse(format!("{}: {e}", full.display())))?;
                Ok(InputState::Density(density_from_parts(body.cutoff, &body.re, &body.im)?))
            }
        }
    }
}

fn default_lo_amplitude() -> f64 {
    1e4
}
fn default_eta() -> f64 {
    1.0
}
fn default_samples() -> usize {
    10_000
}
fn default_normal_threshold() -> f64 {
    DEFAULT_NORMAL_THRESHOLD
}
fn default_deficit_threshold() -> f64 {
    DEFAULT_DEFICIT_THRESHOLD
}
fn default_fock_tail() -> f64 {
    1e-13
}

/// Everything needed to run one scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    #[serde(default)]
    pub signal: StateSpec,
    #[serde(default)]
    pub idler: StateSpec,
    /// `|z|`, the local-oscillator amplitude.
    #[serde(default = "default_lo_amplitude")]
    pub lo_amplitude: f64,
    /// Phase of the local oscillator, radians.
    #[serde(default)]
    pub lo_phase: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// `k = |z|√(1−τ)`, heterodyne only; unset means `|z|^(2/3)`.
    #[serde(default)]
    pub heterodyne_mixing: Option<f64>,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_samples")]
    pub sample_count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Poisson means above this use the normal approximation.
    #[serde(default = "default_normal_threshold")]
    pub normal_threshold: f64,
    /// Fock backend: largest accepted probability mass lost to truncation.
    #[serde(default = "default_deficit_threshold")]
    pub deficit_threshold: f64,
    /// Fock backend: total-photon-number tail mass left out.
    #[serde(default = "default_fock_tail")]
    pub fock_tail: f64,
    /// Fock backend: explicit total-photon-number cutoff.
    #[serde(default)]
    pub max_photons: Option<usize>,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeKind) -> Self {
        Self {
            scheme,
            signal: StateSpec::Vacuum,
            idler: StateSpec::Vacuum,
            lo_amplitude: default_lo_amplitude(),
            lo_phase: 0.0,
            eta: default_eta(),
            heterodyne_mixing: None,
            backend: Backend::CoherentExact,
            sample_count: default_samples(),
            seed: 0,
            normal_threshold: default_normal_threshold(),
            deficit_threshold: default_deficit_threshold(),
            fock_tail: default_fock_tail(),
            max_photons: None,
        }
    }

    pub fn with_signal(mut self, s: StateSpec) -> Self {
        self.signal = s;
        self
    }

    pub fn with_idler(mut self, s: StateSpec) -> Self {
        self.idler = s;
        self
    }

    pub fn with_lo(mut self, amplitude: f64) -> Self {
        self.lo_amplitude = amplitude;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.sample_count = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_backend(mut self, b: Backend) -> Self {
        self.backend = b;
        self
    }

    pub fn with_mixing(mut self, k: f64) -> Self {
        self.heterodyne_mixing = Some(k);
        self
    }

    /// Checks every field that does not need file access.
    pub fn validate(&self) -> Result<()> {
        crate::photodet::Efficiency::new(self.eta)?;
        layout::layout(self.scheme, self.lo_amplitude, self.mixing())?;
        if !self.lo_phase.is_finite() {
            return Err(invalid("lo_phase must be finite"));
        }
        if self.sample_count == 0 {
            return Err(invalid("sample_count must be positive"));
        }
        if !(self.normal_threshold > 0.0) {
            return Err(invalid("normal_threshold must be positive"));
        }
        if !(self.fock_tail > 0.0 && self.fock_tail < 1.0) {
            return Err(invalid("fock_tail must lie in (0, 1)"));
        }
        if self.backend == Backend::CoherentExact {
            for (name, s) in [("signal", &self.signal), ("idler", &self.idler)] {
                if s.coherent_amplitude().is_none() {
                    return Err(invalid(format!(
                        "backend coherent_exact needs a coherent {name} state"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<Layout> {
        layout::layout(self.scheme, self.lo_amplitude, self.mixing())
    }

    /// Heterodyne mixing `k`. The default `|z|^(2/3)` balances the `1/k`
    /// granularity of the rescaled current against the `(k/|z|)²` signal
    /// loss at the splitter.
    pub fn mixing(&self) -> f64 {
        self.heterodyne_mixing.unwrap_or_else(|| self.lo_amplitude.powf(2.0 / 3.0))
    }

    pub fn lo(&self) -> Complex64 {
        Complex64::from_polar(self.lo_amplitude, self.lo_phase)
    }
}

/// One joint outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhotocurrentSample {
    pub counts: Vec<u64>,
    pub z1: f64,
    pub z2: f64,
}

pub fn sample_moments(samples: &[PhotocurrentSample]) -> Result<Moments2> {
    Moments2::from_pairs(samples.iter().map(|s| (s.z1, s.z2)))
}

/// Draw `n` samples in fixed-size chunks, chunk `c` on stream `c`.
pub(crate) fn chunked<F>(seed: u64, n: usize, draw: F) -> Vec<PhotocurrentSample>
where
    F: Fn(&mut ChaCha8Rng) -> PhotocurrentSample + Sync,
{
    let chunks = n.div_ceil(CHUNK_SIZE);
    let parts: Vec<Vec<PhotocurrentSample>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_stream(seed, c as u64);
            let len = CHUNK_SIZE.min(n - c * CHUNK_SIZE);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// Run any scheme. Relative density-file paths resolve against `base`.
pub fn run_with_base(cfg: &SchemeConfig, base: Option<&Path>) -> Result<Vec<PhotocurrentSample>> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let signal = cfg.signal.resolve(base)?;
    let idler = cfg.idler.resolve(base)?;
    match cfg.backend {
        Backend::CoherentExact => {
            let (InputState::Coherent(a), InputState::Coherent(c)) = (&signal, &idler) else {
                return Err(invalid("backend coherent_exact needs coherent inputs"));
            };
            Ok(coherent::sample(&layout, cfg, *a, *c))
        }
        Backend::FockTruncated => fockengine::sample(&layout, cfg, &signal, &idler),
    }
}

pub fn run(cfg: &SchemeConfig) -> Result<Vec<PhotocurrentSample>> {
    run_with_base(cfg, None)
}

fn expect_kind(cfg: &SchemeConfig, kind: SchemeKind) -> Result<()> {
    if cfg.scheme != kind {
        return Err(invalid(format!("config is for {}, not {kind}", cfg.scheme)));
    }
    Ok(())
}

pub fn run_eightport(cfg: &SchemeConfig) -> Result<Vec<PhotocurrentSample>> {
    expect_kind(cfg, SchemeKind::EightPort)?;
    run(cfg)
}

pub fn run_sixport(cfg: &SchemeConfig) -> Result<Vec<PhotocurrentSample>> {
    expect_kind(cfg, SchemeKind::SixPort)?;
    run(cfg)
}

pub fn run_heterodyne(cfg: &SchemeConfig) -> Result<Vec<PhotocurrentSample>> {
    expect_kind(cfg, SchemeKind::Heterodyne)?;
    run(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coherent_cfg(kind: SchemeKind, alpha: Complex64) -> SchemeConfig {
        SchemeConfig::new(kind)
            .with_signal(StateSpec::coherent(alpha))
            .with_samples(100_000)
            .with_seed(5)
    }

    #[test]
    fn coherent_means_recover_signal() {
        let alpha = c64(2.0, 0.0);
        let tol = 3.0 * (0.5f64 / 1e5).sqrt();
        for kind in SchemeKind::ALL {
            let s = run(&coherent_cfg(kind, alpha)).unwrap();
            let m = sample_moments(&s).unwrap();
            assert!((m.mean[0] - 2.0).abs() < tol, "{kind}: {:?}", m.mean);
            assert!(m.mean[1].abs() < tol, "{kind}: {:?}", m.mean);
        }
    }

    #[test]
    fn vacuum_variance_law() {
        for kind in SchemeKind::ALL {
            for eta in [1.0, 0.5] {
                let cfg = SchemeConfig::new(kind).with_eta(eta).with_samples(100_000).with_seed(9);
                let m = sample_moments(&run(&cfg).unwrap()).unwrap();
                let target = 1.0 / (2.0 * eta);
                for v in [m.cov[0][0], m.cov[1][1]] {
                    assert!((v / target - 1.0).abs() < 0.03, "{kind} η={eta}: {v}");
                }
            }
        }
    }

    #[test]
    fn wrong_runner_or_backend_is_rejected() {
        let cfg = SchemeConfig::new(SchemeKind::SixPort);
        assert!(run_eightport(&cfg).is_err());
        let cfg = SchemeConfig::new(SchemeKind::EightPort).with_signal(StateSpec::Fock { n: 1 });
        assert!(run(&cfg).is_err());
        let cfg = SchemeConfig::new(SchemeKind::Heterodyne).with_lo(50.0).with_mixing(60.0);
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = coherent_cfg(SchemeKind::EightPort, c64(0.5, 0.5)).with_samples(10_000);
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }

    #[test]
    fn state_spec_round_trip() {
        let s: StateSpec = serde_json::from_str(r#"{"kind":"coherent","re":1.0,"im":-0.5}"#).unwrap();
        assert_eq!(s.coherent_amplitude(), Some(c64(1.0, -0.5)));
        let f: StateSpec = serde_json::from_str(r#"{"kind":"fock","n":2}"#).unwrap();
        let InputState::Density(r) = f.resolve(None).unwrap() else { panic!() };
        assert_eq!(r.diagonal_probabilities(), vec![0.0, 0.0, 1.0]);
        let d: StateSpec = serde_json::from_str(
            r#"{"kind":"density","cutoff":2,"re":[0.5,0.0,0.0,0.5],"im":[0,0,0,0]}"#,
        )
        .unwrap();
        assert!(d.resolve(None).is_ok());
    }
}
