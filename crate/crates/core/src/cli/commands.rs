//! The subcommands, as library calls returning what they wrote.

use super::config::{ExperimentConfig, Format, PropensityConfig};
use super::output::{grid_csv, samples_csv, samples_json};
use crate::error::{invalid, Error, Result};
use crate::fock::{annihilation, coherent_cutoff, coherent_vector, DensityOperator, FockVector};
use crate::linopt::{triple_coupler_decomposition, Element};
use crate::phasespace::{
    distribution_distance, empirical_density, propensity, DistanceReport, GridSpec, PhaseSpaceGrid,
};
use crate::photodet::{equivalence_check, Efficiency};
use crate::schemes::{
    compare_samples, photocurrent_operators, run_with_base, sample_moments, EquivalenceReport,
    InputState, OperatorCutoffs, StateSpec,
};
use crate::{c64, Complex64};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};

/// Largest operator-level difference accepted as equivalent.
pub const OPERATOR_TOLERANCE: f64 = 1e-12;
/// Loss-model agreement required by `loss-check`.
pub const LOSS_TOLERANCE: f64 = 1e-10;
/// Coarsening of the propensity grid for χ² binning.
pub const CHI_SQUARE_BLOCK: usize = 4;

/// Where and how a command writes.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub format: Format,
    /// Directory that relative paths in the config resolve against.
    pub base: Option<PathBuf>,
}

impl RunContext {
    pub fn new(cfg: &ExperimentConfig, out: Option<PathBuf>, format: Option<Format>, base: Option<PathBuf>) -> Self {
        Self {
            out_dir: out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out")),
            format: format.or(cfg.format).unwrap_or_default(),
            base,
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents)?;
        Ok(path)
    }
}

/// Files written and, for checking commands, the verdict.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub verdict: Option<bool>,
    pub message: String,
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))
}

/// Resolve a state to a single-mode density operator.
pub fn state_density(spec: &StateSpec, base: Option<&Path>) -> Result<DensityOperator> {
    match spec.resolve(base)? {
        InputState::Coherent(z) => Ok(coherent_vector(z, coherent_cutoff(z))?.to_density()),
        InputState::Density(d) => Ok(d),
    }
}

fn mean_amplitude(rho: &DensityOperator) -> Result<Complex64> {
    rho.expectation(&annihilation(rho.dim().max(2))?).or_else(|_| Ok(c64(0.0, 0.0)))
}

/// Analytic propensity for the given inputs; the grid half extent defaults
/// to `max(6, |centroid| + 5)`.
pub fn compute_propensity(
    p: &PropensityConfig,
    half_extent: Option<f64>,
    points: usize,
    base: Option<&Path>,
) -> Result<PhaseSpaceGrid> {
    let a = state_density(&p.signal, base)?;
    let b = state_density(&p.probe, base)?;
    let l = match half_extent {
        Some(l) => l,
        None => {
            let centroid = mean_amplitude(&a)? + mean_amplitude(&b)?.conj();
            GridSpec::default_for(centroid).half_extent
        }
    };
    propensity(&a, &b, GridSpec::new(l, points)?, p.eta)
}

pub fn simulate(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Outcome> {
    let s = cfg.single_scheme()?;
    let samples = run_with_base(&s, ctx.base.as_deref())?;
    let m = sample_moments(&samples)?;
    let mut out = Outcome::default();
    out.files.push(match ctx.format {
        Format::Csv => ctx.write("samples.csv", &samples_csv(&samples))?,
        Format::Json => ctx.write("samples.json", &samples_json(&samples)?)?,
    });
    let summary = json!({
        "scheme": s.scheme,
        "backend": s.backend,
        "n": m.n,
        "seed": s.seed,
        "eta": s.eta,
        "lo_amplitude": s.lo_amplitude,
        "mean": m.mean,
        "cov": m.cov,
    });
    out.files.push(ctx.write("summary.json", &to_json(&summary)?)?);
    out.message = format!(
        "{} samples from {}: mean ({:.4}, {:.4}), variances ({:.4}, {:.4})",
        m.n, s.scheme, m.mean[0], m.mean[1], m.cov[0][0], m.cov[1][1]
    );
    Ok(out)
}

pub fn propensity_cmd(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Outcome> {
    let p = cfg.propensity_inputs()?;
    let grid = compute_propensity(&p, cfg.grid.half_extent, cfg.grid.points, ctx.base.as_deref())?;
    let mut out = Outcome::default();
    out.files.push(match ctx.format {
        Format::Csv => ctx.write("propensity.csv", &grid_csv(&grid, p.eta))?,
        Format::Json => {
            let n = grid.spec.points;
            let rows: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|l| grid.real(j, l)).collect()).collect();
            let doc = json!({
                "normalization": "integral of K over d^2 alpha = 1",
                "eta": p.eta,
                "half_extent": grid.spec.half_extent,
                "points": n,
                "values": rows,
            });
            ctx.write("propensity.json", &to_json(&doc)?)?
        }
    });
    let (mean, cov) = grid.moments();
    out.message = format!(
        "propensity on {n}x{n}, L = {l}: integral {:.6}, max {:.6}, centroid ({:.4}, {:.4}), variances ({:.4}, {:.4})",
        grid.integral(),
        grid.max_real(),
        mean[0],
        mean[1],
        cov[0][0],
        cov[1][1],
        n = grid.spec.points,
        l = grid.spec.half_extent,
    );
    Ok(out)
}

/// Operator, sample and distribution-level comparison of two schemes.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceDocument {
    pub operator_delta: f64,
    pub operator_tolerance: f64,
    pub samples: EquivalenceReport,
    pub chi_square_a: DistanceReport,
    pub chi_square_b: DistanceReport,
    /// Operator delta within tolerance and both KS tests passing.
    pub equivalent: bool,
}

pub fn equivalence(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Outcome> {
    let [a, b] = cfg.scheme_pair()?;
    let cut = OperatorCutoffs::default();
    let oa = photocurrent_operators(a.scheme, a.eta, cut)?;
    let ob = photocurrent_operators(b.scheme, b.eta, cut)?;
    let operator_delta = oa.z1.max_abs_diff(&ob.z1)?.max(oa.z2.max_abs_diff(&ob.z2)?);

    let base = ctx.base.as_deref();
    let sa = run_with_base(&a, base)?;
    let sb = run_with_base(&b, base)?;
    let mut samples = compare_samples(&sa, &sb, cfg.significance)?;
    samples.label_a = a.scheme.to_string();
    samples.label_b = b.scheme.to_string();

    let p = PropensityConfig {
        signal: a.signal.clone(),
        probe: a.idler.clone(),
        eta: a.eta,
    };
    let grid = compute_propensity(&p, cfg.grid.half_extent, cfg.grid.points, base)?;
    let chi = |s| -> Result<DistanceReport> {
        let emp = empirical_density(s, grid.spec)?;
        distribution_distance(&grid, &emp, s.len(), CHI_SQUARE_BLOCK, cfg.significance)
    };
    let doc = EquivalenceDocument {
        operator_delta,
        operator_tolerance: OPERATOR_TOLERANCE,
        equivalent: operator_delta <= OPERATOR_TOLERANCE && samples.equivalent,
        chi_square_a: chi(&sa)?,
        chi_square_b: chi(&sb)?,
        samples,
    };
    let mut out = Outcome::default();
    out.files.push(ctx.write("equivalence.json", &to_json(&doc)?)?);
    out.verdict = Some(doc.equivalent);
    out.message = format!(
        "{} vs {}: {} (operator delta {:.2e}, KS p = {:.3} / {:.3})",
        a.scheme,
        b.scheme,
        if doc.equivalent { "equivalent" } else { "not equivalent" },
        operator_delta,
        doc.samples.z1.ks.p_value,
        doc.samples.z2.ks.p_value,
    );
    Ok(out)
}

/// Signals compared by `loss-check` when none are configured.
pub fn stock_loss_signals() -> Vec<StateSpec> {
    let mixed = {
        let p = [0.4, 0.3, 0.2, 0.1];
        let mut re = vec![0.0; 16];
        for (i, v) in p.iter().enumerate() {
            re[i * 4 + i] = *v;
        }
        StateSpec::Density { cutoff: 4, re, im: vec![0.0; 16] }
    };
    vec![
        StateSpec::Vacuum,
        StateSpec::Fock { n: 1 },
        StateSpec::Fock { n: 2 },
        StateSpec::coherent(c64(0.5, 0.0)),
        StateSpec::coherent(c64(1.0, 0.0)),
        StateSpec::coherent(c64(2.0, 0.0)),
        mixed,
    ]
}

fn loss_density(spec: &StateSpec, cutoff: usize, base: Option<&Path>) -> Result<DensityOperator> {
    match spec {
        StateSpec::Vacuum => Ok(FockVector::number(0, cutoff)?.to_density()),
        StateSpec::Coherent { re, im } => Ok(coherent_vector(c64(*re, *im), cutoff)?.to_density()),
        StateSpec::Fock { n } if *n < cutoff => Ok(FockVector::number(*n, cutoff)?.to_density()),
        other => state_density(other, base),
    }
}

#[derive(Clone, Debug, Serialize)]
struct LossRow {
    state: String,
    eta: f64,
    max_abs_diff: f64,
}

pub fn loss_check(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Outcome> {
    let lc = cfg.loss_check.clone().unwrap_or_default();
    let signals = if lc.signals.is_empty() { stock_loss_signals() } else { lc.signals };
    let mut rows = Vec::new();
    for s in &signals {
        let rho = loss_density(s, lc.cutoff, ctx.base.as_deref())?;
        for &eta in &lc.eta {
            let r = equivalence_check(&rho, Efficiency::new(eta)?)?;
            rows.push(LossRow {
                state: serde_json::to_string(s).map_err(|e| Error::Parse(e.to_string()))?,
                eta,
                max_abs_diff: r.max_abs_diff,
            });
        }
    }
    let worst = rows.iter().fold(0.0, |a: f64, r| a.max(r.max_abs_diff));
    let pass = worst <= LOSS_TOLERANCE;
    let mut out = Outcome::default();
    out.files.push(match ctx.format {
        Format::Json => ctx.write(
            "loss_check.json",
            &to_json(&json!({ "rows": rows, "max_abs_diff": worst, "tolerance": LOSS_TOLERANCE, "pass": pass }))?,
        )?,
        Format::Csv => {
            let mut t = String::from("state,eta,max_abs_diff\n");
            for r in &rows {
                t.push_str(&format!("\"{}\",{},{}\n", r.state.replace('"', "\"\""), r.eta, r.max_abs_diff));
            }
            ctx.write("loss_check.csv", &t)?
        }
    });
    out.verdict = Some(pass);
    out.message = format!("{} cases, worst max-abs difference {worst:.2e}", rows.len());
    Ok(out)
}

pub fn decompose(ctx: &RunContext) -> Result<Outcome> {
    let d = triple_coupler_decomposition()?;
    let rows: Vec<(String, usize, Option<usize>, f64)> = d
        .sequence
        .elements
        .iter()
        .map(|e| match *e {
            Element::BeamSplitter { modes: (i, j), tau } => ("beam_splitter".into(), i, Some(j), tau),
            Element::PhaseShifter { mode, phi } => ("phase_shifter".into(), mode, None, phi),
        })
        .collect();
    let mut out = Outcome::default();
    out.files.push(match ctx.format {
        Format::Json => {
            let elements: Vec<_> = rows
                .iter()
                .map(|(kind, a, b, p)| match b {
                    Some(b) => json!({ "element": kind, "modes": [a, b], "tau": p }),
                    None => json!({ "element": kind, "mode": a, "phi": p }),
                })
                .collect();
            let doc = json!({
                "elements": elements,
                "input_phases": d.input_phases,
                "output_phases": d.output_phases,
                "residual": d.residual,
            });
            ctx.write("decomposition.json", &to_json(&doc)?)?
        }
        Format::Csv => {
            let mut t = String::from("index,element,mode_a,mode_b,parameter\n");
            for (i, (kind, a, b, p)) in rows.iter().enumerate() {
                let b = b.map(|b| b.to_string()).unwrap_or_default();
                t.push_str(&format!("{i},{kind},{a},{b},{p}\n"));
            }
            ctx.write("decomposition.csv", &t)?
        }
    });
    out.message = format!("{} elements, residual {:.2e}", rows.len(), d.residual);
    if d.residual > 1e-10 {
        return Err(invalid(format!("decomposition residual {} above 1e-10", d.residual)));
    }
    Ok(out)
}
