//! Passive linear-optical networks.
//!
//! A network on `K` modes is a unitary `K×K` scattering matrix `S` acting on
//! mode amplitudes, `b_k = Σ_l S_kl a_l`. [`lift_to_fock`] turns it into the
//! Fock-space unitary `U` with `U† a_k U = Σ_l S_kl a_l`.

use crate::error::{invalid, Error, Result};
use crate::fock::{ravel, unravel, ModeOperator};
use crate::{c64, dense_dim_limit, CMatrix, Complex64};
use std::f64::consts::{FRAC_PI_3, PI};

/// Unitarity tolerance for [`ScatteringMatrix::new`].
pub const UNITARY_TOL: f64 = 1e-12;

/// Unitary matrix acting on mode amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringMatrix {
    matrix: CMatrix,
}

impl ScatteringMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(invalid("scattering matrix must be square and nonempty"));
        }
        let s = Self { matrix };
        let defect = s.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(invalid(format!("matrix is not unitary (defect {defect:.2e})")));
        }
        Ok(s)
    }

    pub fn identity(size: usize) -> Self {
        Self {
            matrix: CMatrix::identity(size, size),
        }
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `‖S S† − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.size();
        let d = &self.matrix * self.matrix.adjoint() - CMatrix::identity(n, n);
        d.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Network `other` followed by `self`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.size() != other.size() {
            return Err(invalid("scattering matrices of different sizes"));
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
        })
    }

    /// Output amplitudes for the given input amplitudes.
    pub fn apply(&self, inputs: &[Complex64]) -> Result<Vec<Complex64>> {
        if inputs.len() != self.size() {
            return Err(invalid("input amplitude count does not match matrix size"));
        }
        Ok((0..self.size())
            .map(|k| (0..self.size()).map(|l| self.matrix[(k, l)] * inputs[l]).sum())
            .collect())
    }
}

/// Beam splitter `[[√τ, √(1−τ)], [−√(1−τ), √τ]]`.
pub fn beamsplitter_matrix(tau: f64) -> Result<ScatteringMatrix> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid(format!("transmissivity {tau} outside [0, 1]")));
    }
    let t = tau.sqrt();
    let r = (1.0 - tau).sqrt();
    Ok(ScatteringMatrix {
        matrix: CMatrix::from_row_slice(2, 2, &[c64(t, 0.0), c64(r, 0.0), c64(-r, 0.0), c64(t, 0.0)]),
    })
}

/// Single-mode phase shifter `e^{iφ}`.
pub fn phase_shifter_matrix(phi: f64) -> ScatteringMatrix {
    ScatteringMatrix {
        matrix: CMatrix::from_element(1, 1, Complex64::from_polar(1.0, phi)),
    }
}

/// Unitary 4-point discrete Fourier coupler, `M_kl = i^{kl}/2`.
///
/// Rows 0, 1 and 3 agree with the usual printed form of the canonical
/// four-port coupler; row 2 is `(1, −1, 1, −1)`, the only choice that keeps
/// the matrix unitary.
pub fn eightport_matrix() -> ScatteringMatrix {
    let powers = [c64(1.0, 0.0), c64(0.0, 1.0), c64(-1.0, 0.0), c64(0.0, -1.0)];
    let m = CMatrix::from_fn(4, 4, |k, l| powers[(k * l) % 4] * 0.5);
    ScatteringMatrix { matrix: m }
}

/// Symmetric triple coupler, `T_jk = ω^{jk}/√3` with `ω = e^{2πi/3}`.
pub fn triple_coupler_matrix() -> ScatteringMatrix {
    let s = 1.0 / 3f64.sqrt();
    let m = CMatrix::from_fn(3, 3, |j, k| {
        Complex64::from_polar(s, 2.0 * FRAC_PI_3 * ((j * k) % 3) as f64)
    });
    ScatteringMatrix { matrix: m }
}

/// One passive element of a network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Element {
    BeamSplitter { modes: (usize, usize), tau: f64 },
    PhaseShifter { mode: usize, phi: f64 },
}

impl Element {
    fn embedded(&self, size: usize) -> Result<CMatrix> {
        let mut m = CMatrix::identity(size, size);
        match *self {
            Element::BeamSplitter { modes: (i, j), tau } => {
                if i >= size || j >= size || i == j {
                    return Err(invalid(format!("bad beam-splitter modes ({i}, {j})")));
                }
                let bs = beamsplitter_matrix(tau)?;
                m[(i, i)] = bs.matrix[(0, 0)];
                m[(i, j)] = bs.matrix[(0, 1)];
                m[(j, i)] = bs.matrix[(1, 0)];
                m[(j, j)] = bs.matrix[(1, 1)];
            }
            Element::PhaseShifter { mode, phi } => {
                if mode >= size {
                    return Err(invalid(format!("phase shifter mode {mode} out of range")));
                }
                m[(mode, mode)] = Complex64::from_polar(1.0, phi);
            }
        }
        Ok(m)
    }
}

/// Elements in the order light traverses them.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementSequence {
    pub size: usize,
    pub elements: Vec<Element>,
}

impl ElementSequence {
    /// Product of the element matrices, last element leftmost.
    pub fn compose(&self) -> Result<ScatteringMatrix> {
        let mut acc = CMatrix::identity(self.size, self.size);
        for e in &self.elements {
            acc = e.embedded(self.size)? * acc;
        }
        ScatteringMatrix::new(acc)
    }
}

/// Beam-splitter and phase-shifter realisation of the triple coupler.
#[derive(Clone, Debug)]
pub struct TripleCouplerDecomposition {
    pub sequence: ElementSequence,
    /// Phases applied to the inputs before the sequence.
    pub input_phases: Vec<f64>,
    /// Phases applied to the outputs after the sequence.
    pub output_phases: Vec<f64>,
    /// `‖diag(out)·V·diag(in) − T‖_max`.
    pub residual: f64,
}

impl TripleCouplerDecomposition {
    pub fn corrected_matrix(&self) -> Result<CMatrix> {
        let v = self.sequence.compose()?;
        let din = phase_diag(&self.input_phases);
        let dout = phase_diag(&self.output_phases);
        Ok(dout * v.matrix() * din)
    }
}

fn phase_diag(phases: &[f64]) -> CMatrix {
    let d = nalgebra::DVector::from_iterator(
        phases.len(),
        phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
    );
    CMatrix::from_diagonal(&d)
}

/// Four 50:50 beam splitters and two phase shifters, `φ₁ = arccos(1/3)` and
/// `φ₂ = φ₁/2`, realising the symmetric triple coupler up to external phases.
///
/// Modes are indexed 0, 1, 2. `φ₁` sits on mode 0 between the two splitters
/// that couple modes 0 and 1; `φ₂` sits on mode 2 after the first splitter
/// that couples modes 1 and 2.
pub fn triple_coupler_decomposition() -> Result<TripleCouplerDecomposition> {
    let phi1 = (1.0f64 / 3.0).acos();
    let phi2 = phi1 / 2.0;
    let seq = ElementSequence {
        size: 3,
        elements: vec![
            Element::BeamSplitter { modes: (1, 2), tau: 0.5 },
            Element::PhaseShifter { mode: 2, phi: phi2 },
            Element::BeamSplitter { modes: (0, 1), tau: 0.5 },
            Element::PhaseShifter { mode: 0, phi: phi1 },
            Element::BeamSplitter { modes: (0, 1), tau: 0.5 },
            Element::BeamSplitter { modes: (1, 2), tau: 0.5 },
        ],
    };
    let v = seq.compose()?;
    let t = triple_coupler_matrix();
    let (input_phases, output_phases) = fit_external_phases(v.matrix(), t.matrix())?;
    let mut d = TripleCouplerDecomposition {
        sequence: seq,
        input_phases,
        output_phases,
        residual: 0.0,
    };
    let diff = d.corrected_matrix()? - t.matrix();
    d.residual = diff.iter().fold(0.0, |acc, z| acc.max(z.norm()));
    Ok(d)
}

/// Phases `(in, out)` with `diag(e^{i out})·V·diag(e^{i in}) ≈ T`, fitted on the
/// first row and first column. Both matrices need a nonvanishing first row
/// and column.
pub fn fit_external_phases(v: &CMatrix, t: &CMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = v.nrows();
    if v.shape() != t.shape() || !v.is_square() {
        return Err(invalid("phase fit needs two square matrices of equal size"));
    }
    if (0..n).any(|k| v[(0, k)].norm() < 1e-9 || v[(k, 0)].norm() < 1e-9) {
        return Err(invalid("phase fit needs a nonvanishing first row and column"));
    }
    let inp: Vec<f64> = (0..n).map(|k| t[(0, k)].arg() - v[(0, k)].arg()).collect();
    let out: Vec<f64> = (0..n)
        .map(|j| wrap(t[(j, 0)].arg() - v[(j, 0)].arg() - inp[0]))
        .collect();
    Ok((inp.into_iter().map(wrap).collect(), out))
}

fn wrap(phi: f64) -> f64 {
    let mut p = phi % (2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    } else if p <= -PI {
        p += 2.0 * PI;
    }
    p
}

/// Hermitian `h` with `S = exp(i h)`, eigenphases taken in `(−π, π]`.
pub fn unitary_log(s: &ScatteringMatrix) -> CMatrix {
    let (q, t) = s.matrix.clone().schur().unpack();
    let n = s.size();
    let mut d = CMatrix::zeros(n, n);
    for k in 0..n {
        let mut arg = t[(k, k)].arg();
        if arg <= -PI {
            arg += 2.0 * PI;
        }
        d[(k, k)] = c64(arg, 0.0);
    }
    let h = &q * d * q.adjoint();
    (&h + h.adjoint()) * c64(0.5, 0.0)
}

/// Fock-space unitary of a passive network on a box-truncated space.
///
/// Built as `exp(iG)` with `G = Σ h_kl a†_k a_l` and `S = exp(ih)`. `G`
/// conserves total photon number, so the exponential is taken block by block.
/// Blocks with total photon number below every cutoff are exact; higher
/// blocks lose the states that leave the box and are only approximately
/// correct (they stay unitary).
pub fn lift_to_fock(s: &ScatteringMatrix, cutoffs: &[usize]) -> Result<ModeOperator> {
    let k = s.size();
    if cutoffs.len() != k {
        return Err(invalid(format!(
            "{} cutoffs given for a {k}-mode network",
            cutoffs.len()
        )));
    }
    if cutoffs.contains(&0) {
        return Err(invalid("cutoffs must be positive"));
    }
    let dim = cutoffs
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c))
        .unwrap_or(usize::MAX);
    let limit = dense_dim_limit();
    if dim > limit {
        return Err(Error::ResourceLimit {
            what: "lifted network unitary",
            requested: dim,
            limit,
        });
    }
    let h = unitary_log(s);

    let max_n: usize = cutoffs.iter().map(|c| c - 1).sum();
    let mut sectors: Vec<Vec<usize>> = vec![Vec::new(); max_n + 1];
    let mut local = vec![0usize; dim];
    for idx in 0..dim {
        let occ = unravel(idx, cutoffs);
        let n: usize = occ.iter().sum();
        local[idx] = sectors[n].len();
        sectors[n].push(idx);
    }

    let mut u = CMatrix::zeros(dim, dim);
    for states in &sectors {
        let m = states.len();
        if m == 0 {
            continue;
        }
        let mut g = CMatrix::zeros(m, m);
        for (j, &col) in states.iter().enumerate() {
            let occ = unravel(col, cutoffs);
            for kk in 0..k {
                for l in 0..k {
                    let hkl = h[(kk, l)];
                    if hkl.norm() == 0.0 || occ[l] == 0 {
                        continue;
                    }
                    if kk == l {
                        g[(j, j)] += hkl * occ[l] as f64;
                        continue;
                    }
                    if occ[kk] + 1 >= cutoffs[kk] {
                        continue;
                    }
                    let mut target = occ.clone();
                    target[l] -= 1;
                    target[kk] += 1;
                    let amp = ((occ[l] * (occ[kk] + 1)) as f64).sqrt();
                    let i = local[ravel(&target, cutoffs)];
                    g[(i, j)] += hkl * amp;
                }
            }
        }
        let block = (g * c64(0.0, 1.0)).exp();
        for (j, &col) in states.iter().enumerate() {
            for (i, &row) in states.iter().enumerate() {
                u[(row, col)] = block[(i, j)];
            }
        }
    }
    ModeOperator::new(cutoffs.to_vec(), u)
}
