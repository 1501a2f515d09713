//! Truncated Fock-space linear algebra.
//!
//! Every object carries its per-mode cutoffs: mode `k` spans `|0⟩..|cutoff_k − 1⟩`.
//! Multimode spaces use the Kronecker ordering with mode 0 most significant,
//! so the joint index of `|n_0, n_1, …⟩` is `Σ n_k · stride_k` with the last
//! mode having stride 1.

use crate::error::{invalid, Result};
use crate::{c64, CMatrix, CVector, Complex64};
use log::warn;

/// Tolerance for the "normalized" flag of a state.
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Cutoff that keeps the Poisson tail of a coherent state `|z⟩` below ~1e-8.
pub fn coherent_cutoff(z: Complex64) -> usize {
    let r = z.norm();
    (r * r + 6.0 * r + 10.0).ceil() as usize
}

fn total_dim(cutoffs: &[usize]) -> usize {
    cutoffs.iter().product()
}

fn check_cutoffs(cutoffs: &[usize]) -> Result<()> {
    if cutoffs.is_empty() {
        return Err(invalid("at least one mode is required"));
    }
    if cutoffs.contains(&0) {
        return Err(invalid("cutoffs must be positive"));
    }
    Ok(())
}

/// Split a joint index into per-mode occupation numbers.
pub fn unravel(mut index: usize, cutoffs: &[usize]) -> Vec<usize> {
    let mut out = vec![0; cutoffs.len()];
    for (k, &c) in cutoffs.iter().enumerate().rev() {
        out[k] = index % c;
        index /= c;
    }
    out
}

/// Joint index of the given occupation numbers.
pub fn ravel(occupations: &[usize], cutoffs: &[usize]) -> usize {
    occupations
        .iter()
        .zip(cutoffs)
        .fold(0, |acc, (&n, &c)| acc * c + n)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Pure state in a truncated (possibly multimode) number basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    cutoffs: Vec<usize>,
    amplitudes: CVector,
}

impl FockVector {
    pub fn new(cutoffs: Vec<usize>, amplitudes: CVector) -> Result<Self> {
        check_cutoffs(&cutoffs)?;
        if amplitudes.len() != total_dim(&cutoffs) {
            return Err(invalid(format!(
                "amplitude vector has length {}, cutoffs imply {}",
                amplitudes.len(),
                total_dim(&cutoffs)
            )));
        }
        let v = Self { cutoffs, amplitudes };
        if v.norm_sqr() > 1.0 + NORM_TOL {
            return Err(invalid(format!("squared norm {} exceeds 1", v.norm_sqr())));
        }
        Ok(v)
    }

    /// Number state `|n⟩` of a single mode.
    pub fn number(n: usize, cutoff: usize) -> Result<Self> {
        if n >= cutoff {
            return Err(invalid(format!("|{n}⟩ does not fit under cutoff {cutoff}")));
        }
        let mut amps = CVector::zeros(cutoff);
        amps[n] = c64(1.0, 0.0);
        Self::new(vec![cutoff], amps)
    }

    pub fn vacuum(cutoff: usize) -> Result<Self> {
        Self::number(0, cutoff)
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// Probability mass missing because of the truncation, `1 − ‖ψ‖²`.
    pub fn truncation_error(&self) -> f64 {
        (1.0 - self.norm_sqr()).max(0.0)
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expectation(&self, op: &ModeOperator) -> Result<Complex64> {
        if op.cutoffs != self.cutoffs {
            return Err(invalid("operator and state live on different spaces"));
        }
        Ok(self.amplitudes.dotc(&(&op.matrix * &self.amplitudes)))
    }

    pub fn to_density(&self) -> DensityOperator {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityOperator {
            cutoffs: self.cutoffs.clone(),
            matrix: m,
        }
    }

    /// Photon-number probabilities `|c_n|²` of a single-mode state.
    pub fn number_probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Coherent state `|z⟩` truncated at `cutoff`.
///
/// Amplitudes are `exp(−|z|²/2) zⁿ/√n!`; the lost tail is reported through
/// [`FockVector::truncation_error`]. A warning is logged when the cutoff is
/// below `|z|² + 6|z|`.
pub fn coherent_vector(z: Complex64, cutoff: usize) -> Result<FockVector> {
    if cutoff == 0 {
        return Err(invalid("cutoff must be positive"));
    }
    let r = z.norm();
    if r * r + 6.0 * r >= cutoff as f64 {
        warn!(
            "cutoff {cutoff} is small for coherent amplitude |z| = {r:.3}; expect truncation"
        );
    }
    let mut amps = CVector::zeros(cutoff);
    let mut c = c64((-0.5 * r * r).exp(), 0.0);
    for n in 0..cutoff {
        amps[n] = c;
        c = c * z / ((n + 1) as f64).sqrt();
    }
    FockVector::new(vec![cutoff], amps)
}

/// Density operator over a tensor-product number basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    cutoffs: Vec<usize>,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity (1e-10) and trace (at most 1 + 1e-10).
    pub fn new(cutoffs: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        check_cutoffs(&cutoffs)?;
        let d = total_dim(&cutoffs);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(invalid(format!(
                "density matrix is {}×{}, cutoffs imply {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = hermitian_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(invalid(format!("density matrix not Hermitian (defect {defect:.2e})")));
        }
        let tr = matrix.trace().re;
        if !(0.0..=1.0 + NORM_TOL).contains(&tr) {
            return Err(invalid(format!("density matrix trace {tr} outside [0, 1]")));
        }
        Ok(Self { cutoffs, matrix })
    }

    /// Diagonal (classical mixture of number states) single-mode operator.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|&p| p < 0.0) {
            return Err(invalid("probabilities must be nonnegative"));
        }
        let d = CVector::from_iterator(probs.len(), probs.iter().map(|&p| c64(p, 0.0)));
        Self::new(vec![probs.len()], CMatrix::from_diagonal(&d))
    }

    /// Thermal state with mean photon number `nbar`, truncated at `cutoff`.
    pub fn thermal(nbar: f64, cutoff: usize) -> Result<Self> {
        if nbar < 0.0 {
            return Err(invalid("mean photon number must be nonnegative"));
        }
        let x = nbar / (1.0 + nbar);
        let probs: Vec<f64> = (0..cutoff)
            .map(|n| x.powi(n as i32) / (1.0 + nbar))
            .collect();
        Self::diagonal(&probs)
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `1 − Tr ρ`, the mass lost to truncation.
    pub fn truncation_error(&self) -> f64 {
        (1.0 - self.trace()).max(0.0)
    }

    pub fn expectation(&self, op: &ModeOperator) -> Result<Complex64> {
        if op.cutoffs != self.cutoffs {
            return Err(invalid("operator and state live on different spaces"));
        }
        Ok((&self.matrix * &op.matrix).trace())
    }

    /// Smallest eigenvalue; intended for spot checks on small dimensions.
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = self.matrix.clone().symmetric_eigen();
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Eigendecomposition into weighted pure states, dropping weights below `tol`.
    pub fn pure_components(&self, tol: f64) -> Vec<(f64, FockVector)> {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut out = Vec::new();
        for (k, &w) in eig.eigenvalues.iter().enumerate() {
            if w > tol {
                let v = eig.eigenvectors.column(k).into_owned();
                out.push((
                    w,
                    FockVector {
                        cutoffs: self.cutoffs.clone(),
                        amplitudes: v,
                    },
                ));
            }
        }
        out
    }

    /// Conjugate by a unitary: `U ρ U†`.
    pub fn evolve(&self, unitary: &ModeOperator) -> Result<Self> {
        if unitary.cutoffs != self.cutoffs {
            return Err(invalid("unitary and state live on different spaces"));
        }
        let m = &unitary.matrix * &self.matrix * unitary.matrix.adjoint();
        // Re-symmetrize roundoff.
        let m = (&m + m.adjoint()) * c64(0.5, 0.0);
        Ok(Self {
            cutoffs: self.cutoffs.clone(),
            matrix: m,
        })
    }

    /// Diagonal `⟨n|ρ|n⟩` of a single-mode operator.
    pub fn diagonal_probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.matrix[(n, n)].re).collect()
    }
}

/// Operator on a truncated (possibly multimode) Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator {
    cutoffs: Vec<usize>,
    matrix: CMatrix,
    hermitian: bool,
}

impl ModeOperator {
    pub fn new(cutoffs: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        check_cutoffs(&cutoffs)?;
        let d = total_dim(&cutoffs);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(invalid(format!(
                "operator is {}×{}, cutoffs imply {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self::from_parts(cutoffs, matrix))
    }

    fn from_parts(cutoffs: Vec<usize>, matrix: CMatrix) -> Self {
        let hermitian = hermitian_defect(&matrix) <= 1e-12;
        Self {
            cutoffs,
            matrix,
            hermitian,
        }
    }

    pub fn identity(cutoffs: &[usize]) -> Result<Self> {
        check_cutoffs(cutoffs)?;
        let d = total_dim(cutoffs);
        Ok(Self::from_parts(cutoffs.to_vec(), CMatrix::identity(d, d)))
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> Self {
        Self::from_parts(self.cutoffs.clone(), self.matrix.adjoint())
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.cutoffs != other.cutoffs {
            return Err(invalid(format!(
                "operators act on different spaces {:?} vs {:?}",
                self.cutoffs, other.cutoffs
            )));
        }
        Ok(())
    }

    /// Operator product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self::from_parts(self.cutoffs.clone(), &self.matrix * &other.matrix))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self::from_parts(self.cutoffs.clone(), &self.matrix + &other.matrix))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self::from_parts(self.cutoffs.clone(), &self.matrix - &other.matrix))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_parts(self.cutoffs.clone(), &self.matrix * factor)
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        let m = &self.matrix * &other.matrix - &other.matrix * &self.matrix;
        Ok(Self::from_parts(self.cutoffs.clone(), m))
    }

    /// Largest entry modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_space(other)?;
        Ok(max_abs(&(&self.matrix - &other.matrix)))
    }

    /// Place a single-mode operator on `mode` of a multimode space.
    pub fn embed(&self, mode: usize, cutoffs: &[usize]) -> Result<Self> {
        if self.cutoffs.len() != 1 {
            return Err(invalid("only single-mode operators can be embedded"));
        }
        if mode >= cutoffs.len() || cutoffs[mode] != self.cutoffs[0] {
            return Err(invalid(format!(
                "mode {mode} with cutoff {} does not match target cutoffs {cutoffs:?}",
                self.cutoffs[0]
            )));
        }
        let factors: Vec<FockItem> = cutoffs
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                if k == mode {
                    Ok(FockItem::Operator(self.clone()))
                } else {
                    ModeOperator::identity(&[c]).map(FockItem::Operator)
                }
            })
            .collect::<Result<_>>()?;
        match tensor(&factors)? {
            FockItem::Operator(op) => Ok(op),
            _ => unreachable!("tensor of operators is an operator"),
        }
    }
}

/// Annihilation operator `a` with `√n` on the `(n−1, n)` entries.
pub fn annihilation(cutoff: usize) -> Result<ModeOperator> {
    if cutoff < 2 {
        return Err(invalid(format!("annihilation needs cutoff ≥ 2, got {cutoff}")));
    }
    let mut m = CMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        m[(n - 1, n)] = c64((n as f64).sqrt(), 0.0);
    }
    Ok(ModeOperator::from_parts(vec![cutoff], m))
}

pub fn creation(cutoff: usize) -> Result<ModeOperator> {
    Ok(annihilation(cutoff)?.adjoint())
}

/// Number operator `a†a`, exact on every retained level.
pub fn number(cutoff: usize) -> Result<ModeOperator> {
    if cutoff == 0 {
        return Err(invalid("cutoff must be positive"));
    }
    let d = CVector::from_iterator(cutoff, (0..cutoff).map(|n| c64(n as f64, 0.0)));
    Ok(ModeOperator::from_parts(vec![cutoff], CMatrix::from_diagonal(&d)))
}

/// Field quadrature `â(φ) = (a†e^{iφ} + a e^{−iφ})/2`.
pub fn quadrature(phi: f64, cutoff: usize) -> Result<ModeOperator> {
    let a = annihilation(cutoff)?;
    let e = Complex64::from_polar(1.0, phi);
    let m = (a.matrix.adjoint() * e + &a.matrix * e.conj()) * c64(0.5, 0.0);
    Ok(ModeOperator::from_parts(vec![cutoff], m))
}

/// Displacement `D(γ) = exp(γa† − γ̄a)` by dense matrix exponential.
///
/// Accurate on levels well below the cutoff; the truncated generator
/// corrupts the top of the ladder.
pub fn displacement(gamma: Complex64, cutoff: usize) -> Result<ModeOperator> {
    let a = annihilation(cutoff)?;
    let gen = a.matrix.adjoint() * gamma - &a.matrix * gamma.conj();
    Ok(ModeOperator::from_parts(vec![cutoff], gen.exp()))
}

/// Closed-form matrix element `⟨m|D(γ)|n⟩` in the untruncated space.
///
/// Uses generalized Laguerre polynomials; evaluated in log space for the
/// prefactor so large `|γ|` stays finite.
pub fn displacement_element(m: usize, n: usize, gamma: Complex64) -> Complex64 {
    let x = gamma.norm_sqr();
    let (lo, hi) = if m >= n { (n, m) } else { (m, n) };
    let k = hi - lo;
    let lag = laguerre(lo, k as f64, x);
    if lag == 0.0 {
        return c64(0.0, 0.0);
    }
    let ln_fact = |j: usize| statrs::function::factorial::ln_factorial(j as u64);
    let ln_pref = 0.5 * (ln_fact(lo) - ln_fact(hi)) - 0.5 * x
        + if k > 0 { k as f64 * gamma.norm().ln() } else { 0.0 };
    if ln_pref < -700.0 {
        return c64(0.0, 0.0);
    }
    let phase = if m >= n {
        Complex64::from_polar(1.0, k as f64 * gamma.arg())
    } else {
        // (−γ̄)^k
        Complex64::from_polar(1.0, k as f64 * (-gamma.conj()).arg())
    };
    phase * (ln_pref.exp() * lag)
}

/// Generalized Laguerre polynomial `L_n^{(k)}(x)` by upward recurrence.
pub fn laguerre(n: usize, k: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * cur - (jf + k) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Object accepted by [`tensor`].
#[derive(Clone, Debug, PartialEq)]
pub enum FockItem {
    State(FockVector),
    Density(DensityOperator),
    Operator(ModeOperator),
}

impl FockItem {
    fn kind(&self) -> &'static str {
        match self {
            FockItem::State(_) => "state",
            FockItem::Density(_) => "density",
            FockItem::Operator(_) => "operator",
        }
    }

    fn cutoffs(&self) -> &[usize] {
        match self {
            FockItem::State(v) => &v.cutoffs,
            FockItem::Density(r) => &r.cutoffs,
            FockItem::Operator(o) => &o.cutoffs,
        }
    }
}

/// Kronecker product in the given mode order.
pub fn tensor(items: &[FockItem]) -> Result<FockItem> {
    let first = items
        .first()
        .ok_or_else(|| invalid("tensor needs at least one factor"))?;
    if let Some(bad) = items.iter().find(|it| it.kind() != first.kind()) {
        return Err(invalid(format!(
            "cannot tensor a {} with a {}",
            first.kind(),
            bad.kind()
        )));
    }
    let cutoffs: Vec<usize> = items.iter().flat_map(|it| it.cutoffs().to_vec()).collect();
    let out = match first {
        FockItem::State(_) => {
            let mut acc = CVector::from_element(1, c64(1.0, 0.0));
            for it in items {
                if let FockItem::State(v) = it {
                    acc = acc.kronecker(&v.amplitudes);
                }
            }
            FockItem::State(FockVector {
                cutoffs,
                amplitudes: acc,
            })
        }
        FockItem::Density(_) | FockItem::Operator(_) => {
            let mut acc = CMatrix::from_element(1, 1, c64(1.0, 0.0));
            for it in items {
                let m = match it {
                    FockItem::Density(r) => &r.matrix,
                    FockItem::Operator(o) => &o.matrix,
                    FockItem::State(_) => unreachable!(),
                };
                acc = acc.kronecker(m);
            }
            if matches!(first, FockItem::Density(_)) {
                FockItem::Density(DensityOperator {
                    cutoffs,
                    matrix: acc,
                })
            } else {
                FockItem::Operator(ModeOperator::from_parts(cutoffs, acc))
            }
        }
    };
    Ok(out)
}

/// Convenience: tensor product of operators.
pub fn tensor_operators(ops: &[&ModeOperator]) -> Result<ModeOperator> {
    let items: Vec<FockItem> = ops.iter().map(|o| FockItem::Operator((*o).clone())).collect();
    match tensor(&items)? {
        FockItem::Operator(o) => Ok(o),
        _ => unreachable!(),
    }
}

/// Convenience: tensor product of density operators.
pub fn tensor_densities(rhos: &[&DensityOperator]) -> Result<DensityOperator> {
    let items: Vec<FockItem> = rhos.iter().map(|r| FockItem::Density((*r).clone())).collect();
    match tensor(&items)? {
        FockItem::Density(r) => Ok(r),
        _ => unreachable!(),
    }
}

/// Reduced density operator on the modes in `keep` (in the order given).
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    let nmodes = rho.cutoffs.len();
    if keep.is_empty() {
        return Err(invalid("partial trace must keep at least one mode"));
    }
    for (i, &k) in keep.iter().enumerate() {
        if k >= nmodes {
            return Err(invalid(format!("mode index {k} out of range for {nmodes} modes")));
        }
        if keep[..i].contains(&k) {
            return Err(invalid(format!("mode index {k} repeated")));
        }
    }
    let traced: Vec<usize> = (0..nmodes).filter(|k| !keep.contains(k)).collect();
    let kept_cut: Vec<usize> = keep.iter().map(|&k| rho.cutoffs[k]).collect();
    let traced_cut: Vec<usize> = traced.iter().map(|&k| rho.cutoffs[k]).collect();
    let dk = total_dim(&kept_cut);
    let dt = total_dim(&traced_cut);

    // Map (kept index, traced index) -> full index.
    let full_index = |ik: usize, it: usize| -> usize {
        let nk = unravel(ik, &kept_cut);
        let nt = if traced.is_empty() { Vec::new() } else { unravel(it, &traced_cut) };
        let mut occ = vec![0; nmodes];
        for (j, &k) in keep.iter().enumerate() {
            occ[k] = nk[j];
        }
        for (j, &k) in traced.iter().enumerate() {
            occ[k] = nt[j];
        }
        ravel(&occ, &rho.cutoffs)
    };
    let table: Vec<Vec<usize>> = (0..dk)
        .map(|ik| (0..dt).map(|it| full_index(ik, it)).collect())
        .collect();
    let mut out = CMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut s = c64(0.0, 0.0);
            for t in 0..dt {
                s += rho.matrix[(table[i][t], table[j][t])];
            }
            out[(i, j)] = s;
        }
    }
    Ok(DensityOperator {
        cutoffs: kept_cut,
        matrix: out,
    })
}
