//! Small-register complex linear algebra: pure states, density matrices and
//! the handful of reductions the rest of the crate needs.
//!
//! Qubit 0 is the leftmost tensor factor (the control in a two-qubit
//! register). A basis index `i` carries qubit `q` in bit `n - 1 - q`, so the
//! two-qubit basis order is |00⟩, |01⟩, |10⟩, |11⟩.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for Hermiticity, trace and eigenvalue checks on density matrices.
pub const DENSITY_TOL: f64 = 1e-10;
/// Outcomes with probability below this are reported as impossible.
pub const IMPOSSIBLE_PROB: f64 = 1e-12;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn dim_to_qubits(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch {
            expected: dim.next_power_of_two().max(2),
            actual: dim,
        });
    }
    Ok(dim.trailing_zeros() as usize)
}

#[inline]
fn bit_of(index: usize, qubit: usize, num_qubits: usize) -> usize {
    (index >> (num_qubits - 1 - qubit)) & 1
}

/// Inserts `bit` at the position of `qubit` into an (n-1)-qubit index.
#[inline]
fn insert_bit(index: usize, qubit: usize, num_qubits: usize, bit: usize) -> usize {
    let low_bits = num_qubits - 1 - qubit;
    let high = index >> low_bits;
    let low = index & ((1 << low_bits) - 1);
    (high << (low_bits + 1)) | (bit << low_bits) | low
}

fn check_qubit(index: usize, num_qubits: usize) -> Result<()> {
    if index >= num_qubits {
        return Err(Error::InvalidQubit { index, num_qubits });
    }
    Ok(())
}

fn check_outcome(outcome: u8) -> Result<()> {
    if outcome > 1 {
        return Err(Error::InvalidOutcome(outcome));
    }
    Ok(())
}

/// A square complex matrix acting on a register. No unitarity is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        Ok(Self(matrix))
    }

    pub fn from_row_slice(dim: usize, entries: &[C64]) -> Self {
        Self(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn pauli_x() -> Self {
        Self::from_row_slice(2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
    }

    pub fn pauli_y() -> Self {
        Self::from_row_slice(2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
    }

    pub fn pauli_z() -> Self {
        Self::from_row_slice(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
    }

    /// CNOT with qubit 0 as control.
    pub fn cnot() -> Self {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(1.0, 0.0);
        m[(2, 3)] = c(1.0, 0.0);
        m[(3, 2)] = c(1.0, 0.0);
        Self(m)
    }

    /// Lifts a single-qubit operator onto `qubit` of an `num_qubits` register.
    pub fn on_qubit(single: &Operator, qubit: usize, num_qubits: usize) -> Result<Self> {
        check_qubit(qubit, num_qubits)?;
        if single.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, actual: single.dim() });
        }
        let mut out = Operator::identity(1);
        for q in 0..num_qubits {
            let factor = if q == qubit { single.clone() } else { Operator::identity(2) };
            out = out.kron(&factor);
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        Operator(self.0.kronecker(&other.0))
    }

    pub fn adjoint(&self) -> Operator {
        Operator(self.0.adjoint())
    }

    pub fn compose(&self, after: &Operator) -> Operator {
        Operator(&after.0 * &self.0)
    }

    pub fn scale(&self, factor: C64) -> Operator {
        Operator(&self.0 * factor)
    }

    /// Largest entrywise deviation of `U†U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        let prod = self.0.adjoint() * &self.0;
        (prod - DMatrix::<C64>::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Applies the operator to a ket without renormalizing.
    pub fn apply_raw(&self, ket: &DVector<C64>) -> DVector<C64> {
        &self.0 * ket
    }

    /// Maximum entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        (&self.0 - &other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

/// A normalized ket on `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amplitudes: DVector<C64>,
}

impl PureState {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(amplitudes))
    }

    pub fn from_vector(amplitudes: DVector<C64>) -> Result<Self> {
        let num_qubits = dim_to_qubits(amplitudes.len())?;
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::Normalization(format!("norm {norm}")));
        }
        Ok(Self { num_qubits, amplitudes: amplitudes.unscale(norm) })
    }

    /// `alpha|0⟩ + beta|1⟩`, normalized.
    pub fn qubit(alpha: C64, beta: C64) -> Result<Self> {
        Self::new(vec![alpha, beta])
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if num_qubits == 0 || index >= dim {
            return Err(Error::OutOfRange(format!(
                "basis index {index} for {num_qubits} qubits"
            )));
        }
        let mut v = DVector::zeros(dim);
        v[index] = c(1.0, 0.0);
        Ok(Self { num_qubits, amplitudes: v })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        PureState {
            num_qubits: self.num_qubits + other.num_qubits,
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }

    pub fn with_global_phase(&self, phase: f64) -> PureState {
        PureState {
            num_qubits: self.num_qubits,
            amplitudes: &self.amplitudes * C64::from_polar(1.0, phase),
        }
    }

    /// Applies an operator and renormalizes; returns the squared norm of the
    /// unnormalized image alongside the state.
    pub fn apply(&self, op: &Operator) -> Result<(f64, PureState)> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: op.dim() });
        }
        let image = op.apply_raw(&self.amplitudes);
        let weight = image.norm_squared();
        Ok((weight, PureState::from_vector(image)?))
    }

    pub fn density(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix { num_qubits: self.num_qubits, matrix: m }
    }

    /// Swaps the two qubits of a two-qubit state.
    pub fn swap_qubits(&self) -> Result<PureState> {
        if self.num_qubits != 2 {
            return Err(Error::DimensionMismatch { expected: 4, actual: self.dim() });
        }
        let a = &self.amplitudes;
        Ok(PureState {
            num_qubits: 2,
            amplitudes: DVector::from_vec(vec![a[0], a[2], a[1], a[3]]),
        })
    }

    /// Z-measurement of one qubit with a fixed outcome. Returns the outcome
    /// probability and the collapsed state on the remaining qubits.
    pub fn measure_z(&self, qubit: usize, outcome: u8) -> Result<(f64, PureState)> {
        check_qubit(qubit, self.num_qubits)?;
        check_outcome(outcome)?;
        if self.num_qubits < 2 {
            return Err(Error::DimensionMismatch { expected: 4, actual: self.dim() });
        }
        let n = self.num_qubits;
        let reduced: Vec<C64> = (0..self.dim() / 2)
            .map(|i| self.amplitudes[insert_bit(i, qubit, n, outcome as usize)])
            .collect();
        let probability: f64 = reduced.iter().map(|z| z.norm_sqr()).sum();
        if probability < IMPOSSIBLE_PROB {
            return Err(Error::ImpossibleOutcome { qubit, outcome, probability });
        }
        Ok((probability, PureState::new(reduced)?))
    }

    /// Probability of reading `0` when Z-measuring `qubit`.
    pub fn prob_zero(&self, qubit: usize) -> Result<f64> {
        check_qubit(qubit, self.num_qubits)?;
        let n = self.num_qubits;
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| bit_of(*i, qubit, n) == 0)
            .map(|(_, z)| z.norm_sqr())
            .sum())
    }
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates `matrix` against the density-matrix invariants.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), actual: matrix.ncols() });
        }
        let num_qubits = dim_to_qubits(matrix.nrows())?;
        let herm_err = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (deviation {herm_err:e})")));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > DENSITY_TOL || trace.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace}")));
        }
        let min_eig = hermitian_eigenvalues(&matrix).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self { num_qubits, matrix })
    }

    /// Hermitizes and trace-normalizes a matrix that is PSD by construction
    /// (a sum of `AρA†` terms). Used for internal channel outputs.
    pub(crate) fn from_positive(matrix: DMatrix<C64>) -> Result<Self> {
        let herm = (&matrix + matrix.adjoint()) * c(0.5, 0.0);
        let trace = herm.trace().re;
        if !trace.is_finite() || trace < 1e-300 {
            return Err(Error::Normalization(format!("trace {trace}")));
        }
        let num_qubits = dim_to_qubits(herm.nrows())?;
        Ok(Self { num_qubits, matrix: herm.unscale(trace) })
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        Self {
            num_qubits,
            matrix: DMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn into_operator(self) -> Operator {
        Operator(self.matrix)
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `Tr(ρ·op)`.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: op.dim() });
        }
        Ok(trace_of_product(&self.matrix, op.matrix()))
    }

    /// `UρU†`, for a unitary `U`.
    pub fn evolve(&self, unitary: &Operator) -> Result<DensityMatrix> {
        if unitary.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: unitary.dim() });
        }
        let m = unitary.matrix() * &self.matrix * unitary.matrix().adjoint();
        DensityMatrix::from_positive(m)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            num_qubits: self.num_qubits + other.num_qubits,
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    /// Exchanges the two qubits of a two-qubit state.
    pub fn swap_qubits(&self) -> Result<DensityMatrix> {
        if self.num_qubits != 2 {
            return Err(Error::DimensionMismatch { expected: 4, actual: self.dim() });
        }
        let perm = [0usize, 2, 1, 3];
        let m = DMatrix::from_fn(4, 4, |i, j| self.matrix[(perm[i], perm[j])]);
        Ok(DensityMatrix { num_qubits: 2, matrix: m })
    }

    /// Trace distance `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        let diff = &self.matrix - &other.matrix;
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|x| x.abs()).sum::<f64>())
    }
}

/// A Hermitian matrix that has not been checked for positivity, such as a
/// linear-inversion estimate under shot noise.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    num_qubits: usize,
    matrix: DMatrix<C64>,
}

impl HermitianMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), actual: matrix.ncols() });
        }
        let num_qubits = dim_to_qubits(matrix.nrows())?;
        let herm = (&matrix + matrix.adjoint()) * c(0.5, 0.0);
        Ok(Self { num_qubits, matrix: herm })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive(&self) -> bool {
        self.min_eigenvalue() >= -DENSITY_TOL
    }

    /// Runs the full density-matrix validation.
    pub fn into_density(self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.matrix)
    }

    pub fn max_abs_diff(&self, other: &DMatrix<C64>) -> f64 {
        (&self.matrix - other).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let herm = (m + m.adjoint()) * c(0.5, 0.0);
    herm.symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// `Tr(A·B)` without forming the product.
#[inline]
pub(crate) fn trace_of_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Hermitian square root via the eigendecomposition, negative eigenvalues clipped.
pub(crate) fn hermitian_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let herm = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let roots = eig.eigenvalues.map(|x| c(x.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// Fidelity `⟨ψ|ρ|ψ⟩` of a density matrix with a pure target.
pub fn fidelity(rho: &DensityMatrix, target: &PureState) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), actual: target.dim() });
    }
    let psi = target.amplitudes();
    let f = psi.dotc(&(rho.matrix() * psi)).re;
    Ok(f.clamp(0.0, 1.0))
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²` between two density matrices.
pub fn fidelity_mixed(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), actual: sigma.dim() });
    }
    let sqrt_rho = hermitian_sqrt(rho.matrix());
    let inner = &sqrt_rho * sigma.matrix() * &sqrt_rho;
    let root_trace: f64 = hermitian_eigenvalues(&inner).iter().map(|x| x.max(0.0).sqrt()).sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// Reduced state on the qubits listed in `keep` (in the given order).
pub fn reduce(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.num_qubits();
    if keep.is_empty() {
        return Err(Error::OutOfRange("no qubits kept".into()));
    }
    for (pos, &q) in keep.iter().enumerate() {
        check_qubit(q, n)?;
        if keep[..pos].contains(&q) {
            return Err(Error::OutOfRange(format!("qubit {q} kept twice")));
        }
    }
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let k = keep.len();
    let kd = 1usize << k;
    let compose = |kept_idx: usize, traced_idx: usize| -> usize {
        let mut full = 0usize;
        for (pos, &q) in keep.iter().enumerate() {
            let b = (kept_idx >> (k - 1 - pos)) & 1;
            full |= b << (n - 1 - q);
        }
        for (pos, &q) in traced.iter().enumerate() {
            let b = (traced_idx >> (traced.len() - 1 - pos)) & 1;
            full |= b << (n - 1 - q);
        }
        full
    };
    let mut out = DMatrix::zeros(kd, kd);
    for a in 0..kd {
        for b in 0..kd {
            let mut acc = c(0.0, 0.0);
            for t in 0..(1usize << traced.len()) {
                acc += rho.matrix()[(compose(a, t), compose(b, t))];
            }
            out[(a, b)] = acc;
        }
    }
    DensityMatrix::from_positive(out)
}

/// Reduced single-qubit state of `keep`, tracing out everything else.
pub fn partial_trace(rho: &DensityMatrix, keep: usize) -> Result<DensityMatrix> {
    reduce(rho, &[keep])
}

/// Z-measures `measured` with a fixed `outcome`; returns the outcome
/// probability and the normalized state of the remaining qubits.
pub fn conditional_state(rho: &DensityMatrix, measured: usize, outcome: u8) -> Result<(f64, DensityMatrix)> {
    let n = rho.num_qubits();
    check_qubit(measured, n)?;
    check_outcome(outcome)?;
    if n < 2 {
        return Err(Error::DimensionMismatch { expected: 4, actual: rho.dim() });
    }
    let rd = rho.dim() / 2;
    let bit = outcome as usize;
    let block = DMatrix::from_fn(rd, rd, |i, j| {
        rho.matrix()[(insert_bit(i, measured, n, bit), insert_bit(j, measured, n, bit))]
    });
    let probability = block.trace().re;
    if probability < IMPOSSIBLE_PROB {
        return Err(Error::ImpossibleOutcome { qubit: measured, outcome, probability: probability.max(0.0) });
    }
    Ok((probability.min(1.0), DensityMatrix::from_positive(block)?))
}

/// Single-qubit Paulis in the order I, X, Y, Z.
pub fn pauli_basis() -> [Operator; 4] {
    [Operator::identity(2), Operator::pauli_x(), Operator::pauli_y(), Operator::pauli_z()]
}

/// Pauli expectation values. One qubit: (X, Y, Z). Two qubits: the 15
/// non-identity products σa⊗σb in lexicographic order over (I, X, Y, Z),
/// i.e. IX, IY, IZ, XI, XX, …, ZZ.
pub fn stokes(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let paulis = pauli_basis();
    match rho.num_qubits() {
        1 => Ok(paulis[1..]
            .iter()
            .map(|p| trace_of_product(rho.matrix(), p.matrix()).re.clamp(-1.0, 1.0))
            .collect()),
        2 => {
            let mut out = Vec::with_capacity(15);
            for a in 0..4 {
                for b in 0..4 {
                    if a == 0 && b == 0 {
                        continue;
                    }
                    let op = paulis[a].kron(&paulis[b]);
                    out.push(trace_of_product(rho.matrix(), op.matrix()).re.clamp(-1.0, 1.0));
                }
            }
            Ok(out)
        }
        _ => Err(Error::DimensionMismatch { expected: 4, actual: rho.dim() }),
    }
}

/// Text form of a density matrix: row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixRecord {
    pub num_qubits: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&DensityMatrix> for DensityMatrixRecord {
    fn from(rho: &DensityMatrix) -> Self {
        let d = rho.dim();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                re.push(rho.matrix[(i, j)].re);
                im.push(rho.matrix[(i, j)].im);
            }
        }
        Self { num_qubits: rho.num_qubits, re, im }
    }
}

impl TryFrom<DensityMatrixRecord> for DensityMatrix {
    type Error = Error;

    fn try_from(rec: DensityMatrixRecord) -> Result<Self> {
        if rec.num_qubits == 0 || rec.num_qubits > 16 {
            return Err(Error::OutOfRange(format!("num_qubits {}", rec.num_qubits)));
        }
        let d = 1usize << rec.num_qubits;
        if rec.re.len() != d * d || rec.im.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, actual: rec.re.len().min(rec.im.len()) });
        }
        let m = DMatrix::from_fn(d, d, |i, j| c(rec.re[i * d + j], rec.im[i * d + j]));
        DensityMatrix::new(m)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DensityMatrixRecord::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rec = DensityMatrixRecord::deserialize(deserializer)?;
        DensityMatrix::try_from(rec).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn ket(v: &[(f64, f64)]) -> PureState {
        PureState::new(v.iter().map(|&(r, i)| c(r, i)).collect()).unwrap()
    }

    fn bell() -> PureState {
        ket(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)])
    }

    fn assert_mat_close(a: &DMatrix<C64>, b: &DMatrix<C64>, tol: f64) {
        let d = (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(d < tol, "matrices differ by {d:e}\n{a}\n{b}");
    }

    #[test]
    fn fidelity_basic_cases() {
        let zero = PureState::basis(1, 0).unwrap();
        let one = PureState::basis(1, 1).unwrap();
        assert!((fidelity(&zero.density(), &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&zero.density(), &one).unwrap().abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(1);
        let psi = ket(&[(0.3, 0.1), (-0.2, 0.7)]);
        assert!((fidelity(&mixed, &psi).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        let rho = DensityMatrix::maximally_mixed(2);
        let psi = PureState::basis(1, 0).unwrap();
        assert!(matches!(fidelity(&rho, &psi), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn partial_trace_cases() {
        let reduced = partial_trace(&bell().density(), 1).unwrap();
        assert_mat_close(reduced.matrix(), DensityMatrix::maximally_mixed(1).matrix(), 1e-12);

        // |01⟩: qubit 0 is |0⟩.
        let product = PureState::basis(2, 1).unwrap().density();
        let q0 = partial_trace(&product, 0).unwrap();
        assert_mat_close(q0.matrix(), PureState::basis(1, 0).unwrap().density().matrix(), 1e-12);
        let q1 = partial_trace(&product, 1).unwrap();
        assert_mat_close(q1.matrix(), PureState::basis(1, 1).unwrap().density().matrix(), 1e-12);

        assert!(matches!(partial_trace(&product, 2), Err(Error::InvalidQubit { .. })));
    }

    #[test]
    fn partial_trace_of_encoded_zero_is_maximally_mixed() {
        // Direct sum over the traced index: ρ_B[b,b'] = Σ_a ρ[ab, ab'], with
        // ρ = ½(|00⟩+|11⟩)(⟨00|+⟨11|) giving diag(½, ½).
        let enc = bell().density();
        let mut manual = DMatrix::<C64>::zeros(2, 2);
        for a in 0..2 {
            for b in 0..2 {
                for bp in 0..2 {
                    manual[(b, bp)] += enc.matrix()[(2 * a + b, 2 * a + bp)];
                }
            }
        }
        let reduced = partial_trace(&enc, 1).unwrap();
        assert_mat_close(reduced.matrix(), &manual, 1e-14);
        assert_mat_close(reduced.matrix(), DensityMatrix::maximally_mixed(1).matrix(), 1e-12);
    }

    #[test]
    fn conditional_state_on_parity_code() {
        let (alpha, beta) = (c(0.6, 0.0), c(0.0, 0.8));
        let enc = ket(&[(0.6, 0.0), (0.0, 0.8), (0.0, 0.8), (0.6, 0.0)]);
        let psi = PureState::qubit(alpha, beta).unwrap();
        let flipped = PureState::qubit(beta, alpha).unwrap();

        let (p0, s0) = conditional_state(&enc.density(), 0, 0).unwrap();
        assert!((p0 - 0.5).abs() < 1e-12);
        assert!((fidelity(&s0, &psi).unwrap() - 1.0).abs() < 1e-12);

        let (p1, s1) = conditional_state(&enc.density(), 0, 1).unwrap();
        assert!((p1 - 0.5).abs() < 1e-12);
        assert!((fidelity(&s1, &flipped).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_state_impossible_outcome() {
        let rho = PureState::basis(2, 0).unwrap().density();
        assert!(matches!(
            conditional_state(&rho, 1, 1),
            Err(Error::ImpossibleOutcome { qubit: 1, outcome: 1, .. })
        ));
        assert!(matches!(conditional_state(&rho, 0, 2), Err(Error::InvalidOutcome(2))));
    }

    #[test]
    fn stokes_cases() {
        let s = stokes(&PureState::basis(1, 0).unwrap().density()).unwrap();
        assert!((s[0]).abs() < 1e-12 && s[1].abs() < 1e-12 && (s[2] - 1.0).abs() < 1e-12);
        let plus = ket(&[(FRAC_1_SQRT_2, 0.0), (FRAC_1_SQRT_2, 0.0)]);
        let s = stokes(&plus.density()).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12 && s[1].abs() < 1e-12 && s[2].abs() < 1e-12);
        let s = stokes(&DensityMatrix::maximally_mixed(1)).unwrap();
        assert!(s.iter().all(|x| x.abs() < 1e-12));

        let s2 = stokes(&bell().density()).unwrap();
        assert_eq!(s2.len(), 15);
        // XX = +1, YY = -1, ZZ = +1 for (|00⟩+|11⟩)/√2.
        assert!((s2[4] - 1.0).abs() < 1e-12);
        assert!((s2[9] + 1.0).abs() < 1e-12);
        assert!((s2[14] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_validation_rejects_bad_matrices() {
        let mut m = DMatrix::<C64>::identity(2, 2);
        assert!(DensityMatrix::new(m.clone()).is_err()); // trace 2
        m[(1, 1)] = c(0.0, 0.0);
        m[(0, 1)] = c(0.3, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_err()); // not Hermitian
        m[(1, 0)] = c(0.3, 0.0);
        assert!(DensityMatrix::new(m).is_err()); // negative eigenvalue
        let odd = DMatrix::<C64>::identity(3, 3).unscale(3.0);
        assert!(DensityMatrix::new(odd).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let rho = ket(&[(0.5, 0.0), (0.0, 0.5), (0.0, 0.5), (0.5, 0.0)]).density();
        let text = serde_json::to_string(&rho).unwrap();
        assert!(text.contains("\"num_qubits\":2"));
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        assert_mat_close(back.matrix(), rho.matrix(), 1e-15);
        let bad = r#"{"num_qubits":1,"re":[1,0,0,1],"im":[0,0,0,0]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(bad).is_err());
    }

    #[test]
    fn mixed_fidelity_reduces_to_pure_case() {
        let psi = ket(&[(0.6, 0.0), (0.0, 0.8)]);
        let rho = DensityMatrix::new(
            DMatrix::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, -0.2), c(0.1, 0.2), c(0.3, 0.0)]),
        )
        .unwrap();
        let a = fidelity(&rho, &psi).unwrap();
        let b = fidelity_mixed(&rho, &psi.density()).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn measure_z_on_pure_state() {
        let (p, rest) = bell().measure_z(0, 1).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((rest.amplitude(1).norm() - 1.0).abs() < 1e-12);
        assert!((bell().prob_zero(1).unwrap() - 0.5).abs() < 1e-12);
    }
}
