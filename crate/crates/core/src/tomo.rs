//! Density-matrix reconstruction: linear inversion and iterative maximum
//! likelihood.
//!
//! The likelihood treats counts as Poisson with an unknown common rate, which
//! after profiling the rate becomes `Σ n_k ln(p_k / Σ_j p_j)`. For measurement
//! sets whose projectors sum to a multiple of the identity (the overcomplete
//! scheme) this is `Σ n_k ln p_k` up to a constant.
//!
//! The optimizer works on `σ = G^{½} ρ G^{½} / Tr(Gρ)` with `G = Σ_k Π_k`, in
//! which the projectors become a proper POVM `E_k = G^{-½} Π_k G^{-½}`. There
//! it runs the R·σ·R fixed-point iteration, falling back to the diluted step
//! `(I + εR)σ(I + εR)` with ε halved until the likelihood does not decrease.
//! Each iteration also tries an over-relaxed step `R^t σ R^t`, a projected
//! Newton step and a rank truncation of the new point, and keeps whichever
//! candidate has the highest likelihood, so the trace stays monotone.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{setting_probabilities, CountRecord, MeasurementSetting, Scheme};
use crate::qcore::{c, hermitian_sqrt, pauli_basis, trace_of_product, DensityMatrix, HermitianMatrix, Operator, C64};

/// Floor applied to probabilities inside logarithms and ratios.
pub const PROB_FLOOR: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
const MIN_DILUTION: f64 = 1e-12;
const MAX_POWER: f64 = 1048576.0;
const MIN_NEWTON_SCALE: f64 = 1.0 / 1024.0;

/// Projectors paired with (possibly fractional) counts.
#[derive(Debug, Clone)]
pub struct TomoData {
    num_qubits: usize,
    projectors: Vec<DMatrix<C64>>,
    counts: Vec<f64>,
    scheme: Option<Scheme>,
}

fn infer_scheme(labels: &[String], num_qubits: usize) -> Option<Scheme> {
    for scheme in [Scheme::Minimal, Scheme::Overcomplete] {
        let expected = crate::measure::tomo_settings(num_qubits, scheme).ok()?;
        if expected.len() == labels.len() && expected.iter().zip(labels).all(|(s, l)| &s.label == l) {
            return Some(scheme);
        }
    }
    None
}

impl TomoData {
    pub fn from_counts(counts: &[CountRecord]) -> Result<Self> {
        let first = counts.first().ok_or(Error::EmptyCounts)?;
        let num_qubits = first.setting.num_qubits();
        let mut projectors = Vec::with_capacity(counts.len());
        for r in counts {
            if r.setting.num_qubits() != num_qubits {
                return Err(Error::DimensionMismatch { expected: num_qubits, actual: r.setting.num_qubits() });
            }
            projectors.push(r.setting.projector().into_matrix());
        }
        let labels: Vec<String> = counts.iter().map(|r| r.setting.label.clone()).collect();
        Ok(Self {
            num_qubits,
            projectors,
            counts: counts.iter().map(|r| r.count as f64).collect(),
            scheme: infer_scheme(&labels, num_qubits),
        })
    }

    /// Noise-free data: each count replaced by its mean `shots·Tr(ρΠ)`.
    pub fn exact(rho: &DensityMatrix, settings: &[MeasurementSetting], shots: f64) -> Result<Self> {
        if settings.is_empty() {
            return Err(Error::EmptyCounts);
        }
        let probs = setting_probabilities(rho, settings)?;
        let labels: Vec<String> = settings.iter().map(|s| s.label.clone()).collect();
        Ok(Self {
            num_qubits: rho.num_qubits(),
            projectors: settings.iter().map(|s| s.projector().into_matrix()).collect(),
            counts: probs.iter().map(|p| p * shots).collect(),
            scheme: infer_scheme(&labels, rho.num_qubits()),
        })
    }

    pub fn from_parts(num_qubits: usize, projectors: Vec<Operator>, counts: Vec<f64>) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::EmptyCounts);
        }
        if projectors.len() != counts.len() {
            return Err(Error::DimensionMismatch { expected: projectors.len(), actual: counts.len() });
        }
        let dim = 1usize << num_qubits;
        if let Some(p) = projectors.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: p.dim() });
        }
        if counts.iter().any(|n| !n.is_finite() || *n < 0.0) {
            return Err(Error::OutOfRange("counts must be finite and non-negative".into()));
        }
        Ok(Self {
            num_qubits,
            projectors: projectors.into_iter().map(Operator::into_matrix).collect(),
            counts,
            scheme: None,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn scheme(&self) -> Option<Scheme> {
        self.scheme
    }
}

/// Hermitian operator basis: tensor products of I, X, Y, Z.
fn pauli_products(num_qubits: usize) -> Vec<DMatrix<C64>> {
    let single = pauli_basis();
    let mut basis = vec![Operator::identity(1)];
    for _ in 0..num_qubits {
        basis = basis
            .iter()
            .flat_map(|b| single.iter().map(move |p| b.kron(p)))
            .collect();
    }
    basis.into_iter().map(Operator::into_matrix).collect()
}

/// Least-squares inversion of `n_k = Tr(MΠ_k)` over Hermitian `M`, then
/// `ρ = M / Tr M`. The result is Hermitian with unit trace but may have
/// negative eigenvalues.
pub fn linear_inversion(counts: &[CountRecord]) -> Result<HermitianMatrix> {
    linear_inversion_data(&TomoData::from_counts(counts)?)
}

pub fn linear_inversion_data(data: &TomoData) -> Result<HermitianMatrix> {
    let basis = pauli_products(data.num_qubits);
    let rows = data.projectors.len();
    let cols = basis.len();
    let design = DMatrix::<f64>::from_fn(rows, cols, |k, j| trace_of_product(&data.projectors[k], &basis[j]).re);

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
    if rank < cols {
        return Err(Error::RankDeficient { rank, required: cols });
    }
    let rhs = nalgebra::DVector::from_column_slice(&data.counts);
    let coeffs = svd
        .solve(&rhs, 1e-12 * smax)
        .map_err(|e| Error::InvalidDensityMatrix(e.to_string()))?;

    let d = data.dim();
    let mut m = DMatrix::<C64>::zeros(d, d);
    for (b, x) in basis.iter().zip(coeffs.iter()) {
        m += b * c(*x, 0.0);
    }
    let trace = m.trace().re;
    if !(trace.is_finite() && trace > 0.0) {
        return Err(Error::InvalidDensityMatrix(format!("estimate has trace {trace}")));
    }
    HermitianMatrix::new(m.unscale(trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    /// Stop when the likelihood gain of an iteration, relative to the
    /// likelihood, falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub scheme: Option<Scheme>,
    /// Log-likelihood after each accepted step, starting with the initial state.
    #[serde(skip)]
    pub likelihood_trace: Vec<f64>,
}

struct Problem {
    povm: Vec<DMatrix<C64>>,
    freqs: Vec<f64>,
    counts: Vec<f64>,
    /// `G^{-½}`, mapping σ back to ρ.
    back: DMatrix<C64>,
    /// Traceless Pauli products and `Tr(E_k B_j)` for the Newton step.
    directions: Vec<DMatrix<C64>>,
    design: DMatrix<f64>,
}

impl Problem {
    fn new(data: &TomoData) -> Result<Self> {
        let d = data.dim();
        let total = data.total();
        if !(total > 0.0) {
            return Err(Error::EmptyCounts);
        }
        let g = data.projectors.iter().fold(DMatrix::<C64>::zeros(d, d), |acc, p| acc + p);
        let eig = ((&g + g.adjoint()) * c(0.5, 0.0)).symmetric_eigen();
        let smallest = eig.eigenvalues.min();
        if smallest <= 1e-10 * eig.eigenvalues.max() {
            return Err(Error::RankDeficient { rank: 0, required: d });
        }
        let inv_root = eig.eigenvalues.map(|x| c(1.0 / x.sqrt(), 0.0));
        let back = &eig.eigenvectors * DMatrix::from_diagonal(&inv_root) * eig.eigenvectors.adjoint();
        let povm: Vec<DMatrix<C64>> = data.projectors.iter().map(|p| &back * p * &back).collect();
        let directions: Vec<DMatrix<C64>> = pauli_products(data.num_qubits).into_iter().skip(1).collect();
        let design = DMatrix::<f64>::from_fn(povm.len(), directions.len(), |k, j| {
            trace_of_product(&povm[k], &directions[j]).re
        });
        Ok(Self {
            povm,
            freqs: data.counts.iter().map(|n| n / total).collect(),
            counts: data.counts.clone(),
            back,
            directions,
            design,
        })
    }

    fn probabilities(&self, sigma: &DMatrix<C64>) -> Vec<f64> {
        self.povm.iter().map(|e| trace_of_product(sigma, e).re.max(PROB_FLOOR)).collect()
    }

    fn log_likelihood_from(&self, probs: &[f64]) -> f64 {
        self.counts
            .iter()
            .zip(probs)
            .filter(|(n, _)| **n > 0.0)
            .map(|(n, p)| n * p.ln())
            .sum()
    }

    fn log_likelihood(&self, sigma: &DMatrix<C64>) -> f64 {
        self.log_likelihood_from(&self.probabilities(sigma))
    }

    fn r_operator(&self, probs: &[f64]) -> DMatrix<C64> {
        let d = self.back.nrows();
        let mut r = DMatrix::<C64>::zeros(d, d);
        for ((e, f), p) in self.povm.iter().zip(&self.freqs).zip(probs) {
            if *f > 0.0 {
                r += e * c(f / p, 0.0);
            }
        }
        r
    }

    fn to_rho(&self, sigma: &DMatrix<C64>) -> DMatrix<C64> {
        &self.back * sigma * &self.back
    }

    /// Newton step for the likelihood over unit-trace Hermitian σ, solved as
    /// the weighted least-squares problem `min Σ n_k/p_k² (a_k·x − p_k)²`.
    fn newton_direction(&self, probs: &[f64]) -> Option<DMatrix<C64>> {
        let rows: Vec<usize> = (0..self.counts.len()).filter(|&k| self.counts[k] > 0.0).collect();
        let cols = self.directions.len();
        let m = DMatrix::<f64>::from_fn(rows.len(), cols, |i, j| {
            let k = rows[i];
            self.counts[k].sqrt() / probs[k] * self.design[(k, j)]
        });
        let b = nalgebra::DVector::<f64>::from_iterator(rows.len(), rows.iter().map(|&k| self.counts[k].sqrt()));
        let svd = m.svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max();
        let x = svd.solve(&b, cutoff).ok()?;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        let d = self.back.nrows();
        let mut step = DMatrix::<C64>::zeros(d, d);
        for (dir, xj) in self.directions.iter().zip(x.iter()) {
            step += dir * c(*xj, 0.0);
        }
        Some(step)
    }
}

/// σ with all but its `rank` largest eigenvalues removed, renormalized.
fn truncate_rank(sigma: &DMatrix<C64>, rank: usize) -> DMatrix<C64> {
    let eig = ((sigma + sigma.adjoint()) * c(0.5, 0.0)).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vals = nalgebra::DVector::<C64>::zeros(eig.eigenvalues.len());
    for &i in order.iter().take(rank) {
        vals[i] = c(eig.eigenvalues[i].max(0.0), 0.0);
    }
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint();
    let t = out.trace().re;
    out.unscale(t)
}

/// Closest unit-trace positive matrix in Frobenius norm: eigenvalues are
/// projected onto the probability simplex.
fn project_to_states(m: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = ((m + m.adjoint()) * c(0.5, 0.0)).symmetric_eigen();
    let mut sorted: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut shift = 0.0;
    let mut partial = 0.0;
    for (j, u) in sorted.iter().enumerate() {
        partial += u;
        let t = (partial - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            shift = t;
        }
    }
    let vals = eig.eigenvalues.map(|x| c((x - shift).max(0.0), 0.0));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint();
    let t = out.trace().re;
    out.unscale(t)
}

/// Eigenvectors of a positive operator and its eigenvalues divided by the largest.
fn scaled_eigen(r: &DMatrix<C64>) -> (DMatrix<C64>, nalgebra::DVector<f64>) {
    let eig = ((r + r.adjoint()) * c(0.5, 0.0)).symmetric_eigen();
    let top = eig.eigenvalues.max();
    (eig.eigenvectors, eig.eigenvalues.map(|x| (x / top).max(0.0)))
}

fn normalized_sandwich(left: &DMatrix<C64>, sigma: &DMatrix<C64>) -> DMatrix<C64> {
    let m = left * sigma * left.adjoint();
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    let t = m.trace().re;
    m.unscale(t)
}

pub fn mle(counts: &[CountRecord], tol: f64, max_iter: usize) -> Result<TomographyResult> {
    mle_data(&TomoData::from_counts(counts)?, &MleOptions { tol, max_iter })
}

pub fn mle_data(data: &TomoData, options: &MleOptions) -> Result<TomographyResult> {
    let problem = Problem::new(data)?;
    let d = data.dim();
    let identity = DMatrix::<C64>::identity(d, d);

    // σ for ρ = I/d
    let g_root = hermitian_sqrt(&problem.back.clone().try_inverse().expect("positive definite"));
    let mut sigma = normalized_sandwich(&g_root, &identity);

    let mut probs = problem.probabilities(&sigma);
    let mut ll = problem.log_likelihood_from(&probs);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iter {
        iterations += 1;
        let r = problem.r_operator(&probs);

        let mut candidate = normalized_sandwich(&r, &sigma);
        let mut cand_probs = problem.probabilities(&candidate);
        let mut cand_ll = problem.log_likelihood_from(&cand_probs);

        if cand_ll < ll {
            let mut eps = 1.0;
            let mut accepted = false;
            while eps >= MIN_DILUTION {
                let step = &identity + &r * c(eps, 0.0);
                candidate = normalized_sandwich(&step, &sigma);
                cand_probs = problem.probabilities(&candidate);
                cand_ll = problem.log_likelihood_from(&cand_probs);
                if cand_ll >= ll {
                    accepted = true;
                    break;
                }
                eps *= 0.5;
            }
            if !accepted {
                // no RρR ascent at floating-point resolution; stay put
                candidate = sigma.clone();
                cand_probs = probs.clone();
                cand_ll = ll;
            }
        }

        // Over-relaxation: R^t σ R^t shares the fixed points of the plain
        // step and moves much faster along flat directions near the boundary.
        if cand_ll >= ll {
            let (vecs, vals) = scaled_eigen(&r);
            let mut power = 2.0;
            while power <= MAX_POWER {
                let rt = &vecs * DMatrix::from_diagonal(&vals.map(|x| c(x.powf(power), 0.0))) * vecs.adjoint();
                let trial = normalized_sandwich(&rt, &sigma);
                if !trial.trace().re.is_finite() {
                    break;
                }
                let trial_probs = problem.probabilities(&trial);
                let trial_ll = problem.log_likelihood_from(&trial_probs);
                if trial_ll <= cand_ll {
                    break;
                }
                candidate = trial;
                cand_probs = trial_probs;
                cand_ll = trial_ll;
                power *= 2.0;
            }
        }

        // Projected Newton step from the same point. RρR alone is sublinear
        // when the maximum sits on the boundary (for instance pure states).
        if let Some(dir) = problem.newton_direction(&probs) {
            let mut scale = 1.0;
            while scale >= MIN_NEWTON_SCALE {
                let trial = project_to_states(&(&sigma + &dir * c(scale, 0.0)));
                let trial_probs = problem.probabilities(&trial);
                let trial_ll = problem.log_likelihood_from(&trial_probs);
                if trial_ll > cand_ll {
                    candidate = trial;
                    cand_probs = trial_probs;
                    cand_ll = trial_ll;
                    break;
                }
                scale *= 0.5;
            }
        }

        // Dropping small eigenvalues outright; the multiplicative steps only
        // shrink them gradually when the maximum has lower rank.
        for rank in 1..d {
            let trial = truncate_rank(&candidate, rank);
            let trial_probs = problem.probabilities(&trial);
            let trial_ll = problem.log_likelihood_from(&trial_probs);
            if trial_ll > cand_ll {
                candidate = trial;
                cand_probs = trial_probs;
                cand_ll = trial_ll;
                break;
            }
        }

        let gain = cand_ll - ll;
        sigma = candidate;
        probs = cand_probs;
        ll = cand_ll;
        trace.push(ll);
        if gain <= options.tol * ll.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    debug_assert!((problem.log_likelihood(&sigma) - ll).abs() <= 1e-9 * ll.abs().max(1.0));
    let rho = DensityMatrix::from_positive(problem.to_rho(&sigma))?;
    let rho = DensityMatrix::new(rho.matrix().clone())?;
    Ok(TomographyResult {
        rho,
        log_likelihood: ll,
        iterations,
        converged,
        scheme: data.scheme,
        likelihood_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{simulate_counts, tomo_settings};
    use crate::qcore::{fidelity, PureState};

    fn bell() -> PureState {
        PureState::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn linear_inversion_recovers_bell_from_means() {
        for scheme in [Scheme::Minimal, Scheme::Overcomplete] {
            let settings = tomo_settings(2, scheme).unwrap();
            let data = TomoData::exact(&bell().density(), &settings, 1e4).unwrap();
            let est = linear_inversion_data(&data).unwrap();
            assert!(est.max_abs_diff(bell().density().matrix()) < 1e-8, "{scheme}");
        }
    }

    #[test]
    fn uniform_counts_give_maximally_mixed() {
        let settings = tomo_settings(2, Scheme::Overcomplete).unwrap();
        let counts: Vec<_> = settings
            .into_iter()
            .map(|setting| CountRecord { setting, count: 250, shots_nominal: 1000 })
            .collect();
        let est = linear_inversion(&counts).unwrap();
        assert!(est.max_abs_diff(DensityMatrix::maximally_mixed(2).matrix()) < 1e-12);
        let ml = mle(&counts, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(ml.converged);
        assert!(ml.rho.trace_distance(&DensityMatrix::maximally_mixed(2)).unwrap() < 1e-10);
    }

    #[test]
    fn rank_deficient_settings_rejected() {
        let settings: Vec<_> = tomo_settings(1, Scheme::Overcomplete).unwrap().into_iter().take(2).collect();
        let counts: Vec<_> = settings
            .into_iter()
            .map(|setting| CountRecord { setting, count: 10, shots_nominal: 20 })
            .collect();
        assert!(matches!(linear_inversion(&counts), Err(Error::RankDeficient { .. })));
        assert!(mle(&[], 1e-10, 10).is_err());
    }

    #[test]
    fn mle_exact_pure_state() {
        let psi = PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let settings = tomo_settings(1, Scheme::Overcomplete).unwrap();
        let data = TomoData::exact(&psi.density(), &settings, 1e4).unwrap();
        let res = mle_data(&data, &MleOptions::default()).unwrap();
        assert!(fidelity(&res.rho, &psi).unwrap() >= 1.0 - 1e-6);
        assert_eq!(res.scheme, Some(Scheme::Overcomplete));
    }

    #[test]
    fn mle_minimal_scheme_exact_state() {
        let rho = DensityMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.7, 0.0), c(0.1, -0.2), c(0.1, 0.2), c(0.3, 0.0)],
        ))
        .unwrap();
        let settings = tomo_settings(1, Scheme::Minimal).unwrap();
        let data = TomoData::exact(&rho, &settings, 1e4).unwrap();
        let res = mle_data(&data, &MleOptions::default()).unwrap();
        assert!(res.converged && res.rho.trace_distance(&rho).unwrap() < 1e-6);
        assert_eq!(res.scheme, Some(Scheme::Minimal));
    }

    #[test]
    fn zero_counts_are_handled() {
        let h = PureState::basis(1, 0).unwrap().density();
        let settings = tomo_settings(1, Scheme::Overcomplete).unwrap();
        let counts = simulate_counts(&h, &settings, 1000, 5).unwrap();
        assert_eq!(counts[1].count, 0);
        let res = mle(&counts, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(res.rho.eigenvalues().iter().all(|&x| x >= -1e-10));
        assert!(res.log_likelihood.is_finite());
    }

    #[test]
    fn iteration_cap_reports_unconverged() {
        let psi = bell();
        let settings = tomo_settings(2, Scheme::Overcomplete).unwrap();
        let counts = simulate_counts(&psi.density(), &settings, 10_000, 8).unwrap();
        let res = mle(&counts, 0.0, 3).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 3);
        assert_eq!(res.likelihood_trace.len(), 4);
    }

    #[test]
    fn shot_noise_linear_inversion_is_hermitian() {
        let settings = tomo_settings(2, Scheme::Overcomplete).unwrap();
        let counts = simulate_counts(&bell().density(), &settings, 100, 21).unwrap();
        let est = linear_inversion(&counts).unwrap();
        assert!((est.trace() - 1.0).abs() < 1e-12);
        let herm = (est.matrix() - est.matrix().adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(herm < 1e-14);
    }
}

