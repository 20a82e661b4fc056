//! Property tests for the invariants of each module.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zqec::cnotgate::NoiseModel;
use zqec::codec::{decode, encode, ideal_encoded, GateModel};
use zqec::measure::{tomo_settings, CountRecord, Scheme};
use zqec::optics::{prepare_input, waveplate, InputFamily, WaveplateSetting};
use zqec::qcore::{conditional_state, fidelity, partial_trace, DensityMatrix, PureState};
use zqec::teleport::{encoded_teleport_success, monte_carlo};
use zqec::tomo::{linear_inversion_data, mle, mle_data, MleOptions, TomoData, DEFAULT_MAX_ITER, DEFAULT_TOL};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn state_from(parts: &[f64]) -> PureState {
    let amps = parts.chunks(2).map(|p| c(p[0], p[1])).collect();
    PureState::new(amps).unwrap()
}

fn density_from(dim: usize, parts: &[f64]) -> DensityMatrix {
    let a = DMatrix::from_fn(dim, dim, |r, k| c(parts[2 * (r * dim + k)], parts[2 * (r * dim + k) + 1]));
    let m = &a * a.adjoint();
    let t = m.trace().re;
    DensityMatrix::new(m.unscale(t)).unwrap()
}

fn ket(parts: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, parts).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
}

fn trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let d = a - b;
    let h = (&d + d.adjoint()) * c(0.5, 0.0);
    h.symmetric_eigen().eigenvalues.iter().map(|x| x.abs()).sum::<f64>() / 2.0
}

fn assert_valid(rho: &DensityMatrix) {
    let m = rho.matrix();
    assert!((m - m.adjoint()).iter().all(|z| z.norm() < 1e-10));
    assert!((m.trace().re - 1.0).abs() < 1e-10);
    assert!(rho.eigenvalues().iter().all(|&x| x >= -1e-10));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn waveplates_are_unitary(angle in -720.0f64..720.0) {
        for plate in [WaveplateSetting::half(angle).unwrap(), WaveplateSetting::quarter(angle).unwrap()] {
            prop_assert!(waveplate(&plate).unitarity_error() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn half_wave_plate_is_an_involution(angle in -360.0f64..360.0) {
        let h = waveplate(&WaveplateSetting::half(angle).unwrap());
        let sq = h.matrix() * h.matrix();
        let phase = sq[(0, 0)];
        prop_assert!((phase.norm() - 1.0).abs() < 1e-12);
        prop_assert!((sq - DMatrix::identity(2, 2) * phase).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn fidelity_ignores_global_phase(rho in ket(32), psi in ket(8), phase in 0.0f64..2.0 * PI) {
        let rho = density_from(4, &rho);
        let psi = state_from(&psi);
        let f = fidelity(&rho, &psi).unwrap();
        let g = fidelity(&rho, &psi.with_global_phase(phase)).unwrap();
        prop_assert!((f - g).abs() < 1e-12);
    }

    #[test]
    fn measurement_probabilities_sum_to_one(rho in ket(32), qubit in 0usize..2) {
        let rho = density_from(4, &rho);
        let (p0, _) = conditional_state(&rho, qubit, 0).unwrap();
        let (p1, _) = conditional_state(&rho, qubit, 1).unwrap();
        prop_assert!((p0 + p1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn partial_trace_is_the_outcome_mixture(rho in ket(32), measured in 0usize..2) {
        let rho = density_from(4, &rho);
        let keep = 1 - measured;
        let reduced = partial_trace(&rho, keep).unwrap();
        let mut mix = DMatrix::<C64>::zeros(2, 2);
        for outcome in [0, 1] {
            if let Ok((p, cond)) = conditional_state(&rho, measured, outcome) {
                mix += cond.matrix() * c(p, 0.0);
            }
        }
        prop_assert!((reduced.matrix() - mix).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn encoding_has_parity_structure(psi in ket(4)) {
        let psi = state_from(&psi);
        let enc = ideal_encoded(&psi).unwrap();
        let (a, b) = (psi.amplitude(0) * FRAC_1_SQRT_2, psi.amplitude(1) * FRAC_1_SQRT_2);
        for i in 0..4usize {
            let expected = if i.count_ones() % 2 == 0 { a } else { b };
            prop_assert!((enc.amplitude(i) - expected).norm() < 1e-12);
        }
        let swapped = enc.swap_qubits().unwrap();
        prop_assert!((swapped.amplitudes() - enc.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn analyzer_probabilities_are_bounded(rho in ket(32)) {
        let rho = density_from(4, &rho);
        for scheme in [Scheme::Minimal, Scheme::Overcomplete] {
            for s in tomo_settings(2, scheme).unwrap() {
                let p = rho.expectation(&s.projector()).unwrap();
                prop_assert!(p.re >= -1e-10 && p.re <= 1.0 + 1e-10 && p.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn noisy_gate_output_is_valid(
        psi in ket(4),
        v in (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0),
    ) {
        let noise = NoiseModel::new(v.0, v.1, v.2).unwrap();
        let psi = state_from(&psi);
        let (p, enc) = encode(&psi, &GateModel::Noisy(noise)).unwrap();
        assert_valid(&enc.state);
        prop_assert!(p > 0.0 && p <= 5.0 / 9.0 + 1e-12, "p = {}", p);
        if v.0 == 1.0 {
            prop_assert!((p - 1.0 / 9.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mle_output_is_always_valid(
        counts in prop::collection::vec(0u64..500, 36),
        zeros in prop::collection::vec(any::<bool>(), 36),
    ) {
        let settings = tomo_settings(2, Scheme::Overcomplete).unwrap();
        let records: Vec<CountRecord> = settings
            .into_iter()
            .zip(counts.iter().zip(&zeros))
            .map(|(setting, (&n, &z))| CountRecord { setting, count: if z { 0 } else { n }, shots_nominal: 500 })
            .collect();
        prop_assume!(records.iter().any(|r| r.count > 0));
        let res = mle(&records, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_valid(&res.rho);
        prop_assert!(res.likelihood_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn mle_matches_linear_inversion_on_exact_data(rho in ket(32), minimal in any::<bool>()) {
        let rho = density_from(4, &rho);
        prop_assume!(rho.eigenvalues().iter().all(|&x| x > 1e-3));
        let scheme = if minimal { Scheme::Minimal } else { Scheme::Overcomplete };
        let data = TomoData::exact(&rho, &tomo_settings(2, scheme).unwrap(), 1e4).unwrap();
        let li = linear_inversion_data(&data).unwrap();
        let res = mle_data(&data, &MleOptions::default()).unwrap();
        prop_assert!(trace_distance(li.matrix(), res.rho.matrix()) < 1e-6);
        prop_assert!(trace_distance(rho.matrix(), res.rho.matrix()) < 1e-6);
    }
}

#[test]
fn preparation_recipes_reproduce_their_states() {
    for family in [InputFamily::Theta, InputFamily::Phi] {
        for angle in 0..360 {
            let (psi, recipe) = prepare_input(family, angle as f64).unwrap();
            let realized = recipe.realize().unwrap();
            assert!(fidelity(&realized.density(), &psi).unwrap() >= 1.0 - 1e-10, "{family:?} {angle}");
        }
    }
}

#[test]
fn overcomplete_sextet_sums_to_three() {
    let settings = tomo_settings(1, Scheme::Overcomplete).unwrap();
    assert_eq!(settings.len(), 6);
    let sum = settings.iter().fold(DMatrix::<C64>::zeros(2, 2), |acc, s| acc + s.projector().matrix());
    assert!((sum - DMatrix::identity(2, 2) * c(3.0, 0.0)).iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn ideal_roundtrip_over_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let parts: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
        let psi = state_from(&parts);
        let (_, enc) = encode(&psi, &GateModel::Ideal).unwrap();
        for qubit in 0..2 {
            for outcome in 0..2 {
                let out = decode(&enc, qubit, outcome, true).unwrap();
                assert!((out.probability - 0.5).abs() < 1e-12);
                assert!((1.0 - fidelity(&out.state, &psi).unwrap()).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn encoded_fidelity_grows_with_each_visibility() {
    let zero = PureState::basis(1, 0).unwrap();
    let target = ideal_encoded(&zero).unwrap();
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let f = |a: usize, b: usize, k: usize| {
        let noise = NoiseModel::new(grid[a], grid[b], grid[k]).unwrap();
        let (_, enc) = encode(&zero, &GateModel::Noisy(noise)).unwrap();
        fidelity(&enc.state, &target).unwrap()
    };
    for a in 0..5 {
        for b in 0..5 {
            for k in 0..5 {
                let here = f(a, b, k);
                if a < 4 {
                    assert!(f(a + 1, b, k) >= here - 1e-12, "v_nc step at {a},{b},{k}");
                }
                if b < 4 {
                    assert!(f(a, b + 1, k) >= here - 1e-12, "v_cc step at {a},{b},{k}");
                }
                if k < 4 {
                    assert!(f(a, b, k + 1) >= here - 1e-12, "v_ct step at {a},{b},{k}");
                }
            }
        }
    }
}

#[test]
fn qubit_one_zero_outcome_decodes_better() {
    let grid = [0.0, 0.5, 0.9];
    for v_nc in grid {
        for v_cc in grid {
            for v_ct in grid {
                let gate = GateModel::Noisy(NoiseModel::new(v_nc, v_cc, v_ct).unwrap());
                for angle in (10..=80).step_by(10) {
                    let (psi, _) = prepare_input(InputFamily::Theta, angle as f64).unwrap();
                    let (_, enc) = encode(&psi, &gate).unwrap();
                    let f0 = fidelity(&decode(&enc, 0, 0, true).unwrap().state, &psi).unwrap();
                    let f1 = fidelity(&decode(&enc, 0, 1, true).unwrap().state, &psi).unwrap();
                    assert!(f0 >= f1 - 1e-12, "θ={angle} noise ({v_nc}, {v_cc}, {v_ct}): {f0} < {f1}");
                }
            }
        }
    }
}

#[test]
fn monte_carlo_stays_within_four_standard_errors() {
    let psi = PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    let runs = 200;
    let trials = 2000;
    let exact = encoded_teleport_success(2, 2).unwrap();
    let bound = 4.0 * (exact * (1.0 - exact) / trials as f64).sqrt();
    let inside = (0..runs)
        .filter(|&seed| (monte_carlo(&psi, 2, 2, trials, seed).unwrap().estimate - exact).abs() < bound)
        .count();
    assert!(inside as f64 >= 0.99 * runs as f64, "{inside} of {runs}");
}
