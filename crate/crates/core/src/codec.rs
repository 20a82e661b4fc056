//! Parity encoding against Z-measurement: α|0⟩+β|1⟩ ↦ α(|00⟩+|11⟩) + β(|01⟩+|10⟩).
//!
//! A Z-measurement of either physical qubit leaves the other holding the
//! input (outcome 0) or its bit-flipped version (outcome 1). The n-qubit
//! extension puts α on every even-parity basis state and β on every odd one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cnotgate::{noisy_cnot, postselect_cnot, NoiseModel};
use crate::error::{Error, Result};
use crate::optics::control_preparation;
use crate::qcore::{c, conditional_state, DensityMatrix, Operator, PureState};

/// Largest code width accepted by [`parity_extend`] unless overridden.
pub const DEFAULT_MAX_WIDTH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GateModel {
    Ideal,
    Noisy(NoiseModel),
}

impl GateModel {
    pub fn noise(&self) -> NoiseModel {
        match self {
            GateModel::Ideal => NoiseModel::IDEAL,
            GateModel::Noisy(n) => *n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Provenance {
    Ideal,
    GateSimulated { noise: NoiseModel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedState {
    pub state: DensityMatrix,
    pub provenance: Provenance,
    pub input: String,
}

impl EncodedState {
    pub fn num_qubits(&self) -> usize {
        self.state.num_qubits()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedResult {
    pub outcome: u8,
    pub probability: f64,
    pub state: DensityMatrix,
    pub corrected: bool,
}

fn check_single(psi: &PureState) -> Result<()> {
    if psi.num_qubits() != 1 {
        return Err(Error::DimensionMismatch { expected: 2, actual: psi.dim() });
    }
    Ok(())
}

/// Ideal two-qubit code state for `psi`.
pub fn ideal_encoded(psi: &PureState) -> Result<PureState> {
    check_single(psi)?;
    let (a, b) = (psi.amplitude(0), psi.amplitude(1));
    PureState::new(vec![a, b, b, a])
}

/// Short human-readable label for a single-qubit input, e.g. `|0⟩+i|1⟩`.
pub fn describe(psi: &PureState) -> String {
    let (a, b) = (psi.amplitude(0), psi.amplitude(1));
    format!("({:.4}{:+.4}i)|0⟩+({:.4}{:+.4}i)|1⟩", a.re, a.im, b.re, b.im)
}

/// Runs the encoder: the control is prepared as (|0⟩+|1⟩)/√2, `psi` enters
/// the target, and the gate acts. Returns the post-selection probability.
pub fn encode(psi: &PureState, gate: &GateModel) -> Result<(f64, EncodedState)> {
    encode_labeled(psi, gate, describe(psi))
}

pub fn encode_labeled(psi: &PureState, gate: &GateModel, label: String) -> Result<(f64, EncodedState)> {
    check_single(psi)?;
    let (control, _) = control_preparation()?;
    let input = control.tensor(psi);
    let (p, state, provenance) = match gate {
        GateModel::Ideal => {
            let (p, out) = postselect_cnot(&input)?;
            (p, out.density(), Provenance::Ideal)
        }
        GateModel::Noisy(noise) => {
            let (p, out) = noisy_cnot(&input.density(), noise)?;
            (p, out, Provenance::GateSimulated { noise: *noise })
        }
    };
    Ok((p, EncodedState { state, provenance, input: label }))
}

fn finish_decode(probability: f64, state: DensityMatrix, outcome: u8, correct: bool) -> Result<DecodedResult> {
    let flip = correct && outcome == 1;
    let state = if flip {
        let n = state.num_qubits();
        // Flipping any one qubit restores the logical state of a parity code.
        state.evolve(&Operator::on_qubit(&Operator::pauli_x(), 0, n)?)?
    } else {
        state
    };
    Ok(DecodedResult { outcome, probability, state, corrected: flip })
}

/// Z-measures `measured_qubit` with the given `outcome`. With `correct`, an
/// outcome of 1 is followed by an X on the survivor so the result targets
/// the input rather than its bit-flipped version.
pub fn decode(encoded: &EncodedState, measured_qubit: usize, outcome: u8, correct: bool) -> Result<DecodedResult> {
    decode_state(&encoded.state, measured_qubit, outcome, correct)
}

/// As [`decode`], for any code-state density matrix (e.g. a reconstruction).
pub fn decode_state(rho: &DensityMatrix, measured_qubit: usize, outcome: u8, correct: bool) -> Result<DecodedResult> {
    let (p, state) = conditional_state(rho, measured_qubit, outcome)?;
    finish_decode(p, state, outcome, correct)
}

/// As [`decode`], with the outcome drawn from its Born probability.
pub fn decode_sampled<R: Rng + ?Sized>(
    encoded: &EncodedState,
    measured_qubit: usize,
    correct: bool,
    rng: &mut R,
) -> Result<DecodedResult> {
    let (p0, _) = match conditional_state(&encoded.state, measured_qubit, 0) {
        Ok(v) => v,
        Err(Error::ImpossibleOutcome { .. }) => (0.0, encoded.state.clone()),
        Err(e) => return Err(e),
    };
    let outcome = if rng.random::<f64>() < p0 { 0 } else { 1 };
    decode(encoded, measured_qubit, outcome, correct)
}

/// n-qubit parity code: α·(even-parity superposition) + β·(odd-parity superposition).
pub fn parity_extend(psi: &PureState, n: usize) -> Result<PureState> {
    parity_extend_with_limit(psi, n, DEFAULT_MAX_WIDTH)
}

pub fn parity_extend_with_limit(psi: &PureState, n: usize, max_width: usize) -> Result<PureState> {
    check_single(psi)?;
    if n < 1 || n > max_width {
        return Err(Error::OutOfRange(format!("code width {n} outside 1..={max_width}")));
    }
    let (a, b) = (psi.amplitude(0), psi.amplitude(1));
    let amps = (0..1usize << n)
        .map(|i| if i.count_ones() % 2 == 0 { a } else { b })
        .collect();
    PureState::new(amps)
}

/// Bit-flips a single-qubit state: α|0⟩+β|1⟩ ↦ β|0⟩+α|1⟩.
pub fn bit_flipped(psi: &PureState) -> Result<PureState> {
    check_single(psi)?;
    PureState::qubit(psi.amplitude(1), psi.amplitude(0))
}

/// The six single-qubit inputs with their conventional labels.
pub fn table_one_inputs() -> Vec<(&'static str, PureState)> {
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let i = c(0.0, 1.0);
    [
        ("|0⟩", one, zero),
        ("|1⟩", zero, one),
        ("|0⟩+|1⟩", one, one),
        ("|0⟩-|1⟩", one, -one),
        ("|0⟩+i|1⟩", one, i),
        ("|0⟩-i|1⟩", one, -i),
    ]
    .into_iter()
    .map(|(label, a, b)| (label, PureState::qubit(a, b).expect("nonzero")))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::fidelity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ket(v: &[(f64, f64)]) -> PureState {
        PureState::new(v.iter().map(|&(r, i)| c(r, i)).collect()).unwrap()
    }

    fn same(a: &PureState, b: &PureState) -> bool {
        (a.inner(b).norm_sqr() - 1.0).abs() < 1e-12
    }

    #[test]
    fn table_one_rows() {
        let one = ideal_encoded(&ket(&[(0.0, 0.0), (1.0, 0.0)])).unwrap();
        assert!(same(&one, &ket(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)])));
        let minus = ideal_encoded(&ket(&[(1.0, 0.0), (-1.0, 0.0)])).unwrap();
        assert!(same(&minus, &ket(&[(1.0, 0.0), (-1.0, 0.0), (-1.0, 0.0), (1.0, 0.0)])));
        let plus_i = ideal_encoded(&ket(&[(1.0, 0.0), (0.0, 1.0)])).unwrap();
        assert!(same(&plus_i, &ket(&[(1.0, 0.0), (0.0, 1.0), (0.0, 1.0), (1.0, 0.0)])));
        assert!((plus_i.amplitude(1) - c(0.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn ideal_gate_encodes_exactly() {
        for (_, psi) in table_one_inputs() {
            let (p, enc) = encode(&psi, &GateModel::Ideal).unwrap();
            assert!((p - 1.0 / 9.0).abs() < 1e-12);
            let f = fidelity(&enc.state, &ideal_encoded(&psi).unwrap()).unwrap();
            assert!((f - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn decode_plus_i_uncorrected() {
        let psi = ket(&[(1.0, 0.0), (0.0, 1.0)]);
        let (_, enc) = encode(&psi, &GateModel::Ideal).unwrap();
        let r = decode(&enc, 1, 0, false).unwrap();
        assert!((r.probability - 0.5).abs() < 1e-12);
        assert!(!r.corrected);
        assert!((fidelity(&r.state, &psi).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn decode_with_correction_restores_input() {
        let psi = ket(&[(0.6, 0.0), (0.0, -0.8)]);
        let (_, enc) = encode(&psi, &GateModel::Ideal).unwrap();
        let r = decode(&enc, 0, 1, true).unwrap();
        assert!(r.corrected);
        assert!((fidelity(&r.state, &psi).unwrap() - 1.0).abs() < 1e-10);
        let raw = decode(&enc, 0, 1, false).unwrap();
        assert!((fidelity(&raw.state, &bit_flipped(&psi).unwrap()).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sampled_decoding_is_seeded() {
        let psi = ket(&[(0.6, 0.0), (0.0, 0.8)]);
        let (_, enc) = encode(&psi, &GateModel::Ideal).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32).map(|_| decode_sampled(&enc, 1, true, &mut rng).unwrap().outcome).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        let outcomes = draw(11);
        assert!(outcomes.contains(&0) && outcomes.contains(&1));
    }

    #[test]
    fn parity_extend_cases() {
        let psi = ket(&[(0.6, 0.0), (0.0, 0.8)]);
        assert!(same(&parity_extend(&psi, 2).unwrap(), &ideal_encoded(&psi).unwrap()));
        let zero3 = parity_extend(&ket(&[(1.0, 0.0), (0.0, 0.0)]), 3).unwrap();
        for i in 0..8usize {
            let expected = if i.count_ones() % 2 == 0 { 0.5 } else { 0.0 };
            assert!((zero3.amplitude(i).re - expected).abs() < 1e-12);
        }
        assert!(parity_extend(&psi, 7).is_err());
        assert!(parity_extend_with_limit(&psi, 7, 8).is_ok());
    }

    #[test]
    fn three_qubit_code_from_cnot_chain() {
        // Encode with the 2-qubit encoder, then add a third qubit prepared
        // in |+⟩ as control with encoded qubit 1 as target.
        let psi = ket(&[(0.28, 0.1), (-0.5, 0.81)]);
        let two = ideal_encoded(&psi).unwrap();
        let plus = ket(&[(1.0, 0.0), (1.0, 0.0)]);
        let three_in = plus.tensor(&two); // new qubit is qubit 0
        let cnot_02 = {
            // control qubit 0, target qubit 2 (the previously second code qubit)
            let mut m = nalgebra::DMatrix::zeros(8, 8);
            for i in 0..8usize {
                let j = if i & 0b100 != 0 { i ^ 0b001 } else { i };
                m[(j, i)] = c(1.0, 0.0);
            }
            Operator::new(m).unwrap()
        };
        let (_, chained) = three_in.apply(&cnot_02).unwrap();
        assert!(same(&chained, &parity_extend(&psi, 3).unwrap()));
    }

    #[test]
    fn decoding_three_qubit_code_reduces_width() {
        let psi = ket(&[(0.28, 0.1), (-0.5, 0.81)]);
        let three = EncodedState {
            state: parity_extend(&psi, 3).unwrap().density(),
            provenance: Provenance::Ideal,
            input: describe(&psi),
        };
        let two = ideal_encoded(&psi).unwrap();
        for q in 0..3 {
            for outcome in 0..2u8 {
                let r = decode(&three, q, outcome, true).unwrap();
                assert!((r.probability - 0.5).abs() < 1e-12);
                assert!((fidelity(&r.state, &two).unwrap() - 1.0).abs() < 1e-10);
            }
        }
    }
}
