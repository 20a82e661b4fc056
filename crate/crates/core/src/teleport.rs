//! Teleportation of a parity-encoded qubit with probabilistic Bell analysers.
//!
//! Each analyser succeeds with probability n/(n+1). A failure acts as a
//! Z-measurement of the code qubit being teleported; the remaining code
//! qubits still carry the logical state after an X correction when the
//! outcome is 1, so the next code qubit can be tried. A success teleports the
//! qubit up to a Pauli X^a Z^b fixed by the Bell outcome "ab".

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::parity_extend;
use crate::error::{Error, Result};
use crate::qcore::{fidelity, DensityMatrix, Operator, PureState, C64};

const NORM_TOL: f64 = 1e-10;
const MC_CHUNK: u64 = 4096;

pub fn attempt_success_prob(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::OutOfRange(format!("ancilla size n = {n} must be at least 1")));
    }
    Ok(f64::from(n) / (f64::from(n) + 1.0))
}

/// Success probability of teleporting a width-`code_width` encoded qubit,
/// obtained by summing the probabilities of the branches in which some
/// attempt succeeds.
pub fn encoded_teleport_success(n: u32, code_width: usize) -> Result<f64> {
    if code_width < 1 {
        return Err(Error::OutOfRange("code width must be at least 1".into()));
    }
    let p = attempt_success_prob(n)?;
    // Branch k: the first k attempts fail and attempt k+1 succeeds.
    let mut total = 0.0;
    let mut all_failed = 1.0;
    for _ in 0..code_width {
        total += all_failed * p;
        all_failed *= 1.0 - p;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Correction {
    X,
    Z,
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correction::X => "X",
            Correction::Z => "Z",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub success: bool,
    /// Z-measurement outcome of a failed attempt. `None` when the failed
    /// qubit was the last one and was left in place.
    pub z_outcome: Option<u8>,
    /// Bell outcome "ab" of a successful attempt, requiring X^a then Z^b.
    pub bell_outcome: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleportOutcome {
    pub attempts: Vec<Attempt>,
    pub corrections_applied: Vec<Correction>,
    /// Z outcomes read from code qubits left over after a success.
    pub readout: Vec<u8>,
    pub final_state: DensityMatrix,
    pub overall_success: bool,
}

/// Source of the random events in one teleportation run.
pub trait AttemptSource {
    fn attempt_succeeds(&mut self, success_prob: f64) -> bool;
    /// Z outcome given the probability of reading 0.
    fn z_outcome(&mut self, p_zero: f64) -> u8;
    fn bell_outcome(&mut self) -> (u8, u8);
}

pub struct RngSource<R>(pub R);

impl<R: Rng> AttemptSource for RngSource<R> {
    fn attempt_succeeds(&mut self, success_prob: f64) -> bool {
        self.0.random::<f64>() < success_prob
    }

    fn z_outcome(&mut self, p_zero: f64) -> u8 {
        u8::from(self.0.random::<f64>() >= p_zero)
    }

    fn bell_outcome(&mut self) -> (u8, u8) {
        let k: u8 = self.0.random_range(0..4);
        (k >> 1, k & 1)
    }
}

/// One scripted analyser result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Fail { z: u8 },
    Succeed { a: u8, b: u8 },
}

/// Replays fixed branches; leftover readouts come from `readout`, then 0.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSource {
    branches: VecDeque<Branch>,
    readout: VecDeque<u8>,
    current: Option<Branch>,
}

impl ScriptedSource {
    pub fn new(branches: impl IntoIterator<Item = Branch>) -> Self {
        Self { branches: branches.into_iter().collect(), ..Self::default() }
    }

    pub fn with_readout(mut self, readout: impl IntoIterator<Item = u8>) -> Self {
        self.readout = readout.into_iter().collect();
        self
    }
}

impl AttemptSource for ScriptedSource {
    fn attempt_succeeds(&mut self, _success_prob: f64) -> bool {
        let next = self.branches.pop_front().expect("script exhausted");
        self.current = Some(next);
        matches!(next, Branch::Succeed { .. })
    }

    fn z_outcome(&mut self, _p_zero: f64) -> u8 {
        match self.current.take() {
            Some(Branch::Fail { z }) => z,
            _ => self.readout.pop_front().unwrap_or(0),
        }
    }

    fn bell_outcome(&mut self) -> (u8, u8) {
        match self.current.take() {
            Some(Branch::Succeed { a, b }) => (a, b),
            other => panic!("no scripted Bell outcome (have {other:?})"),
        }
    }
}

fn on_first(state: &PureState, op: &Operator) -> Result<PureState> {
    let full = Operator::on_qubit(op, 0, state.num_qubits())?;
    Ok(state.apply(&full)?.1)
}

/// Z-measures qubit 0 and flips the new qubit 0 when the outcome is 1.
fn measure_and_fix(state: &PureState, source: &mut dyn AttemptSource) -> Result<(u8, PureState)> {
    let p_zero = state.prob_zero(0)?;
    let z = source.z_outcome(p_zero);
    let (_, rest) = state.measure_z(0, z)?;
    let rest = if z == 1 { on_first(&rest, &Operator::pauli_x())? } else { rest };
    Ok((z, rest))
}

fn check_input(alpha: C64, beta: C64) -> Result<PureState> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::Normalization(format!("|α|²+|β|² = {norm}")));
    }
    PureState::qubit(alpha, beta)
}

/// Teleports α|0⟩+β|1⟩ encoded in a width-`code_width` parity code, drawing
/// events from `source`.
pub fn simulate_teleport_with(
    alpha: C64,
    beta: C64,
    n: u32,
    code_width: usize,
    source: &mut dyn AttemptSource,
) -> Result<TeleportOutcome> {
    let psi = check_input(alpha, beta)?;
    let p = attempt_success_prob(n)?;
    let mut code = parity_extend(&psi, code_width)?;
    let mut attempts = Vec::new();
    let mut corrections = Vec::new();
    let mut readout = Vec::new();
    let mut overall_success = false;

    loop {
        if source.attempt_succeeds(p) {
            let (a, b) = source.bell_outcome();
            if a == 1 {
                code = on_first(&code, &Operator::pauli_x())?;
            }
            if b == 1 {
                code = on_first(&code, &Operator::pauli_z())?;
            }
            if a == 1 {
                code = on_first(&code, &Operator::pauli_x())?;
                corrections.push(Correction::X);
            }
            if b == 1 {
                code = on_first(&code, &Operator::pauli_z())?;
                corrections.push(Correction::Z);
            }
            attempts.push(Attempt { success: true, z_outcome: None, bell_outcome: Some(format!("{a}{b}")) });
            overall_success = true;
            // Decode the leftover code qubits onto the teleported one.
            while code.num_qubits() > 1 {
                let swapped = move_first_to_end(&code)?;
                let (z, rest) = measure_and_fix(&swapped, source)?;
                if z == 1 {
                    corrections.push(Correction::X);
                }
                readout.push(z);
                code = restore_order(&rest)?;
            }
            break;
        }
        if code.num_qubits() == 1 {
            attempts.push(Attempt { success: false, z_outcome: None, bell_outcome: None });
            break;
        }
        let (z, rest) = measure_and_fix(&code, source)?;
        if z == 1 {
            corrections.push(Correction::X);
        }
        attempts.push(Attempt { success: false, z_outcome: Some(z), bell_outcome: None });
        code = rest;
    }

    Ok(TeleportOutcome {
        attempts,
        corrections_applied: corrections,
        readout,
        final_state: code.density(),
        overall_success,
    })
}

/// Cyclic shift bringing qubit 1 to position 0 and qubit 0 to the end, so
/// the teleported qubit is never the one read out.
fn move_first_to_end(state: &PureState) -> Result<PureState> {
    let n = state.num_qubits();
    let dim = state.dim();
    let amps: Vec<C64> = (0..dim)
        .map(|j| {
            // j indexes (q1, ..., q_{n-1}, q0); rebuild the original index.
            let q0 = j & 1;
            let rest = j >> 1;
            state.amplitude((q0 << (n - 1)) | rest)
        })
        .collect();
    PureState::new(amps)
}

/// Inverse of [`move_first_to_end`] after its new first qubit was removed.
fn restore_order(state: &PureState) -> Result<PureState> {
    let n = state.num_qubits();
    if n == 1 {
        return Ok(state.clone());
    }
    let dim = state.dim();
    let amps: Vec<C64> = (0..dim)
        .map(|i| {
            // i indexes (q0, rest); stored layout is (rest, q0).
            let q0 = i >> (n - 1);
            let rest = i & ((1 << (n - 1)) - 1);
            state.amplitude((rest << 1) | q0)
        })
        .collect();
    PureState::new(amps)
}

/// Width-2 teleportation with events drawn from a seeded generator.
pub fn simulate_teleport(alpha: C64, beta: C64, n: u32, seed: u64) -> Result<TeleportOutcome> {
    let mut source = RngSource(ChaCha8Rng::seed_from_u64(seed));
    simulate_teleport_with(alpha, beta, n, 2, &mut source)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub n: u32,
    pub width: usize,
    pub exact: f64,
    pub estimate: f64,
    pub trials: u64,
    pub std_error: f64,
    /// Smallest final-state fidelity with the input over all trials.
    pub min_fidelity: f64,
}

impl MonteCarloSummary {
    /// |estimate − exact| in units of the binomial standard error.
    pub fn deviation(&self) -> f64 {
        let se = (self.exact * (1.0 - self.exact) / self.trials as f64).sqrt();
        if se == 0.0 {
            if self.estimate == self.exact { 0.0 } else { f64::INFINITY }
        } else {
            (self.estimate - self.exact).abs() / se
        }
    }
}

/// Runs `trials` teleportations of `psi`. Trials are split into fixed-size
/// chunks, each with its own generator stream, so the result depends only on
/// the seed.
pub fn monte_carlo(psi: &PureState, n: u32, width: usize, trials: u64, seed: u64) -> Result<MonteCarloSummary> {
    if trials == 0 {
        return Err(Error::OutOfRange("trials must be at least 1".into()));
    }
    if psi.num_qubits() != 1 {
        return Err(Error::DimensionMismatch { expected: 2, actual: psi.dim() });
    }
    let exact = encoded_teleport_success(n, width)?;
    let (alpha, beta) = (psi.amplitude(0), psi.amplitude(1));
    let chunks = trials.div_ceil(MC_CHUNK);
    let partials = (0..chunks)
        .into_par_iter()
        .map(|chunk| -> Result<(u64, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let mut source = RngSource(rng);
            let len = MC_CHUNK.min(trials - chunk * MC_CHUNK);
            let mut successes = 0;
            let mut min_f = 1.0f64;
            for _ in 0..len {
                let out = simulate_teleport_with(alpha, beta, n, width, &mut source)?;
                successes += u64::from(out.overall_success);
                min_f = min_f.min(fidelity(&out.final_state, psi)?);
            }
            Ok((successes, min_f))
        })
        .collect::<Result<Vec<_>>>()?;
    let successes: u64 = partials.iter().map(|p| p.0).sum();
    let min_fidelity = partials.iter().map(|p| p.1).fold(1.0, f64::min);
    let estimate = successes as f64 / trials as f64;
    Ok(MonteCarloSummary {
        n,
        width,
        exact,
        estimate,
        trials,
        std_error: (estimate * (1.0 - estimate) / trials as f64).sqrt(),
        min_fidelity,
    })
}
