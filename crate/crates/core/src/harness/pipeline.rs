//! Per-figure computations. Each function returns ordered cells; file output
//! lives in `report`.

use rayon::prelude::*;
use serde::Serialize;

use crate::cnotgate::NoiseModel;
use crate::codec::{decode_state, encode_labeled, ideal_encoded, table_one_inputs, EncodedState, GateModel};
use crate::error::Result;
use crate::measure::{simulate_counts, tomo_settings, CountRecord, Scheme};
use crate::optics::{prepare_input, InputFamily};
use crate::qcore::{c, fidelity, DensityMatrix, PureState};
use crate::tomo::{mle_data, MleOptions, TomoData};

/// Sweep angles of the two input families, in degrees.
pub const SWEEP_ANGLES: [f64; 8] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0];

/// The four decodings: (measured qubit, outcome), qubits 0-based.
pub const DECODINGS: [(usize, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

/// Table I inputs whose amplitudes are real.
pub const REAL_INPUTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation across the cells.
    pub sd: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let n = values.len();
        if n == 0 {
            return Stats { mean: f64::NAN, sd: f64::NAN, count: 0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stats { mean, sd, count: n }
    }
}

/// How reconstructions obtain their data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TomoPlan {
    pub shots: u64,
    pub scheme: Scheme,
    /// Use mean counts instead of Poisson samples.
    pub exact: bool,
    pub mle: MleOptions,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub counts: Option<Vec<CountRecord>>,
}

pub fn reconstruct(rho: &DensityMatrix, plan: &TomoPlan, seed: u64) -> Result<Reconstruction> {
    let settings = tomo_settings(rho.num_qubits(), plan.scheme)?;
    let (data, counts) = if plan.exact {
        (TomoData::exact(rho, &settings, plan.shots as f64)?, None)
    } else {
        let counts = simulate_counts(rho, &settings, plan.shots, seed)?;
        (TomoData::from_counts(&counts)?, Some(counts))
    };
    let result = mle_data(&data, &plan.mle)?;
    Ok(Reconstruction { rho: result.rho, iterations: result.iterations, converged: result.converged, counts })
}

/// SplitMix64 finalizer, used to derive independent per-cell seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn cell_seed(seed: u64, stream: u64, index: u64) -> u64 {
    mix(mix(seed ^ mix(stream)) ^ index)
}

const FIG2_STREAM: u64 = 2;
const FIG4_STREAM: u64 = 4;

/// Literal Table I code kets (unnormalized), indexed like `table_one_inputs`.
pub fn table_one_expected() -> Vec<(&'static str, PureState)> {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    [
        ("|00⟩+|11⟩", [o, z, z, o]),
        ("|01⟩+|10⟩", [z, o, o, z]),
        ("|00⟩+|01⟩+|10⟩+|11⟩", [o, o, o, o]),
        ("|00⟩-|01⟩-|10⟩+|11⟩", [o, -o, -o, o]),
        ("|00⟩+i|01⟩+i|10⟩+|11⟩", [o, i, i, o]),
        ("|00⟩-i|01⟩-i|10⟩+|11⟩", [o, -i, -i, o]),
    ]
    .into_iter()
    .map(|(label, amps)| (label, PureState::new(amps.to_vec()).expect("nonzero")))
    .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub input: String,
    pub expected: String,
    /// Ideal encoder output against the literal table entry.
    pub ideal_fidelity: f64,
    /// Configured gate output against the literal table entry.
    pub gate_fidelity: f64,
    pub success_probability: f64,
}

pub fn table_one(gate: &GateModel) -> Result<Vec<Table1Row>> {
    table_one_inputs()
        .into_iter()
        .zip(table_one_expected())
        .map(|((label, psi), (expected_label, expected))| {
            let ideal = ideal_encoded(&psi)?;
            let (p, enc) = encode_labeled(&psi, gate, label.to_string())?;
            Ok(Table1Row {
                input: label.to_string(),
                expected: expected_label.to_string(),
                ideal_fidelity: ideal.inner(&expected).norm_sqr(),
                gate_fidelity: fidelity(&enc.state, &expected)?,
                success_probability: p,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig2Cell {
    pub input: String,
    pub success_probability: f64,
    /// Fidelity of the simulated (pre-tomography) encoded state.
    pub true_fidelity: f64,
    /// Fidelity of the reconstruction with the ideal code state.
    pub fidelity: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rho: DensityMatrix,
    #[serde(skip)]
    pub target: PureState,
    #[serde(skip)]
    pub counts: Option<Vec<CountRecord>>,
}

pub fn fig2(gate: &GateModel, plan: &TomoPlan, seed: u64) -> Result<Vec<Fig2Cell>> {
    let inputs = table_one_inputs();
    inputs
        .par_iter()
        .enumerate()
        .map(|(k, (label, psi))| {
            let (p, enc) = encode_labeled(psi, gate, label.to_string())?;
            let ideal = ideal_encoded(psi)?;
            let rec = reconstruct(&enc.state, plan, cell_seed(seed, FIG2_STREAM, k as u64))?;
            Ok(Fig2Cell {
                input: label.to_string(),
                success_probability: p,
                true_fidelity: fidelity(&enc.state, &ideal)?,
                fidelity: fidelity(&rec.rho, &ideal)?,
                iterations: rec.iterations,
                converged: rec.converged,
                rho: rec.rho,
                target: psi.clone(),
                counts: rec.counts,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DecodedCell {
    pub input: String,
    pub family: Option<InputFamily>,
    pub angle_deg: Option<f64>,
    /// 0-based index of the Z-measured qubit.
    pub qubit: usize,
    pub outcome: u8,
    pub probability: f64,
    /// Fidelity of the corrected survivor with the input.
    pub fidelity: f64,
    /// |Im ρ01| of the decoded state.
    pub imag_abs: f64,
    pub rho: DensityMatrix,
    #[serde(skip)]
    pub counts: Option<Vec<CountRecord>>,
}

fn decoded_cell(
    input: &Fig4Input,
    code_state: &DensityMatrix,
    (qubit, outcome): (usize, u8),
    finish: impl FnOnce(DensityMatrix) -> Result<(DensityMatrix, Option<Vec<CountRecord>>)>,
) -> Result<DecodedCell> {
    let dec = decode_state(code_state, qubit, outcome, true)?;
    let (rho, counts) = finish(dec.state)?;
    Ok(DecodedCell {
        input: input.label.clone(),
        family: input.family,
        angle_deg: input.angle_deg,
        qubit,
        outcome,
        probability: dec.probability,
        fidelity: fidelity(&rho, &input.psi)?,
        imag_abs: rho.entry(0, 1).im.abs(),
        rho,
        counts,
    })
}

/// Decodes every fig2 reconstruction in all four ways.
pub fn fig3(cells: &[Fig2Cell]) -> Result<Vec<DecodedCell>> {
    let mut out = Vec::with_capacity(cells.len() * DECODINGS.len());
    for cell in cells {
        let input = Fig4Input { label: cell.input.clone(), family: None, angle_deg: None, psi: cell.target.clone() };
        for d in DECODINGS {
            out.push(decoded_cell(&input, &cell.rho, d, |rho| Ok((rho, None)))?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Fig4Input {
    pub label: String,
    pub family: Option<InputFamily>,
    pub angle_deg: Option<f64>,
    pub psi: PureState,
}

/// Sweep inputs (θ family, then φ family) followed by the Table I inputs.
pub fn fig4_inputs() -> Result<Vec<Fig4Input>> {
    let mut inputs = Vec::new();
    for (family, symbol) in [(InputFamily::Theta, "θ"), (InputFamily::Phi, "φ")] {
        for angle in SWEEP_ANGLES {
            let (psi, _) = prepare_input(family, angle)?;
            inputs.push(Fig4Input {
                label: format!("{symbol}={angle}°"),
                family: Some(family),
                angle_deg: Some(angle),
                psi,
            });
        }
    }
    for (label, psi) in table_one_inputs() {
        inputs.push(Fig4Input { label: label.to_string(), family: None, angle_deg: None, psi });
    }
    Ok(inputs)
}

/// Encodes each input with the gate, decodes, and reconstructs the survivor
/// with single-qubit tomography.
pub fn fig4(gate: &GateModel, plan: &TomoPlan, seed: u64) -> Result<Vec<DecodedCell>> {
    let inputs = fig4_inputs()?;
    let jobs: Vec<(usize, usize)> = (0..inputs.len()).flat_map(|i| (0..DECODINGS.len()).map(move |d| (i, d))).collect();
    let encoded = inputs
        .par_iter()
        .map(|input| Ok(encode_labeled(&input.psi, gate, input.label.clone())?.1))
        .collect::<Result<Vec<_>>>()?;
    jobs.par_iter()
        .enumerate()
        .map(|(k, &(i, d))| {
            decoded_cell(&inputs[i], &encoded[i].state, DECODINGS[d], |rho| {
                let rec = reconstruct(&rho, plan, cell_seed(seed, FIG4_STREAM, k as u64))?;
                Ok((rec.rho, rec.counts))
            })
        })
        .collect()
}

/// Fig. 4 cells belonging to the θ/φ sweep.
pub fn sweep_cells(cells: &[DecodedCell]) -> impl Iterator<Item = &DecodedCell> {
    cells.iter().filter(|c| c.family.is_some())
}

/// Mean of the three headline quantities computed on exact states, i.e. the
/// high-shot limit of the fig2, fig3 and fig4 pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineMeans {
    pub encoded: f64,
    pub decoded_reconstructed: f64,
    pub decoded_direct: f64,
}

impl PipelineMeans {
    pub fn as_array(&self) -> [f64; 3] {
        [self.encoded, self.decoded_reconstructed, self.decoded_direct]
    }
}

fn mean_decoded(encoded: &EncodedState, psi: &PureState) -> Result<f64> {
    let mut total = 0.0;
    for (q, o) in DECODINGS {
        total += fidelity(&decode_state(&encoded.state, q, o, true)?.state, psi)?;
    }
    Ok(total / DECODINGS.len() as f64)
}

pub fn pipeline_means_exact(noise: &NoiseModel) -> Result<PipelineMeans> {
    let gate = GateModel::Noisy(*noise);
    let mut encoded_sum = 0.0;
    let mut decoded_sum = 0.0;
    let table = table_one_inputs();
    for (label, psi) in &table {
        let (_, enc) = encode_labeled(psi, &gate, label.to_string())?;
        encoded_sum += fidelity(&enc.state, &ideal_encoded(psi)?)?;
        decoded_sum += mean_decoded(&enc, psi)?;
    }
    let mut direct_sum = 0.0;
    let mut direct_n = 0;
    for input in fig4_inputs()?.iter().filter(|i| i.family.is_some()) {
        let (_, enc) = encode_labeled(&input.psi, &gate, input.label.clone())?;
        direct_sum += mean_decoded(&enc, &input.psi)?;
        direct_n += 1;
    }
    Ok(PipelineMeans {
        encoded: encoded_sum / table.len() as f64,
        decoded_reconstructed: decoded_sum / table.len() as f64,
        decoded_direct: direct_sum / direct_n as f64,
    })
}

/// Mean decoded fidelity (over the four decodings) of θ-family inputs on
/// exact states.
pub fn theta_profile(gate: &GateModel, angles: &[f64]) -> Result<Vec<(f64, f64)>> {
    angles
        .iter()
        .map(|&angle| {
            let (psi, _) = prepare_input(InputFamily::Theta, angle)?;
            let (_, enc) = encode_labeled(&psi, gate, String::new())?;
            Ok((angle, mean_decoded(&enc, &psi)?))
        })
        .collect()
}
