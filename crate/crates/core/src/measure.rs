//! Tomography settings and Poisson-sampled coincidence counts.
//!
//! Every analyzer is read at the transmitted PBS port, so a setting is fully
//! described by its wave-plate angles. Per-qubit projectors:
//!
//! | label | QWP    | HWP    | state          |
//! |-------|--------|--------|----------------|
//! | H     | 0      | 0      | \|H⟩           |
//! | V     | 0      | 45     | \|V⟩           |
//! | D     | 45     | 22.5   | (\|H⟩+\|V⟩)/√2  |
//! | A     | 45     | 157.5  | (\|H⟩−\|V⟩)/√2  |
//! | R     | 45     | 0      | (\|H⟩+i\|V⟩)/√2 |
//! | L     | 135    | 0      | (\|H⟩−i\|V⟩)/√2 |
//!
//! Counts come from a ChaCha8 generator. Setting `k` of a list draws from
//! stream `k` of the generator seeded with `seed` (`seed_from_u64`), so each
//! count depends only on `(seed, k)` and the settings can be sampled in any
//! order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::optics::{analyzer_projector, AnalyzerSetting, Port};
use crate::qcore::{DensityMatrix, Operator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// {H, V, D, R} per qubit: 4 or 16 settings.
    Minimal,
    /// All six Pauli eigenstates per qubit: 6 or 36 settings.
    Overcomplete,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimal" => Ok(Scheme::Minimal),
            "overcomplete" => Ok(Scheme::Overcomplete),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Minimal => "minimal",
            Scheme::Overcomplete => "overcomplete",
        })
    }
}

/// Single-qubit projector label with its analyzer angles (QWP, HWP).
const SINGLE_QUBIT: [(char, f64, f64); 6] = [
    ('H', 0.0, 0.0),
    ('V', 0.0, 45.0),
    ('D', 45.0, 22.5),
    ('A', 45.0, 157.5),
    ('R', 45.0, 0.0),
    ('L', 135.0, 0.0),
];

fn single_qubit_settings(scheme: Scheme) -> Vec<(char, AnalyzerSetting)> {
    let labels: &[char] = match scheme {
        Scheme::Minimal => &['H', 'V', 'D', 'R'],
        Scheme::Overcomplete => &['H', 'V', 'D', 'A', 'R', 'L'],
    };
    labels
        .iter()
        .map(|l| {
            let &(label, q, h) = SINGLE_QUBIT.iter().find(|(x, _, _)| x == l).expect("known label");
            (label, AnalyzerSetting::new(q, h, Port::Transmitted).expect("finite angles"))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub label: String,
    pub analyzers: Vec<AnalyzerSetting>,
}

impl MeasurementSetting {
    pub fn num_qubits(&self) -> usize {
        self.analyzers.len()
    }

    /// Tensor product of the per-qubit analyzer projectors.
    pub fn projector(&self) -> Operator {
        self.analyzers
            .iter()
            .fold(Operator::identity(1), |acc, a| acc.kron(&analyzer_projector(a)))
    }
}

pub fn tomo_settings(num_qubits: usize, scheme: Scheme) -> Result<Vec<MeasurementSetting>> {
    let single = single_qubit_settings(scheme);
    match num_qubits {
        1 => Ok(single
            .iter()
            .map(|(l, a)| MeasurementSetting { label: l.to_string(), analyzers: vec![*a] })
            .collect()),
        2 => Ok(single
            .iter()
            .flat_map(|(l1, a1)| {
                single.iter().map(move |(l2, a2)| MeasurementSetting {
                    label: format!("{l1}{l2}"),
                    analyzers: vec![*a1, *a2],
                })
            })
            .collect()),
        n => Err(Error::OutOfRange(format!("tomography on {n} qubits"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    pub count: u64,
    pub shots_nominal: u64,
}

fn check_settings(rho: &DensityMatrix, settings: &[MeasurementSetting]) -> Result<()> {
    for s in settings {
        if s.num_qubits() != rho.num_qubits() {
            return Err(Error::DimensionMismatch { expected: rho.num_qubits(), actual: s.num_qubits() });
        }
    }
    Ok(())
}

/// `Tr(ρΠ)` for each setting, clamped to [0, 1].
pub fn setting_probabilities(rho: &DensityMatrix, settings: &[MeasurementSetting]) -> Result<Vec<f64>> {
    check_settings(rho, settings)?;
    settings
        .iter()
        .map(|s| Ok(rho.expectation(&s.projector())?.re.clamp(0.0, 1.0)))
        .collect()
}

/// Generator for setting number `index` under `seed`.
pub fn setting_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws one Poisson count per setting with mean `shots·Tr(ρΠ)`.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    shots: u64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    if shots == 0 {
        return Err(Error::OutOfRange("shots must be positive".into()));
    }
    let probs = setting_probabilities(rho, settings)?;
    Ok(settings
        .iter()
        .zip(probs)
        .enumerate()
        .map(|(k, (setting, p))| {
            let mean = shots as f64 * p;
            let count = if mean > 0.0 {
                let dist = Poisson::new(mean).expect("positive finite mean");
                dist.sample(&mut setting_rng(seed, k)) as u64
            } else {
                0
            };
            CountRecord { setting: setting.clone(), count, shots_nominal: shots }
        })
        .collect())
}

fn fmt_angle(x: f64) -> String {
    format!("{x}")
}

/// Writes counts as CSV: label, per-qubit QWP/HWP angles, count, shots.
/// Single-qubit records leave the qubit-2 columns empty.
pub fn write_counts<W: Write>(records: &[CountRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["label", "q1_qwp", "q1_hwp", "q2_qwp", "q2_hwp", "count", "shots"])?;
    for r in records {
        let a = &r.setting.analyzers;
        if a.iter().any(|x| x.port() != Port::Transmitted) {
            return Err(Error::Config(format!(
                "setting {} uses a reflected port, which the count table cannot express",
                r.setting.label
            )));
        }
        let q2 = a.get(1);
        w.write_record([
            r.setting.label.clone(),
            fmt_angle(a[0].qwp_deg()),
            fmt_angle(a[0].hwp_deg()),
            q2.map(|x| fmt_angle(x.qwp_deg())).unwrap_or_default(),
            q2.map(|x| fmt_angle(x.hwp_deg())).unwrap_or_default(),
            r.count.to_string(),
            r.shots_nominal.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_counts<R: Read>(reader: R) -> Result<Vec<CountRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 7 {
            return Err(Error::Config(format!("count row has {} columns", row.len())));
        }
        let num = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|e| Error::Config(format!("column {i}: {e}")))
        };
        let int = |i: usize| -> Result<u64> {
            row[i].parse::<u64>().map_err(|e| Error::Config(format!("column {i}: {e}")))
        };
        let mut analyzers = vec![AnalyzerSetting::new(num(1)?, num(2)?, Port::Transmitted)?];
        if !row[3].is_empty() {
            analyzers.push(AnalyzerSetting::new(num(3)?, num(4)?, Port::Transmitted)?);
        }
        out.push(CountRecord {
            setting: MeasurementSetting { label: row[0].to_string(), analyzers },
            count: int(5)?,
            shots_nominal: int(6)?,
        });
    }
    Ok(out)
}
