//! Experiment harness: runs the Table I, Fig. 2–4, teleportation and
//! calibration pipelines and writes their reports.
//!
//! Every run writes `summary.json` (config, code version and results) plus
//! per-experiment CSV tables, density matrices, raw counts under `counts/`
//! and, on request, SVG charts under `svg/`. Output depends only on the
//! config, so identical configs give byte-identical files.

pub mod calibrate;
pub mod pipeline;
pub mod report;

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnotgate::NoiseModel;
use crate::codec::GateModel;
use crate::error::{Error, Result};
use crate::measure::Scheme;
use crate::qcore::{c, PureState};
use crate::teleport::{encoded_teleport_success, monte_carlo};
use crate::tomo::MleOptions;

pub use calibrate::{calibrate_noise, CalibrationResult};
pub use pipeline::{pipeline_means_exact, PipelineMeans, Stats};

use pipeline::{DecodedCell, Fig2Cell, TomoPlan};
use report::{bar_chart, matrix_chart, slug, Writer};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Target means of the encoded, decoded-from-reconstruction and
/// direct-decoded pipelines, with their quoted spreads.
pub const REFERENCE_MEANS: [f64; 3] = [0.88, 0.93, 0.96];
pub const REFERENCE_SPREADS: [f64; 3] = [0.03, 0.05, 0.03];
pub const REFERENCE_IMAG: (f64, f64) = (0.04, 0.04);

const DEFAULT_NOISE_JSON: &str = include_str!("../../config/default_noise.json");

/// The calibrated gate model shipped with the crate.
pub fn default_noise() -> NoiseModel {
    static NOISE: OnceLock<NoiseModel> = OnceLock::new();
    *NOISE.get_or_init(|| {
        let noise: NoiseModel = serde_json::from_str(DEFAULT_NOISE_JSON).expect("bundled noise model parses");
        noise.validate().expect("bundled noise model is valid");
        noise
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Table1,
    Fig2,
    Fig3,
    Fig4,
    Teleport,
    Calibrate,
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeleportConfig {
    pub ancilla_sizes: Vec<u32>,
    pub widths: Vec<usize>,
    pub trials: u64,
}

impl Default for TeleportConfig {
    fn default() -> Self {
        Self { ancilla_sizes: vec![1, 2, 3], widths: vec![1, 2, 3], trials: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub targets: [f64; 3],
    pub budget: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { targets: REFERENCE_MEANS, budget: calibrate::DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub noise: GateModel,
    /// Nominal shots per tomography setting.
    pub shots: u64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Replace sampled counts with their means.
    pub exact: bool,
    pub svg: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub mle: MleOptions,
    pub teleport: TeleportConfig,
    pub calibration: CalibrationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Fig2,
            noise: GateModel::Noisy(default_noise()),
            shots: 10_000,
            seed: 0,
            scheme: Scheme::Overcomplete,
            exact: false,
            svg: false,
            out_dir: None,
            mle: MleOptions::default(),
            teleport: TeleportConfig::default(),
            calibration: CalibrationConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots < 1 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        self.noise.noise().validate()?;
        if self.teleport.trials < 1 || self.teleport.ancilla_sizes.contains(&0) || self.teleport.widths.contains(&0) {
            return Err(Error::Config("teleport trials, ancilla sizes and widths must be positive".into()));
        }
        if !(self.mle.tol >= 0.0) || self.mle.max_iter == 0 {
            return Err(Error::Config("mle tol must be non-negative and max_iter positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    fn plan(&self) -> TomoPlan {
        TomoPlan { shots: self.shots, scheme: self.scheme, exact: self.exact, mle: self.mle }
    }

    /// The config as embedded in reports: output location left out so that
    /// reports do not depend on where they are written.
    fn provenance(&self) -> RunConfig {
        RunConfig { out_dir: None, ..self.clone() }
    }
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    results: T,
}

#[derive(Debug)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

/// Runs the configured experiment, writing into `config.out_dir` (default
/// `zqec-out`).
pub fn run_experiment(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let mut w = Writer::new(&output_root(config))?;
    let results = match config.experiment {
        Experiment::Table1 => run_table1(config, &mut w)?,
        Experiment::Fig2 => run_fig2(config, &mut w)?,
        Experiment::Fig3 => run_fig3(config, &mut w)?,
        Experiment::Fig4 => run_fig4(config, &mut w)?,
        Experiment::Teleport => run_teleport(config, &mut w)?,
        Experiment::Calibrate => run_calibrate(config, &mut w)?,
    };
    let provenance = config.provenance();
    let summary = Summary { tool: env!("CARGO_PKG_NAME"), version: VERSION, config: &provenance, results };
    w.json("summary.json", &summary)?;
    Ok(RunReport { files: w.files, summary: serde_json::to_value(&summary)? })
}

/// Directory a run writes into.
pub fn output_root(config: &RunConfig) -> PathBuf {
    config.out_dir.clone().unwrap_or_else(|| PathBuf::from("zqec-out"))
}

#[derive(Serialize)]
struct Comparator {
    mean: f64,
    sd: f64,
}

fn comparator(k: usize) -> Comparator {
    Comparator { mean: REFERENCE_MEANS[k], sd: REFERENCE_SPREADS[k] }
}

const SPREAD_NOTE: &str = "sd is the sample spread across cells; reconstruction error is not separated from state-to-state variation";

fn run_table1(config: &RunConfig, w: &mut Writer) -> Result<serde_json::Value> {
    let rows = pipeline::table_one(&config.noise)?;
    w.csv("table1.csv", &rows)?;
    Ok(serde_json::json!({ "rows": rows }))
}

#[derive(Serialize)]
struct FidelityRow<'a> {
    input: &'a str,
    qubit: Option<usize>,
    outcome: Option<u8>,
    fidelity: f64,
    probability: f64,
    family: Option<crate::optics::InputFamily>,
    angle_deg: Option<f64>,
}

fn fig2_rows(cells: &[Fig2Cell]) -> Vec<FidelityRow<'_>> {
    cells
        .iter()
        .map(|c| FidelityRow {
            input: &c.input,
            qubit: None,
            outcome: None,
            fidelity: c.fidelity,
            probability: c.success_probability,
            family: None,
            angle_deg: None,
        })
        .collect()
}

fn decoded_rows(cells: &[DecodedCell]) -> Vec<FidelityRow<'_>> {
    cells
        .iter()
        .map(|c| FidelityRow {
            input: &c.input,
            qubit: Some(c.qubit + 1),
            outcome: Some(c.outcome),
            fidelity: c.fidelity,
            probability: c.probability,
            family: c.family,
            angle_deg: c.angle_deg,
        })
        .collect()
}

fn decoded_name(prefix: &str, index: usize, cell: &DecodedCell) -> String {
    format!("{prefix}_{index:02}_{}_q{}_o{}", slug(&cell.input), cell.qubit + 1, cell.outcome)
}

fn write_fig2(config: &RunConfig, w: &mut Writer, cells: &[Fig2Cell]) -> Result<()> {
    for (k, cell) in cells.iter().enumerate() {
        let stem = format!("fig2_{k:02}_{}", slug(&cell.input));
        if let Some(counts) = &cell.counts {
            w.counts(&format!("counts/{stem}.csv"), counts)?;
        }
        if config.svg {
            w.text(&format!("svg/{stem}.svg"), &matrix_chart(&format!("encoded {}", cell.input), &cell.rho))?;
        }
    }
    Ok(())
}

fn fig2_results(cells: &[Fig2Cell]) -> serde_json::Value {
    let fids: Vec<f64> = cells.iter().map(|c| c.fidelity).collect();
    let summary: Vec<_> = cells
        .iter()
        .map(|c| {
            serde_json::json!({
                "input": c.input,
                "fidelity": c.fidelity,
                "true_fidelity": c.true_fidelity,
                "success_probability": c.success_probability,
                "iterations": c.iterations,
                "converged": c.converged,
            })
        })
        .collect();
    serde_json::json!({
        "cells": summary,
        "fidelity": Stats::of(&fids),
        "comparator": comparator(0),
        "note": SPREAD_NOTE,
    })
}

fn fidelity_chart(w: &mut Writer, name: &str, title: &str, labels: Vec<String>, values: &[f64]) -> Result<()> {
    w.text(name, &bar_chart(title, &labels, values, 0.0, 1.0))
}

fn run_fig2(config: &RunConfig, w: &mut Writer) -> Result<serde_json::Value> {
    let cells = pipeline::fig2(&config.noise, &config.plan(), config.seed)?;
    w.csv("fig2.csv", &fig2_rows(&cells))?;
    w.json("fig2_states.json", &cells)?;
    write_fig2(config, w, &cells)?;
    if config.svg {
        let labels = cells.iter().map(|c| c.input.clone()).collect();
        let values: Vec<f64> = cells.iter().map(|c| c.fidelity).collect();
        fidelity_chart(w, "svg/fig2_fidelity.svg", "encoded-state fidelity", labels, &values)?;
    }
    Ok(fig2_results(&cells))
}

fn run_fig3(config: &RunConfig, w: &mut Writer) -> Result<serde_json::Value> {
    let encoded = pipeline::fig2(&config.noise, &config.plan(), config.seed)?;
    let cells = pipeline::fig3(&encoded)?;
    write_fig2(config, w, &encoded)?;
    w.csv("fig3.csv", &decoded_rows(&cells))?;
    w.json("fig3_states.json", &cells)?;
    if config.svg {
        for (k, cell) in cells.iter().enumerate() {
            let title = format!("decoded {} (qubit {} = {})", cell.input, cell.qubit + 1, cell.outcome);
            w.text(&format!("svg/{}.svg", decoded_name("fig3", k, cell)), &matrix_chart(&title, &cell.rho))?;
        }
    }
    let fids: Vec<f64> = cells.iter().map(|c| c.fidelity).collect();
    let real_imag: Vec<f64> = cells
        .iter()
        .take(pipeline::REAL_INPUTS * pipeline::DECODINGS.len())
        .map(|c| c.imag_abs)
        .collect();
    Ok(serde_json::json!({
        "encoded": fig2_results(&encoded),
        "cells": cells.iter().map(|c| serde_json::json!({
            "input": c.input,
            "qubit": c.qubit + 1,
            "outcome": c.outcome,
            "probability": c.probability,
            "fidelity": c.fidelity,
            "imag_abs": c.imag_abs,
        })).collect::<Vec<_>>(),
        "fidelity": Stats::of(&fids),
        "comparator": comparator(1),
        "real_input_imag_abs": Stats::of(&real_imag),
        "imag_comparator": Comparator { mean: REFERENCE_IMAG.0, sd: REFERENCE_IMAG.1 },
        "note": SPREAD_NOTE,
    }))
}

/// θ grid used for the Fig. 4 shape check, in degrees.
pub fn theta_profile_angles() -> Vec<f64> {
    (0..=18).map(|k| 5.0 * k as f64).collect()
}

fn run_fig4(config: &RunConfig, w: &mut Writer) -> Result<serde_json::Value> {
    let cells = pipeline::fig4(&config.noise, &config.plan(), config.seed)?;
    w.csv("fig4.csv", &decoded_rows(&cells))?;
    w.json("fig4_states.json", &cells)?;
    for (k, cell) in cells.iter().enumerate() {
        if let Some(counts) = &cell.counts {
            w.counts(&format!("counts/{}.csv", decoded_name("fig4", k, cell)), counts)?;
        }
    }
    let sweep: Vec<f64> = pipeline::sweep_cells(&cells).map(|c| c.fidelity).collect();
    let all: Vec<f64> = cells.iter().map(|c| c.fidelity).collect();
    let curves: Vec<_> = pipeline::DECODINGS
        .iter()
        .map(|&(q, o)| {
            let v: Vec<f64> = pipeline::sweep_cells(&cells)
                .filter(|c| c.qubit == q && c.outcome == o)
                .map(|c| c.fidelity)
                .collect();
            serde_json::json!({ "qubit": q + 1, "outcome": o, "fidelity": Stats::of(&v) })
        })
        .collect();
    let profile = pipeline::theta_profile(&config.noise, &theta_profile_angles())?;
    if config.svg {
        for (q, o) in pipeline::DECODINGS {
            let chosen: Vec<&DecodedCell> =
                pipeline::sweep_cells(&cells).filter(|c| c.qubit == q && c.outcome == o).collect();
            let labels = chosen.iter().map(|c| c.input.clone()).collect();
            let values: Vec<f64> = chosen.iter().map(|c| c.fidelity).collect();
            let title = format!("decoded fidelity, qubit {} measured = {o}", q + 1);
            fidelity_chart(w, &format!("svg/fig4_q{}_o{o}.svg", q + 1), &title, labels, &values)?;
        }
    }
    Ok(serde_json::json!({
        "sweep_fidelity": Stats::of(&sweep),
        "all_fidelity": Stats::of(&all),
        "curves": curves,
        "comparator": comparator(2),
        "theta_profile_exact": profile.iter().map(|(a, f)| serde_json::json!({ "theta_deg": a, "mean_fidelity": f })).collect::<Vec<_>>(),
        "note": SPREAD_NOTE,
    }))
}

/// Input teleported in the Monte Carlo runs.
pub fn teleport_input() -> PureState {
    PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).expect("nonzero")
}

#[derive(Debug, Clone, Serialize)]
pub struct TeleportRow {
    pub n: u32,
    pub width: usize,
    pub exact: f64,
    pub estimate: Option<f64>,
    pub trials: Option<u64>,
    pub std_error: Option<f64>,
    pub min_fidelity: Option<f64>,
}

pub fn teleport_table(config: &RunConfig) -> Result<Vec<TeleportRow>> {
    let cells: Vec<(u32, usize)> = config
        .teleport
        .ancilla_sizes
        .iter()
        .flat_map(|&n| config.teleport.widths.iter().map(move |&w| (n, w)))
        .collect();
    let psi = teleport_input();
    cells
        .par_iter()
        .enumerate()
        .map(|(k, &(n, width))| {
            let exact = encoded_teleport_success(n, width)?;
            if config.exact {
                return Ok(TeleportRow { n, width, exact, estimate: None, trials: None, std_error: None, min_fidelity: None });
            }
            let seed = pipeline::cell_seed(config.seed, 8, k as u64);
            let mc = monte_carlo(&psi, n, width, config.teleport.trials, seed)?;
            Ok(TeleportRow {
                n,
                width,
                exact,
                estimate: Some(mc.estimate),
                trials: Some(mc.trials),
                std_error: Some(mc.std_error),
                min_fidelity: Some(mc.min_fidelity),
            })
        })
        .collect()
}

fn run_teleport(config: &RunConfig, w: &mut Writer) -> Result<serde_json::Value> {
    let rows = teleport_table(config)?;
    w.csv("teleport.csv", &rows)?;
    Ok(serde_json::json!({ "rows": rows }))
}

fn run_calibrate(config: &RunConfig, w: &mut Writer) -> Result<serde_json::Value> {
    let result = calibrate_noise(config.calibration.targets, config.calibration.budget)?;
    w.json("noise.json", &result.noise)?;
    Ok(serde_json::to_value(&result)?)
}

/// Loads a config file and applies it over the defaults.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::from_json(&std::fs::read_to_string(path)?)
}
