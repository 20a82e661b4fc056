use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zqec::cnotgate::NoiseModel;
use zqec::codec::GateModel;
use zqec::harness::{load_config, output_root, run_experiment, Experiment, RunConfig};
use zqec::measure::Scheme;
use zqec::{Error, Result};

#[derive(Parser)]
#[command(name = "zqec", version, about = "Parity-code error correction with a linear-optics CNOT: simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encoder output for the six reference inputs.
    Table1(Common),
    /// Two-qubit encoded states reconstructed by tomography.
    Fig2(Common),
    /// Single-qubit states decoded from the fig2 reconstructions.
    Fig3(Common),
    /// Decoded-state fidelities over the θ and φ input sweeps.
    Fig4(Common),
    /// Success probability of teleporting an encoded qubit.
    Teleport {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo trials per (n, width) cell.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Fit gate visibilities to target pipeline means.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Target means: encoded, decoded-from-reconstruction, direct-decoded.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        targets: Option<Vec<f64>>,
        /// Maximum number of model evaluations.
        #[arg(long)]
        budget: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run config; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gate visibilities v_nc,v_cc,v_ct (default: bundled calibration).
    #[arg(long, value_delimiter = ',', num_args = 3, conflicts_with = "ideal")]
    noise: Option<Vec<f64>>,
    /// Use the noiseless gate.
    #[arg(long)]
    ideal: bool,
    /// Shots per tomography setting.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// minimal or overcomplete.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use mean counts instead of sampling.
    #[arg(long)]
    exact: bool,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
}

impl Common {
    fn into_config(self, experiment: Experiment) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        config.experiment = experiment;
        if self.ideal {
            config.noise = GateModel::Ideal;
        }
        if let Some(v) = self.noise {
            config.noise = GateModel::Noisy(NoiseModel::new(v[0], v[1], v[2])?);
        }
        if let Some(shots) = self.shots {
            config.shots = shots;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(scheme) = self.scheme {
            config.scheme = scheme;
        }
        if self.out.is_some() {
            config.out_dir = self.out;
        }
        config.exact |= self.exact;
        config.svg |= self.svg;
        Ok(config)
    }
}

fn build_config(command: Command) -> Result<RunConfig> {
    match command {
        Command::Table1(c) => c.into_config(Experiment::Table1),
        Command::Fig2(c) => c.into_config(Experiment::Fig2),
        Command::Fig3(c) => c.into_config(Experiment::Fig3),
        Command::Fig4(c) => c.into_config(Experiment::Fig4),
        Command::Teleport { common, trials } => {
            let mut config = common.into_config(Experiment::Teleport)?;
            if let Some(t) = trials {
                config.teleport.trials = t;
            }
            Ok(config)
        }
        Command::Calibrate { common, targets, budget } => {
            let mut config = common.into_config(Experiment::Calibrate)?;
            if let Some(t) = targets {
                config.calibration.targets = [t[0], t[1], t[2]];
            }
            if let Some(b) = budget {
                config.calibration.budget = b;
            }
            Ok(config)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = build_config(cli.command)?;
    config.validate()?;
    let report = run_experiment(&config)?;
    let mut out = std::io::stdout().lock();
    // A closed pipe on stdout is not an error for a report printer.
    let _ = writeln!(out, "wrote {} files to {}", report.files.len(), output_root(&config).display());
    if let Some(results) = report.summary.get("results") {
        let text = serde_json::to_string_pretty(&headline(config.experiment, results)).map_err(Error::from)?;
        let _ = writeln!(out, "{text}");
    }
    Ok(())
}

/// The few summary fields worth printing to the terminal.
fn headline(experiment: Experiment, results: &serde_json::Value) -> serde_json::Value {
    let pick = |keys: &[&str]| {
        let mut out = serde_json::Map::new();
        for k in keys {
            if let Some(v) = results.get(*k) {
                out.insert((*k).to_string(), v.clone());
            }
        }
        serde_json::Value::Object(out)
    };
    match experiment {
        Experiment::Fig2 => pick(&["fidelity", "comparator"]),
        Experiment::Fig3 => pick(&["fidelity", "comparator", "real_input_imag_abs"]),
        Experiment::Fig4 => pick(&["sweep_fidelity", "curves", "comparator"]),
        Experiment::Calibrate => pick(&["noise", "means", "residuals", "warnings"]),
        Experiment::Table1 | Experiment::Teleport => pick(&["rows"]),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
