//! Fits the three gate visibilities to target pipeline means.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use super::pipeline::{pipeline_means_exact, PipelineMeans};
use crate::cnotgate::NoiseModel;
use crate::error::{Error, Result};

/// Residuals above this are reported as unreachable targets.
pub const RESIDUAL_WARNING: f64 = 0.05;
pub const DEFAULT_BUDGET: usize = 2000;
const MIN_STEP: f64 = 1e-4;
const MAX_GRID: usize = 11;

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    pub noise: NoiseModel,
    pub targets: [f64; 3],
    pub means: PipelineMeans,
    /// Mean minus target, in the order encoded, reconstructed-decoded,
    /// direct-decoded.
    pub residuals: [f64; 3],
    pub loss: f64,
    pub evaluations: usize,
    pub warnings: Vec<String>,
}

struct Point {
    v: [f64; 3],
    means: PipelineMeans,
    loss: f64,
}

fn evaluate(v: [f64; 3], targets: &[f64; 3]) -> Result<Point> {
    let means = pipeline_means_exact(&NoiseModel::new(v[0], v[1], v[2])?)?;
    let loss = means.as_array().iter().zip(targets).map(|(m, t)| (m - t).powi(2)).sum();
    Ok(Point { v, means, loss })
}

/// Grid search over [0, 1]³ followed by a compass search around the best
/// grid point. `budget` bounds the number of model evaluations; running out
/// returns the best point so far with a warning.
pub fn calibrate_noise(targets: [f64; 3], budget: usize) -> Result<CalibrationResult> {
    if targets.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(Error::OutOfRange(format!("targets {targets:?} must lie in (0, 1]")));
    }
    if budget < 8 {
        return Err(Error::OutOfRange(format!("budget {budget} is below the 8-point minimum grid")));
    }
    let per_axis = ((budget as f64 / 2.0).cbrt().floor() as usize).clamp(2, MAX_GRID);
    let axis: Vec<f64> = (0..per_axis).map(|k| k as f64 / (per_axis - 1) as f64).collect();
    let mut grid = Vec::with_capacity(per_axis.pow(3));
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                grid.push([a, b, c]);
            }
        }
    }
    let scored = grid.par_iter().map(|&v| evaluate(v, &targets)).collect::<Result<Vec<_>>>()?;
    let mut evaluations = scored.len();
    let mut best = scored
        .into_iter()
        .reduce(|best, p| if p.loss < best.loss { p } else { best })
        .expect("non-empty grid");

    let mut warnings = Vec::new();
    let mut step = 0.5 / (per_axis - 1) as f64;
    'search: while step >= MIN_STEP {
        let mut improved = false;
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut v = best.v;
                v[axis] = (v[axis] + sign * step).clamp(0.0, 1.0);
                if v == best.v {
                    continue;
                }
                if evaluations >= budget {
                    warnings.push(format!("search budget of {budget} evaluations exhausted at step {step:.2e}"));
                    break 'search;
                }
                let p = evaluate(v, &targets)?;
                evaluations += 1;
                if p.loss < best.loss {
                    best = p;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }

    let means = best.means.as_array();
    let mut residuals = [0.0; 3];
    for k in 0..3 {
        residuals[k] = means[k] - targets[k];
    }
    for (name, (r, t)) in ["encoded", "decoded-from-reconstruction", "direct-decoded"]
        .iter()
        .zip(residuals.iter().zip(&targets))
    {
        if r.abs() > RESIDUAL_WARNING {
            warnings.push(format!(
                "{name} target {t} is outside the model's reachable set: best mean {:.4} (residual {r:+.4})",
                t + r
            ));
        }
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(CalibrationResult {
        noise: NoiseModel::new(best.v[0], best.v[1], best.v[2])?,
        targets,
        means: best.means,
        residuals,
        loss: best.loss,
        evaluations,
        warnings,
    })
}
