//! JSON run report.
//!
//! Keys: `success`, `converged`, `min_det`, `max_stretch`, `min_det_p95`,
//! `max_stretch_p95`, `num_inverted`, `iterations`, `wall_time_s`,
//! `switched_to_newton`, `config`, `trace` (one object per outer iteration)
//! and `per_corner_det`. Non-finite numbers are written as `null`.

use std::fs;

use serde::{Deserialize, Serialize};

use super::{write_medit, RunConfig};
use crate::error::{Error, Result};
use crate::mesh::Instance;
use crate::solver::{IterationRecord, Outcome};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub success: bool,
    pub converged: bool,
    pub min_det: f64,
    pub max_stretch: f64,
    pub min_det_p95: f64,
    pub max_stretch_p95: f64,
    pub num_inverted: usize,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub switched_to_newton: Option<usize>,
    pub config: RunConfig,
    pub trace: Vec<IterationRecord>,
    pub per_corner_det: Vec<f64>,
}

impl RunReport {
    pub fn new(outcome: &Outcome, config: &RunConfig) -> Self {
        let q = &outcome.report;
        Self {
            success: outcome.success,
            converged: outcome.converged,
            min_det: q.min_det,
            max_stretch: q.max_stretch,
            min_det_p95: q.min_det_p95,
            max_stretch_p95: q.max_stretch_p95,
            num_inverted: q.num_inverted,
            iterations: q.iterations,
            wall_time_s: q.wall_time_s,
            switched_to_newton: outcome.switched_to_newton,
            config: config.clone(),
            trace: outcome.trace.records.clone(),
            per_corner_det: q.per_corner_det.clone(),
        }
    }
}

/// Writes the optimized map (rest connectivity, locked vertices marked 1) and
/// the JSON report.
pub fn write_outputs(outcome: &Outcome, instance: &Instance, config: &RunConfig) -> Result<RunReport> {
    let mesh = &instance.mesh;
    let refs: Vec<i64> = mesh.locked.iter().map(|&l| l as i64).collect();
    write_medit(&config.out, mesh.dim, &outcome.state.u, &refs, &mesh.elements)?;
    let report = RunReport::new(outcome, config);
    let json = serde_json::to_string_pretty(&report)?;
    fs::write(&config.report, json + "\n").map_err(|e| Error::io(&config.report, e))?;
    Ok(report)
}
