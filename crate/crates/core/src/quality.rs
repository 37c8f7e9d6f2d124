//! Map quality: worst scaling (min det J) and worst stretch (σ₁/σ_d), plus
//! the same measures after trimming the worst 5% of corners.

use serde::{Deserialize, Serialize};

use crate::linalg::SmallMat;
use crate::mesh::{compute_jacobian, Instance};
use crate::par;

/// Fraction of measurements dropped by the trimmed variants.
pub const TRIM_FRACTION: f64 = 0.05;

/// `σ₁/σ_d`, or `+∞` when `σ_d = 0`.
pub fn singular_ratio(j: &SmallMat) -> f64 {
    let s = j.singular_values();
    let smin = s[j.dim() - 1];
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s[0] / smin
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub min_det: f64,
    pub max_stretch: f64,
    pub min_det_p95: f64,
    pub max_stretch_p95: f64,
    pub num_vertices: usize,
    pub num_elements: usize,
    pub num_corners: usize,
    pub num_inverted: usize,
    /// det J per corner simplex, in corner order.
    pub per_corner_det: Vec<f64>,
    pub per_corner_stretch: Vec<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
}

fn trimmed(mut values: Vec<f64>, worst_is_low: bool) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let drop = (TRIM_FRACTION * values.len() as f64).floor() as usize;
    if worst_is_low {
        values[drop]
    } else {
        values[values.len() - 1 - drop]
    }
}

pub fn report(u: &[f64], instance: &Instance) -> QualityReport {
    let measures = par::map_collect(instance.corners.len(), |c| {
        let j = compute_jacobian(&instance.corners[c], u);
        (j.det(), singular_ratio(&j))
    });
    let dets: Vec<f64> = measures.iter().map(|m| m.0).collect();
    let stretches: Vec<f64> = measures.iter().map(|m| m.1).collect();
    let min_det = dets.iter().copied().fold(f64::INFINITY, f64::min);
    let max_stretch = stretches.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    QualityReport {
        min_det,
        max_stretch,
        min_det_p95: trimmed(dets.clone(), true),
        max_stretch_p95: trimmed(stretches.clone(), false),
        num_vertices: instance.num_vertices(),
        num_elements: instance.mesh.elements.len(),
        num_corners: instance.corners.len(),
        num_inverted: dets.iter().filter(|&&d| d <= 0.0).count(),
        per_corner_det: dets,
        per_corner_stretch: stretches,
        iterations: 0,
        wall_time_s: 0.0,
    }
}
