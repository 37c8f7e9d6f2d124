//! Newton steps on the modified Hessian `H⁺` with block-Jacobi preconditioned
//! conjugate gradients.

use serde::{Deserialize, Serialize};

use super::line_search::golden_armijo;
use crate::energy::{energy_and_gradient, total_energy, EnergyParams};
use crate::hessian::BlockSparse;
use crate::linalg::SmallMat;
use crate::mesh::Instance;
use crate::par::dot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Newton step budget per outer iteration.
    pub max_steps: usize,
    /// Inner loop stops when `‖∇F‖∞ ≤ gtol·(1 + |F|)`.
    pub gtol: f64,
    /// CG relative residual target.
    pub cg_tol: f64,
    /// CG budget as a multiple of the number of free DOFs.
    pub cg_max_factor: usize,
    pub c1: f64,
    /// Largest line-search step, in units of the Newton step.
    pub tau_max: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { max_steps: 200, gtol: 1e-8, cg_tol: 1e-8, cg_max_factor: 10, c1: 1e-4, tau_max: 8.0 }
    }
}

#[derive(Clone, Debug)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Inverted diagonal blocks of `a`.
fn block_jacobi(a: &BlockSparse) -> Vec<SmallMat> {
    let d = a.dim;
    (0..a.num_block_rows())
        .map(|row| {
            let blk = a.diag_block(row);
            let m = SmallMat::from_rows(&(0..d).map(|r| &blk[r * d..(r + 1) * d]).collect::<Vec<_>>());
            m.inverse().unwrap_or_else(|| SmallMat::identity(d))
        })
        .collect()
}

fn apply_block_jacobi(inv: &[SmallMat], r: &[f64], z: &mut [f64]) {
    let d = inv.first().map_or(1, |m| m.dim());
    for (row, m) in inv.iter().enumerate() {
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                s += m[(i, j)] * r[row * d + j];
            }
            z[row * d + i] = s;
        }
    }
}

/// Solves `A x = b` for symmetric positive (semi)definite `A`.
pub fn pcg(a: &BlockSparse, b: &[f64], tol: f64, max_iterations: usize) -> CgResult {
    let n = a.size();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return CgResult { x, iterations: 0, relative_residual: 0.0, converged: true };
    }
    let inv = block_jacobi(a);
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    apply_block_jacobi(&inv, &r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 0..max_iterations {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return CgResult { x, iterations: it, relative_residual: rel, converged: false };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= tol {
            return CgResult { x, iterations: it + 1, relative_residual: rel, converged: true };
        }
        apply_block_jacobi(&inv, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgResult { x, iterations: max_iterations, relative_residual: rel, converged: false }
}

#[derive(Clone, Debug)]
pub struct NewtonStep {
    pub u: Vec<f64>,
    pub value_before: f64,
    pub value_after: f64,
    pub cg_iterations: usize,
    /// CG did not converge; steepest descent was used instead.
    pub cg_fallback: bool,
    pub line_search_failed: bool,
    /// The gradient at `u` already met the tolerance; no step was taken.
    pub converged: bool,
}

/// Removes the mean translation from a reduced per-vertex vector.
fn remove_translation(x: &mut [f64], d: usize) {
    let nv = x.len() / d;
    if nv == 0 {
        return;
    }
    for k in 0..d {
        let mean = x.iter().skip(k).step_by(d).sum::<f64>() / nv as f64;
        x.iter_mut().skip(k).step_by(d).for_each(|v| *v -= mean);
    }
}

/// One step `U ← U − τ (H⁺)⁻¹ ∇F` with `τ` from a golden-section search.
///
/// `h` must be the pattern of `instance`; its values are overwritten.
pub fn newton_step(u: &[f64], instance: &Instance, params: &EnergyParams, config: &NewtonConfig, h: &mut BlockSparse, length_scale: f64) -> NewtonStep {
    let d = instance.dim();
    let (f0, g) = energy_and_gradient(u, instance, params);
    let mut step = NewtonStep {
        u: u.to_vec(),
        value_before: f0,
        value_after: f0,
        cg_iterations: 0,
        cg_fallback: false,
        line_search_failed: false,
        converged: false,
    };
    let g_inf = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if h.size() == 0 || g_inf <= config.gtol * (1.0 + f0.abs()) {
        step.converged = true;
        return step;
    }
    h.fill_h_plus(u, instance, params);
    let rhs = h.gather(&g);
    let cg = pcg(h, &rhs, config.cg_tol, config.cg_max_factor * h.size());
    step.cg_iterations = cg.iterations;
    let mut delta = if cg.converged {
        cg.x
    } else {
        step.cg_fallback = true;
        rhs.clone()
    };
    if instance.mesh.num_locked() == 0 {
        remove_translation(&mut delta, d);
    }
    let mut p: Vec<f64> = h.scatter(&delta, instance.num_vertices()).iter().map(|x| -x).collect();
    let mut slope = dot(&g, &p);
    if !(slope < 0.0) {
        step.cg_fallback = true;
        p = g.iter().map(|x| -x).collect();
        slope = dot(&g, &p);
    }
    let pmax = p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if pmax == 0.0 {
        return step;
    }
    let (tau_init, tau_max) = if step.cg_fallback {
        (0.1 * length_scale / pmax, length_scale / pmax)
    } else {
        (1.0, config.tau_max.max(length_scale / pmax))
    };
    let mut trial = vec![0.0; u.len()];
    let found = golden_armijo(
        |tau| {
            for i in 0..u.len() {
                trial[i] = u[i] + tau * p[i];
            }
            total_energy(&trial, instance, params)
        },
        f0,
        slope,
        tau_init,
        tau_max,
        config.c1,
    );
    match found {
        Some(acc) => {
            for i in 0..u.len() {
                step.u[i] = u[i] + acc.tau * p[i];
            }
            step.value_after = acc.value;
        }
        None => step.line_search_failed = true,
    }
    step
}
