//! Regularized distortion energy and its exact gradient.
//!
//! Per simplex, with `D = det J` and the regularized denominator
//! `χ(D, ε) = (D + sqrt(ε² + D²)) / 2`:
//!
//! ```text
//! f_ε(J) = tr(JᵀJ) / χ^(2/d)      (shape term, scale invariant at ε = 0)
//! g_ε(J) = (D² + 1) / χ            (area term, minimal at D = 1)
//! φ(J)   = f_ε + λ g_ε
//! F(U,ε) = Σ_corners w · φ(J)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SmallMat;
use crate::mesh::{compute_jacobian, CornerSimplex, Instance};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Weight of the area term relative to the shape term.
    pub lambda: f64,
    /// Regularization, in determinant units.
    pub eps: f64,
}

impl EnergyParams {
    pub fn new(lambda: f64, eps: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and nonnegative, got {lambda}")));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("eps must be finite and nonnegative, got {eps}")));
        }
        Ok(Self { lambda, eps })
    }
}

pub fn chi(d: f64, eps: f64) -> Result<f64> {
    if eps == 0.0 && d <= 0.0 {
        return Err(Error::Domain { d });
    }
    Ok(chi_raw(d, eps))
}

pub fn chi_prime(d: f64, eps: f64) -> Result<f64> {
    if eps == 0.0 && d <= 0.0 {
        return Err(Error::Domain { d });
    }
    Ok(chi_prime_raw(d, eps))
}

#[inline]
pub(crate) fn chi_raw(d: f64, eps: f64) -> f64 {
    let r = eps.hypot(d);
    if d >= 0.0 {
        0.5 * (d + r)
    } else {
        // (d + r)/2 = eps² / (2(r - d)), avoids cancellation for d ≪ -eps
        0.5 * eps * eps / (r - d)
    }
}

#[inline]
pub(crate) fn chi_prime_raw(d: f64, eps: f64) -> f64 {
    let r = eps.hypot(d);
    if r == 0.0 {
        return 0.5;
    }
    if d >= 0.0 {
        0.5 * (1.0 + d / r)
    } else {
        0.5 * eps * eps / ((r - d) * r)
    }
}

#[inline]
pub(crate) fn chi_second_raw(d: f64, eps: f64) -> f64 {
    let r = eps.hypot(d);
    0.5 * eps * eps / (r * r * r)
}

/// `χ^(2/d)`.
#[inline]
pub(crate) fn chi_pow(chi: f64, dim: usize) -> f64 {
    if dim == 2 {
        chi
    } else {
        let c = chi.cbrt();
        c * c
    }
}

/// Everything known about one simplex at the current state.
#[derive(Clone, Copy, Debug)]
pub struct ElementEval {
    pub j: SmallMat,
    pub det: f64,
    pub chi: f64,
    pub chi_prime: f64,
    pub f: f64,
    pub g: f64,
    pub phi: f64,
    /// Columns of J, flattened.
    pub a: [f64; 9],
    /// Dual basis, `∂ det J / ∂a`, flattened the same way.
    pub b: [f64; 9],
}

impl ElementEval {
    #[inline]
    pub fn dim(&self) -> usize {
        self.j.dim()
    }

    /// `|a|² = tr(JᵀJ)`.
    pub fn a_norm_sq(&self) -> f64 {
        let n = self.dim() * self.dim();
        self.a[..n].iter().map(|x| x * x).sum()
    }
}

/// Evaluates the energy terms for a given Jacobian.
pub fn evaluate_jacobian(j: &SmallMat, params: &EnergyParams) -> ElementEval {
    let dim = j.dim();
    let det = j.det();
    let chi = chi_raw(det, params.eps);
    let chi_prime = chi_prime_raw(det, params.eps);
    let f = j.frob_sq() / chi_pow(chi, dim);
    let g = (det * det + 1.0) / chi;
    ElementEval {
        j: *j,
        det,
        chi,
        chi_prime,
        f,
        g,
        phi: f + params.lambda * g,
        a: j.flatten_cols(),
        b: j.dual_basis().flatten_cols(),
    }
}

pub fn element_energy(corner: &CornerSimplex, u: &[f64], params: &EnergyParams) -> ElementEval {
    evaluate_jacobian(&compute_jacobian(corner, u), params)
}

/// `∂φ/∂a`, flattened like `a`.
pub fn dphi_da(eval: &ElementEval, params: &EnergyParams) -> [f64; 9] {
    let d = eval.dim();
    let dd = d as f64;
    let lambda = params.lambda;
    let ca = 2.0 / chi_pow(eval.chi, d);
    let cb = -((2.0 / dd) * eval.f * eval.chi_prime - 2.0 * lambda * eval.det + lambda * eval.g * eval.chi_prime) / eval.chi;
    let mut out = [0.0; 9];
    for k in 0..d * d {
        out[k] = ca * eval.a[k] + cb * eval.b[k];
    }
    out
}

/// Minimum Jacobian determinant over all corner simplices.
pub fn min_det(u: &[f64], instance: &Instance) -> f64 {
    let dets = par::map_collect(instance.corners.len(), |c| compute_jacobian(&instance.corners[c], u).det());
    dets.into_iter().fold(f64::INFINITY, f64::min)
}

/// Total energy `F(U, ε)`.
///
/// With `ε = 0` the state is first checked to be fold-free; a state with any
/// `det J ≤ 0` has infinite energy. Non-finite sums also map to `+∞`.
pub fn total_energy(u: &[f64], instance: &Instance, params: &EnergyParams) -> f64 {
    if params.eps == 0.0 && min_det(u, instance) <= 0.0 {
        return f64::INFINITY;
    }
    let terms = par::map_collect(instance.corners.len(), |c| {
        let corner = &instance.corners[c];
        corner.weight * element_energy(corner, u, params).phi
    });
    finite_or_inf(par::tree_sum(terms.len(), |i| terms[i]))
}

#[inline]
fn finite_or_inf(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::INFINITY
    }
}

/// Per-corner energy and nodal gradient contributions.
struct CornerTerms {
    energy: f64,
    grad: [[f64; 3]; 4],
}

fn corner_terms(corner: &CornerSimplex, u: &[f64], params: &EnergyParams) -> CornerTerms {
    let d = corner.dim();
    let eval = element_energy(corner, u, params);
    let da = dphi_da(&eval, params);
    let mut grad = [[0.0; 3]; 4];
    for (l, gl) in grad.iter_mut().enumerate().take(d + 1) {
        // (∇F)_l += w Σ_i z_li ∂φ/∂a_i
        for i in 0..d {
            let z = corner.z[l][i] * corner.weight;
            for r in 0..d {
                gl[r] += z * da[i * d + r];
            }
        }
    }
    CornerTerms { energy: corner.weight * eval.phi, grad }
}

/// Energy and gradient in one pass. Gradient entries of locked vertices are
/// zero.
pub fn energy_and_gradient(u: &[f64], instance: &Instance, params: &EnergyParams) -> (f64, Vec<f64>) {
    let d = instance.dim();
    let terms = par::map_collect(instance.corners.len(), |c| corner_terms(&instance.corners[c], u, params));
    let mut grad = vec![0.0; instance.num_dofs()];
    par::for_each_chunk_mut(&mut grad, d, |v, gv| {
        if instance.mesh.locked[v] {
            return;
        }
        for &(c, l) in instance.vertex_corners(v) {
            let t = &terms[c].grad[l];
            for k in 0..d {
                gv[k] += t[k];
            }
        }
    });
    let mut energy = finite_or_inf(par::tree_sum(terms.len(), |i| terms[i].energy));
    if params.eps == 0.0 && min_det(u, instance) <= 0.0 {
        energy = f64::INFINITY;
    }
    (energy, grad)
}

pub fn gradient(u: &[f64], instance: &Instance, params: &EnergyParams) -> Vec<f64> {
    energy_and_gradient(u, instance, params).1
}
