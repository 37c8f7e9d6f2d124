//! Positive semidefinite approximation of the energy Hessian.
//!
//! Per simplex, the Hessian of `φ` in the flattened Jacobian `a` splits into
//! a PSD part `M⁺` (kept) and an indefinite part `M±` (dropped) holding every
//! term with `χ''` or with the second derivative of `det J`. `M⁺` has the
//! form
//!
//! ```text
//! M⁺ = c_aa I + c_aD (a bᵀ + b aᵀ) + c_DD b bᵀ
//! ```
//!
//! which lets the chain rule through `Z` be applied without forming it.

use crate::energy::{chi_pow, chi_second_raw, ElementEval, EnergyParams, evaluate_jacobian};
use crate::linalg::SmallMat;
use crate::mesh::{compute_jacobian, Instance};
use crate::par;

/// Closed-form ingredients of `M⁺` for one simplex, plus its dense form.
#[derive(Clone, Debug)]
pub struct CornerHessian {
    pub dim: usize,
    /// `∂²Φ/∂a∂aᵀ = c_aa · I`.
    pub c_aa: f64,
    /// `∂²Φ/∂a∂D = c_ad · a`.
    pub c_ad: f64,
    /// `∂²Φ/∂D²`.
    pub c_dd: f64,
    /// Dense d²×d² matrix, row-major.
    pub m_plus: Vec<f64>,
}

impl CornerHessian {
    pub fn size(&self) -> usize {
        self.dim * self.dim
    }
}

fn coefficients(eval: &ElementEval, params: &EnergyParams) -> (f64, f64, f64) {
    let d = eval.dim();
    let dd = d as f64;
    let chi = eval.chi;
    let cp = eval.chi_prime;
    let det = eval.det;
    let lambda = params.lambda;
    let chi_2d = chi_pow(chi, d);
    let c_aa = 2.0 / chi_2d;
    let c_ad = -(4.0 / dd) * cp / (chi * chi_2d);
    let c_dd = (2.0 / dd) * (1.0 + 2.0 / dd) * eval.a_norm_sq() * cp * cp / (chi * chi * chi_2d)
        + lambda * (2.0 / chi - 4.0 * det * cp / (chi * chi) + 2.0 * (1.0 + det * det) * cp * cp / (chi * chi * chi));
    (c_aa, c_ad, c_dd)
}

/// Kept part `M⁺` of the simplex Hessian in `a` coordinates.
pub fn corner_m_plus(eval: &ElementEval, params: &EnergyParams) -> CornerHessian {
    let d = eval.dim();
    let n = d * d;
    let (c_aa, c_ad, c_dd) = coefficients(eval, params);
    let (a, b) = (&eval.a, &eval.b);
    let mut m = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut v = c_ad * (a[r] * b[c] + b[r] * a[c]) + c_dd * b[r] * b[c];
            if r == c {
                v += c_aa;
            }
            m[r * n + c] = v;
        }
    }
    CornerHessian { dim: d, c_aa, c_ad, c_dd, m_plus: m }
}

/// `∂²(det J)/∂a∂aᵀ`, d²×d² row-major.
pub fn det_hessian(j: &SmallMat) -> Vec<f64> {
    let d = j.dim();
    let n = d * d;
    let mut h = vec![0.0; n * n];
    if d == 2 {
        // det = a0 a3 - a1 a2
        h[3] = 1.0;
        h[3 * n] = 1.0;
        h[n + 2] = -1.0;
        h[2 * n + 1] = -1.0;
        return h;
    }
    // block (i, k) = ∂b_i/∂a_k; b_i = a_{i+1} × a_{i+2}
    for i in 0..3 {
        let k_next = (i + 1) % 3;
        let k_prev = (i + 2) % 3;
        // ∂(x × y)/∂x = -[y]×, ∂(x × y)/∂y = [x]×
        let y = j.col(k_prev);
        let x = j.col(k_next);
        put_skew(&mut h, n, i, k_next, &y, -1.0);
        put_skew(&mut h, n, i, k_prev, &x, 1.0);
    }
    h
}

fn put_skew(h: &mut [f64], n: usize, bi: usize, bk: usize, v: &[f64; 3], sign: f64) {
    let skew = [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]];
    for r in 0..3 {
        for c in 0..3 {
            h[(3 * bi + r) * n + 3 * bk + c] = sign * skew[r][c];
        }
    }
}

/// Dropped part `M±`: `(∂Φ/∂D) ∂²D/∂a∂aᵀ − (χ''/χ)((2/d) f + λ g) b bᵀ`.
pub fn corner_m_indefinite(eval: &ElementEval, params: &EnergyParams) -> Vec<f64> {
    let d = eval.dim();
    let dd = d as f64;
    let n = d * d;
    let chi = eval.chi;
    let cp = eval.chi_prime;
    let lambda = params.lambda;
    let det = eval.det;
    let phi_d = -(2.0 / dd) * eval.a_norm_sq() * cp / (chi * chi_pow(chi, d))
        + lambda * (2.0 * det / chi - (det * det + 1.0) * cp / (chi * chi));
    let cpp = chi_second_raw(det, params.eps);
    let coeff = cpp / chi * ((2.0 / dd) * eval.f + lambda * eval.g);
    let mut m = det_hessian(&eval.j);
    for r in 0..n {
        for c in 0..n {
            m[r * n + c] = phi_d * m[r * n + c] - coeff * eval.b[r] * eval.b[c];
        }
    }
    m
}

/// Local (d+1)d × (d+1)d stiffness of one corner, ordered (node, component).
fn corner_local_hessian(instance: &Instance, c: usize, u: &[f64], params: &EnergyParams) -> [f64; 144] {
    let corner = &instance.corners[c];
    let d = corner.dim();
    let eval = evaluate_jacobian(&compute_jacobian(corner, u), params);
    let (c_aa, c_ad, c_dd) = coefficients(&eval, params);
    let w = corner.weight;
    let nl = d + 1;
    // nodal projections A_j = Σ_m z_jm a_m, B_j = Σ_m z_jm b_m
    let mut pa = [[0.0; 3]; 4];
    let mut pb = [[0.0; 3]; 4];
    for j in 0..nl {
        for m in 0..d {
            let z = corner.z[j][m];
            for r in 0..d {
                pa[j][r] += z * eval.a[m * d + r];
                pb[j][r] += z * eval.b[m * d + r];
            }
        }
    }
    let size = nl * d;
    let mut k = [0.0; 144];
    for j in 0..nl {
        for i in 0..nl {
            let zz: f64 = (0..d).map(|m| corner.z[j][m] * corner.z[i][m]).sum();
            for r in 0..d {
                for c in 0..d {
                    let mut v = c_ad * (pa[j][r] * pb[i][c] + pb[j][r] * pa[i][c]) + c_dd * pb[j][r] * pb[i][c];
                    if r == c {
                        v += c_aa * zz;
                    }
                    k[(j * d + r) * size + i * d + c] = w * v;
                }
            }
        }
    }
    k
}

/// Symmetric matrix stored as d×d blocks on pairs of free vertices.
///
/// Locked vertices are eliminated: rows and columns exist only for free
/// vertices, indexed in increasing global order.
#[derive(Clone, Debug)]
pub struct BlockSparse {
    pub dim: usize,
    /// Global vertex id of each block row.
    pub vertices: Vec<usize>,
    /// Block row of each global vertex, `None` if locked.
    pub row_of: Vec<Option<usize>>,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    /// Block values, d² each, row-major within a block.
    pub values: Vec<f64>,
}

impl BlockSparse {
    /// Sparsity pattern of the element graph restricted to free vertices,
    /// diagonal included, with zero values.
    pub fn pattern(instance: &Instance) -> Self {
        let d = instance.dim();
        let nv = instance.num_vertices();
        let locked = &instance.mesh.locked;
        let mut row_of = vec![None; nv];
        let mut vertices = Vec::new();
        for v in 0..nv {
            if !locked[v] {
                row_of[v] = Some(vertices.len());
                vertices.push(v);
            }
        }
        let mut row_ptr = Vec::with_capacity(vertices.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut scratch = Vec::new();
        for &v in &vertices {
            scratch.clear();
            for &(c, _) in instance.vertex_corners(v) {
                scratch.extend(instance.corners[c].nodes().iter().filter_map(|&w| row_of[w]));
            }
            scratch.sort_unstable();
            scratch.dedup();
            cols.extend_from_slice(&scratch);
            row_ptr.push(cols.len());
        }
        let values = vec![0.0; cols.len() * d * d];
        Self { dim: d, vertices, row_of, row_ptr, cols, values }
    }

    /// Block-diagonal identity on `n` rows, for testing solvers.
    pub fn identity(dim: usize, n: usize) -> Self {
        let mut values = vec![0.0; n * dim * dim];
        for b in 0..n {
            for k in 0..dim {
                values[b * dim * dim + k * dim + k] = 1.0;
            }
        }
        Self {
            dim,
            vertices: (0..n).collect(),
            row_of: (0..n).map(Some).collect(),
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            values,
        }
    }

    #[inline]
    pub fn num_block_rows(&self) -> usize {
        self.vertices.len()
    }

    /// Scalar size of the (square) matrix.
    #[inline]
    pub fn size(&self) -> usize {
        self.num_block_rows() * self.dim
    }

    pub fn block(&self, row: usize, col: usize) -> Option<&[f64]> {
        let dd = self.dim * self.dim;
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        let pos = self.cols[range.clone()].binary_search(&col).ok()?;
        let k = range.start + pos;
        Some(&self.values[k * dd..(k + 1) * dd])
    }

    pub fn diag_block(&self, row: usize) -> &[f64] {
        self.block(row, row).expect("diagonal block is always in the pattern")
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let d = self.dim;
        let dd = d * d;
        par::for_each_chunk_mut(y, d, |row, yr| {
            yr.iter_mut().for_each(|v| *v = 0.0);
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.cols[k];
                let blk = &self.values[k * dd..(k + 1) * dd];
                let xc = &x[col * d..(col + 1) * d];
                for r in 0..d {
                    let mut s = 0.0;
                    for c in 0..d {
                        s += blk[r * d + c] * xc[c];
                    }
                    yr[r] += s;
                }
            }
        });
    }

    /// Restricts a full per-vertex vector to the free rows.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::with_capacity(self.size());
        for &v in &self.vertices {
            out.extend_from_slice(&full[v * d..(v + 1) * d]);
        }
        out
    }

    /// Expands a reduced vector to full size, zero on locked vertices.
    pub fn scatter(&self, reduced: &[f64], num_vertices: usize) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; num_vertices * d];
        for (row, &v) in self.vertices.iter().enumerate() {
            out[v * d..(v + 1) * d].copy_from_slice(&reduced[row * d..(row + 1) * d]);
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let d = self.dim;
        let n = self.size();
        let mut m = vec![vec![0.0; n]; n];
        for row in 0..self.num_block_rows() {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.cols[k];
                for r in 0..d {
                    for c in 0..d {
                        m[row * d + r][col * d + c] = self.values[k * d * d + r * d + c];
                    }
                }
            }
        }
        m
    }

    /// Overwrites the values with `H⁺(U, ε)`; the pattern must come from the
    /// same instance.
    pub fn fill_h_plus(&mut self, u: &[f64], instance: &Instance, params: &EnergyParams) {
        let d = self.dim;
        let dd = d * d;
        let nl = d + 1;
        let size = nl * d;
        let local = par::map_collect(instance.corners.len(), |c| corner_local_hessian(instance, c, u, params));

        let mut rows: Vec<&mut [f64]> = Vec::with_capacity(self.num_block_rows());
        let mut rest = self.values.as_mut_slice();
        for row in 0..self.row_ptr.len() - 1 {
            let len = (self.row_ptr[row + 1] - self.row_ptr[row]) * dd;
            let (head, tail) = rest.split_at_mut(len);
            rows.push(head);
            rest = tail;
        }
        let (row_ptr, cols, vertices, row_of) = (&self.row_ptr, &self.cols, &self.vertices, &self.row_of);
        par::for_each_owned(rows, |row, out| {
            out.iter_mut().for_each(|v| *v = 0.0);
            let row_cols = &cols[row_ptr[row]..row_ptr[row + 1]];
            for &(c, j) in instance.vertex_corners(vertices[row]) {
                let k = &local[c];
                for (i, &w) in instance.corners[c].nodes().iter().enumerate() {
                    let Some(col) = row_of[w] else { continue };
                    let pos = row_cols.binary_search(&col).expect("pattern covers element graph");
                    let blk = &mut out[pos * dd..(pos + 1) * dd];
                    for r in 0..d {
                        for cc in 0..d {
                            blk[r * d + cc] += k[(j * d + r) * size + i * d + cc];
                        }
                    }
                }
            }
        });
    }
}

/// Assembles `H⁺ = Σ_corners w · Zᵀ-conjugated M⁺` on the free vertices.
pub fn assemble_h_plus(u: &[f64], instance: &Instance, params: &EnergyParams) -> BlockSparse {
    let mut h = BlockSparse::pattern(instance);
    h.fill_h_plus(u, instance, params);
    h
}
