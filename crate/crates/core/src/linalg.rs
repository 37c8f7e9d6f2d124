//! Small dense matrices of size 2×2 or 3×3.

use std::ops::{Index, IndexMut};

/// A d×d matrix with d ∈ {2, 3}, stored row-major in a fixed 3×3 buffer.
///
/// Entries outside the leading d×d block are always zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMat {
    dim: usize,
    m: [[f64; 3]; 3],
}

impl SmallMat {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "dimension must be 2 or 3, got {dim}");
        Self { dim, m: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.m[i][i] = 1.0;
        }
        out
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut out = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            out.m[i][i] = *v;
        }
        out
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut out = Self::zeros(dim);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "row {r} has wrong length");
            out.m[r][..dim].copy_from_slice(row);
        }
        out
    }

    /// Builds a matrix from its columns.
    pub fn from_cols(cols: &[[f64; 3]]) -> Self {
        let dim = cols.len();
        let mut out = Self::zeros(dim);
        for (c, col) in cols.iter().enumerate() {
            for r in 0..dim {
                out.m[r][c] = col[r];
            }
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn col(&self, c: usize) -> [f64; 3] {
        [self.m[0][c], self.m[1][c], self.m[2][c]]
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        match self.dim {
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.m[c][r] = self.m[r][c];
            }
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        let mut out = Self::zeros(d);
        for r in 0..d {
            for c in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += self.m[r][k] * rhs.m[k][c];
                }
                out.m[r][c] = s;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    /// Inverse via the adjugate. Returns `None` for an exactly singular matrix.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        // MᵀB = det·I for the dual basis B
        Some(self.dual_basis().transpose().scale(1.0 / det))
    }

    /// Squared Frobenius norm, i.e. tr(MᵀM).
    pub fn frob_sq(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                s += self.m[r][c] * self.m[r][c];
            }
        }
        s
    }

    /// Matrix whose columns `b_i` satisfy `a_iᵀ b_j = δ_ij det M`, where `a_i`
    /// are the columns of `self`. Equivalently the cofactor matrix, which is
    /// also the derivative of `det M` with respect to `M`.
    pub fn dual_basis(&self) -> Self {
        match self.dim {
            2 => {
                let a1 = self.col(0);
                let a2 = self.col(1);
                Self::from_cols(&[[a2[1], -a2[0], 0.0], [-a1[1], a1[0], 0.0]])
            }
            _ => {
                let a1 = self.col(0);
                let a2 = self.col(1);
                let a3 = self.col(2);
                Self::from_cols(&[cross(&a2, &a3), cross(&a3, &a1), cross(&a1, &a2)])
            }
        }
    }

    /// Column-major flattening into the first d² entries.
    pub fn flatten_cols(&self) -> [f64; 9] {
        let d = self.dim;
        let mut out = [0.0; 9];
        for c in 0..d {
            for r in 0..d {
                out[c * d + r] = self.m[r][c];
            }
        }
        out
    }

    pub fn from_flat_cols(dim: usize, a: &[f64]) -> Self {
        let mut out = Self::zeros(dim);
        for c in 0..dim {
            for r in 0..dim {
                out.m[r][c] = a[c * dim + r];
            }
        }
        out
    }

    /// Singular values in decreasing order (only the first `dim` are set).
    ///
    /// Closed form for 2×2; one-sided Jacobi rotations for 3×3.
    pub fn singular_values(&self) -> [f64; 3] {
        match self.dim {
            2 => {
                let (a, b, c, d) = (self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]);
                let e = 0.5 * (a + d);
                let f = 0.5 * (a - d);
                let g = 0.5 * (c + b);
                let h = 0.5 * (c - b);
                let q = e.hypot(h);
                let r = f.hypot(g);
                [q + r, (q - r).abs(), 0.0]
            }
            _ => jacobi_singular_values_3(self),
        }
    }
}

impl Index<(usize, usize)> for SmallMat {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.dim && c < self.dim);
        &self.m[r][c]
    }
}

impl IndexMut<(usize, usize)> for SmallMat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.dim && c < self.dim);
        &mut self.m[r][c]
    }
}

#[inline]
pub fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn jacobi_singular_values_3(m: &SmallMat) -> [f64; 3] {
    let mut cols = [m.col(0), m.col(1), m.col(2)];
    let dot = |x: &[f64; 3], y: &[f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..2 {
            for q in (p + 1)..3 {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (cp, cq) = (cols[p], cols[q]);
                for k in 0..3 {
                    cols[p][k] = c * cp[k] - s * cq[k];
                    cols[q][k] = s * cp[k] + c * cq[k];
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv = [dot(&cols[0], &cols[0]).sqrt(), dot(&cols[1], &cols[1]).sqrt(), dot(&cols[2], &cols[2]).sqrt()];
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}
