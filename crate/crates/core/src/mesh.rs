//! Problem instance: rest mesh, initial map, locks and per-corner
//! precomputation of shape matrices and gradient operators.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SmallMat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Triangle,
    Quad,
    Tetrahedron,
}

impl ElementKind {
    pub fn num_nodes(self) -> usize {
        match self {
            ElementKind::Triangle => 3,
            ElementKind::Quad | ElementKind::Tetrahedron => 4,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ElementKind::Triangle | ElementKind::Quad => 2,
            ElementKind::Tetrahedron => 3,
        }
    }

    pub fn is_simplex(self) -> bool {
        !matches!(self, ElementKind::Quad)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Element {
    pub kind: ElementKind,
    nodes: [usize; 4],
}

impl Element {
    pub fn new(kind: ElementKind, nodes: &[usize]) -> Self {
        assert_eq!(nodes.len(), kind.num_nodes(), "{kind:?} needs {} nodes", kind.num_nodes());
        let mut buf = [0; 4];
        buf[..nodes.len()].copy_from_slice(nodes);
        Self { kind, nodes: buf }
    }

    pub fn triangle(a: usize, b: usize, c: usize) -> Self {
        Self::new(ElementKind::Triangle, &[a, b, c])
    }

    pub fn quad(a: usize, b: usize, c: usize, d: usize) -> Self {
        Self::new(ElementKind::Quad, &[a, b, c, d])
    }

    pub fn tet(a: usize, b: usize, c: usize, d: usize) -> Self {
        Self::new(ElementKind::Tetrahedron, &[a, b, c, d])
    }

    #[inline]
    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.kind.num_nodes()]
    }
}

/// The problem instance: rest geometry, connectivity, locks and initial map.
///
/// Coordinates are stored flat with stride `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshPair {
    pub dim: usize,
    pub rest: Vec<f64>,
    pub elements: Vec<Element>,
    pub locked: Vec<bool>,
    pub initial_map: Vec<f64>,
}

impl MeshPair {
    pub fn new(dim: usize, rest: Vec<f64>, elements: Vec<Element>, locked: Vec<bool>, initial_map: Vec<f64>) -> Result<Self> {
        let mesh = Self { dim, rest, elements, locked, initial_map };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidMesh(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        if self.rest.len() % self.dim != 0 {
            return Err(Error::InvalidMesh("rest coordinate count is not a multiple of the dimension".into()));
        }
        let nv = self.num_vertices();
        if self.initial_map.len() != self.rest.len() {
            return Err(Error::InvalidMesh(format!(
                "initial map has {} coordinates, rest mesh has {}",
                self.initial_map.len(),
                self.rest.len()
            )));
        }
        if self.locked.len() != nv {
            return Err(Error::InvalidMesh(format!("{} lock flags for {} vertices", self.locked.len(), nv)));
        }
        if let Some(i) = self.rest.iter().chain(&self.initial_map).position(|x| !x.is_finite()) {
            return Err(Error::InvalidMesh(format!("non-finite coordinate at flat index {i}")));
        }
        for (e, el) in self.elements.iter().enumerate() {
            if el.kind.dim() != self.dim {
                return Err(Error::InvalidMesh(format!("element {e}: {:?} is not allowed in a {}D mesh", el.kind, self.dim)));
            }
            let nodes = el.nodes();
            if let Some(&v) = nodes.iter().find(|&&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("element {e}: vertex index {v} out of range ({nv} vertices)")));
            }
            for i in 0..nodes.len() {
                if nodes[i + 1..].contains(&nodes[i]) {
                    return Err(Error::InvalidMesh(format!("element {e}: repeated vertex index {}", nodes[i])));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.rest.len() / self.dim
    }

    pub fn num_locked(&self) -> usize {
        self.locked.iter().filter(|&&l| l).count()
    }

    /// Fewer than `dim` locked vertices: rigid motions are not removed.
    pub fn is_free_boundary(&self) -> bool {
        self.num_locked() < self.dim
    }

    pub fn rest_point(&self, v: usize) -> &[f64] {
        &self.rest[v * self.dim..(v + 1) * self.dim]
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let d = self.dim;
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in self.rest.chunks_exact(d) {
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if self.rest.is_empty() {
            return 0.0;
        }
        (0..d).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt()
    }
}

/// How the target ("ideal") shape of each corner simplex is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetShapePolicy {
    /// The rest element's own geometry.
    #[default]
    Rest,
    /// Unit equilateral triangle, unit-edge regular tetrahedron, unit square.
    Regular,
}

impl FromStr for TargetShapePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rest" | "rest-shape" => Ok(Self::Rest),
            "regular" => Ok(Self::Regular),
            other => Err(Error::Config(format!("unknown target shape policy '{other}' (expected rest|regular)"))),
        }
    }
}

impl fmt::Display for TargetShapePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rest => "rest",
            Self::Regular => "regular",
        })
    }
}

/// One simplex of the energy sum: a triangle or tet element, or one of the
/// four corner triangles of a quad.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerSimplex {
    pub element: usize,
    pub corner: usize,
    nodes: [usize; 4],
    /// Target edge vectors as columns, det > 0.
    pub shape: SmallMat,
    /// Quadrature weight in rest volume units.
    pub weight: f64,
    /// (d+1)×d gradient operator, `J = (u_0 … u_d) Z`.
    pub z: [[f64; 3]; 4],
}

impl CornerSimplex {
    #[inline]
    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    #[inline]
    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.dim() + 1]
    }

    fn new(element: usize, corner: usize, nodes: &[usize], shape: SmallMat, weight: f64) -> Self {
        let d = shape.dim();
        let s_inv = shape.inverse().expect("shape matrix checked nonsingular");
        let mut z = [[0.0; 3]; 4];
        for c in 0..d {
            let mut first = 0.0;
            for r in 0..d {
                z[r + 1][c] = s_inv[(r, c)];
                first -= s_inv[(r, c)];
            }
            z[0][c] = first;
        }
        let mut buf = [0; 4];
        buf[..nodes.len()].copy_from_slice(nodes);
        Self { element, corner, nodes: buf, shape, weight, z }
    }
}

/// Immutable problem data shared by all evaluations.
#[derive(Clone, Debug)]
pub struct Instance {
    pub mesh: MeshPair,
    pub policy: TargetShapePolicy,
    pub corners: Vec<CornerSimplex>,
    vc_offsets: Vec<usize>,
    vc_entries: Vec<(usize, usize)>,
}

impl Instance {
    #[inline]
    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.mesh.num_vertices()
    }

    #[inline]
    pub fn num_dofs(&self) -> usize {
        self.mesh.rest.len()
    }

    pub fn is_free_boundary(&self) -> bool {
        self.mesh.is_free_boundary()
    }

    /// `(corner index, local node index)` pairs touching vertex `v`, in
    /// increasing corner order.
    #[inline]
    pub fn vertex_corners(&self, v: usize) -> &[(usize, usize)] {
        &self.vc_entries[self.vc_offsets[v]..self.vc_offsets[v + 1]]
    }

    /// Per-DOF mask, `true` for DOFs of locked vertices.
    pub fn locked_dofs(&self) -> Vec<bool> {
        let d = self.dim();
        (0..self.num_dofs()).map(|i| self.mesh.locked[i / d]).collect()
    }
}

fn regular_shape(kind: ElementKind) -> SmallMat {
    match kind {
        ElementKind::Triangle => SmallMat::from_cols(&[[1.0, 0.0, 0.0], [0.5, 3f64.sqrt() / 2.0, 0.0]]),
        ElementKind::Quad => SmallMat::identity(2),
        ElementKind::Tetrahedron => SmallMat::from_cols(&[
            [1.0, 0.0, 0.0],
            [0.5, 3f64.sqrt() / 2.0, 0.0],
            [0.5, 3f64.sqrt() / 6.0, (2.0f64 / 3.0).sqrt()],
        ]),
    }
}

/// Local node triples of quad corners, counterclockwise: the corner vertex,
/// then its successor and predecessor.
const QUAD_CORNERS: [[usize; 3]; 4] = [[0, 1, 3], [1, 2, 0], [2, 3, 1], [3, 0, 2]];

/// Builds the corner simplices of every element.
///
/// Triangles and tets give one corner with weight `det S / d!`. Quads give
/// four corner triangles with weight `det S / 4` each (trapezoidal rule; the
/// four weights of a parallelogram add up to its area).
pub fn build_instance(mesh: MeshPair, policy: TargetShapePolicy) -> Result<Instance> {
    mesh.validate()?;
    let d = mesh.dim;
    let tolerance = 1e-12 * mesh.bbox_diagonal().powi(d as i32);
    let factorial = if d == 2 { 2.0 } else { 6.0 };

    let mut corners = Vec::with_capacity(mesh.elements.len());
    let mut local = [0usize; 4];
    for (e, el) in mesh.elements.iter().enumerate() {
        let nodes = el.nodes();
        let (count, fraction) = match el.kind {
            ElementKind::Quad => (4, 1.0 / 4.0),
            _ => (1, 1.0 / factorial),
        };
        for corner in 0..count {
            let n = d + 1;
            if el.kind == ElementKind::Quad {
                for k in 0..3 {
                    local[k] = nodes[QUAD_CORNERS[corner][k]];
                }
            } else {
                local[..n].copy_from_slice(nodes);
            }
            let mut shape = match policy {
                TargetShapePolicy::Regular => regular_shape(el.kind),
                TargetShapePolicy::Rest => {
                    let x0 = mesh.rest_point(local[0]);
                    let mut cols = [[0.0; 3]; 3];
                    for (c, col) in cols.iter_mut().enumerate().take(d) {
                        let xi = mesh.rest_point(local[c + 1]);
                        for k in 0..d {
                            col[k] = xi[k] - x0[k];
                        }
                    }
                    SmallMat::from_cols(&cols[..d])
                }
            };
            let mut det = shape.det();
            if det.abs() <= tolerance || !det.is_finite() {
                return Err(Error::DegenerateElement { element: e, det: det.abs(), tolerance });
            }
            if det < 0.0 {
                // reflect the target, the map is left alone
                for c in 0..d {
                    shape[(0, c)] = -shape[(0, c)];
                }
                det = -det;
            }
            corners.push(CornerSimplex::new(e, corner, &local[..n], shape, fraction * det));
        }
    }

    let nv = mesh.num_vertices();
    let mut counts = vec![0usize; nv + 1];
    for c in &corners {
        for &v in c.nodes() {
            counts[v + 1] += 1;
        }
    }
    for i in 0..nv {
        counts[i + 1] += counts[i];
    }
    let vc_offsets = counts.clone();
    let mut fill = counts;
    let mut vc_entries = vec![(0, 0); vc_offsets[nv]];
    for (ci, c) in corners.iter().enumerate() {
        for (l, &v) in c.nodes().iter().enumerate() {
            vc_entries[fill[v]] = (ci, l);
            fill[v] += 1;
        }
    }

    Ok(Instance { mesh, policy, corners, vc_offsets, vc_entries })
}

/// Jacobian of the affine map on one corner simplex.
pub fn compute_jacobian(corner: &CornerSimplex, u: &[f64]) -> SmallMat {
    let d = corner.dim();
    let mut j = SmallMat::zeros(d);
    for (l, &v) in corner.nodes().iter().enumerate() {
        let uv = &u[v * d..(v + 1) * d];
        let zl = &corner.z[l];
        for r in 0..d {
            for c in 0..d {
                j[(r, c)] += uv[r] * zl[c];
            }
        }
    }
    j
}

/// Current optimization state.
#[derive(Clone, Debug, PartialEq)]
pub struct MapState {
    pub u: Vec<f64>,
    pub iteration: usize,
    pub eps: f64,
}

impl MapState {
    pub fn initial(instance: &Instance) -> Self {
        Self { u: instance.mesh.initial_map.clone(), iteration: 0, eps: 1.0 }
    }

    /// True when every locked coordinate equals its initial value.
    pub fn locks_respected(&self, instance: &Instance) -> bool {
        let d = instance.dim();
        let init = &instance.mesh.initial_map;
        instance
            .mesh
            .locked
            .iter()
            .enumerate()
            .filter(|(_, &l)| l)
            .all(|(v, _)| (0..d).all(|k| self.u[v * d + k] == init[v * d + k]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> MeshPair {
        let rest = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        MeshPair::new(2, rest.clone(), vec![Element::triangle(0, 1, 2)], vec![false; 3], rest).unwrap()
    }

    #[test]
    fn unit_right_triangle_has_identity_shape() {
        let inst = build_instance(unit_triangle(), TargetShapePolicy::Rest).unwrap();
        let c = &inst.corners[0];
        assert_eq!(c.shape, SmallMat::identity(2));
        assert_eq!(c.weight, 0.5);
        assert_eq!(c.z[0][..2], [-1.0, -1.0]);
        assert_eq!(c.z[1][..2], [1.0, 0.0]);
        assert_eq!(c.z[2][..2], [0.0, 1.0]);
    }

    #[test]
    fn unit_square_quad_splits_into_four_corners() {
        let rest = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let mesh = MeshPair::new(2, rest.clone(), vec![Element::quad(0, 1, 2, 3)], vec![false; 4], rest).unwrap();
        let inst = build_instance(mesh, TargetShapePolicy::Rest).unwrap();
        assert_eq!(inst.corners.len(), 4);
        for (k, c) in inst.corners.iter().enumerate() {
            assert_eq!(c.corner, k);
            assert!((c.shape.det() - 1.0).abs() < 1e-15);
            assert!((c.weight - 0.25).abs() < 1e-15);
        }
        assert_eq!(inst.corners[1].nodes(), &[1, 2, 0]);
        let area: f64 = inst.corners.iter().map(|c| c.weight).sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_vertex_is_rejected() {
        let rest = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let err = MeshPair::new(2, rest.clone(), vec![Element::triangle(0, 1, 1)], vec![false; 3], rest).unwrap_err();
        assert!(err.to_string().contains("repeated"));
    }

    #[test]
    fn collinear_rest_triangle_is_degenerate() {
        let rest = vec![0.0, 0.0, 1.0, 0.0, 2.0, 0.0];
        let mesh = MeshPair::new(2, rest.clone(), vec![Element::triangle(0, 1, 2)], vec![false; 3], rest).unwrap();
        match build_instance(mesh, TargetShapePolicy::Rest) {
            Err(Error::DegenerateElement { element, .. }) => assert_eq!(element, 0),
            other => panic!("expected degenerate element error, got {other:?}"),
        }
    }

    #[test]
    fn quads_rejected_in_3d() {
        let rest = vec![0.0; 12];
        let err = MeshPair::new(3, rest.clone(), vec![Element::quad(0, 1, 2, 3)], vec![false; 4], rest).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn clockwise_rest_gets_reflected_target() {
        let rest = vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let mesh = MeshPair::new(2, rest.clone(), vec![Element::triangle(0, 1, 2)], vec![false; 3], rest.clone()).unwrap();
        let inst = build_instance(mesh, TargetShapePolicy::Rest).unwrap();
        let c = &inst.corners[0];
        assert!(c.shape.det() > 0.0);
        // the map is untouched, so the clockwise image reads as inverted
        assert!(compute_jacobian(c, &rest).det() < 0.0);
    }

    #[test]
    fn jacobian_examples() {
        let inst = build_instance(unit_triangle(), TargetShapePolicy::Rest).unwrap();
        let c = &inst.corners[0];
        let rest = inst.mesh.rest.clone();
        assert_eq!(compute_jacobian(c, &rest), SmallMat::identity(2));
        let doubled: Vec<f64> = rest.iter().map(|x| 2.0 * x).collect();
        assert_eq!(compute_jacobian(c, &doubled), SmallMat::identity(2).scale(2.0));
        // swap the images of vertices 1 and 2: J = [[0,1],[1,0]]
        let swapped = vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        assert_eq!(compute_jacobian(c, &swapped).det(), -1.0);
    }

    #[test]
    fn regular_targets_are_unit_shapes() {
        let inst = build_instance(unit_triangle(), TargetShapePolicy::Regular).unwrap();
        let c = &inst.corners[0];
        assert!((c.weight - 3f64.sqrt() / 4.0).abs() < 1e-15);
        let s = regular_shape(ElementKind::Tetrahedron);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let e: f64 = (0..3).map(|k| (s.col(i)[k] - s.col(j)[k]).powi(2)).sum();
            assert!((e.sqrt() - 1.0).abs() < 1e-15);
        }
        assert!((s.det() - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn vertex_corner_adjacency() {
        let rest = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let mesh = MeshPair::new(
            2,
            rest.clone(),
            vec![Element::triangle(0, 1, 2), Element::triangle(0, 2, 3)],
            vec![false; 4],
            rest,
        )
        .unwrap();
        let inst = build_instance(mesh, TargetShapePolicy::Rest).unwrap();
        assert_eq!(inst.vertex_corners(0), &[(0, 0), (1, 0)]);
        assert_eq!(inst.vertex_corners(2), &[(0, 2), (1, 1)]);
        assert_eq!(inst.vertex_corners(3), &[(1, 2)]);
        assert!(inst.is_free_boundary());
    }
}
