//! Synthetic problem instances.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Element, MeshPair, TargetShapePolicy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FixtureSpec {
    /// n×n triangulated unit square, boundary locked, two interior vertices
    /// (locked as well) exchanged in the initial map.
    PointSwapSquare { n: usize },
    /// One interior vertex with 12 incident triangles, nothing locked,
    /// regular targets.
    TriangleFan12,
    /// Kuhn-tetrahedralized cube of n³ cells minus a central cavity; outer
    /// and cavity boundaries locked, cavity rotated about z by `angle_deg`.
    CavityCube { n: usize, angle_deg: f64 },
    /// Rectangle of nx×ny cells and length `length` (height 1); the left end
    /// is locked in place, the right end locked at `stretch` times its x.
    StretchedBar { nx: usize, ny: usize, length: f64, stretch: f64 },
}

impl FixtureSpec {
    pub fn default_policy(&self) -> TargetShapePolicy {
        match self {
            FixtureSpec::TriangleFan12 => TargetShapePolicy::Regular,
            _ => TargetShapePolicy::Rest,
        }
    }

    pub fn stretched_bar() -> Self {
        FixtureSpec::StretchedBar { nx: 16, ny: 4, length: 4.0, stretch: 2.0 }
    }
}

impl FromStr for FixtureSpec {
    type Err = Error;

    /// `point_swap_square:N`, `triangle_fan_12`, `cavity_cube:N:ANGLE`,
    /// `stretched_bar[:NX:NY:LENGTH:STRETCH]`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Fixture(format!("'{s}': missing parameter {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::Fixture(format!("'{s}': {e}")))
        };
        let int = |i: usize| -> Result<usize> {
            let v = num(i)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Fixture(format!("'{s}': parameter {i} must be a nonnegative integer")));
            }
            Ok(v as usize)
        };
        match parts[0] {
            "point_swap_square" => Ok(FixtureSpec::PointSwapSquare { n: int(1)? }),
            "triangle_fan_12" => Ok(FixtureSpec::TriangleFan12),
            "cavity_cube" => Ok(FixtureSpec::CavityCube { n: int(1)?, angle_deg: num(2)? }),
            "stretched_bar" if parts.len() == 1 => Ok(FixtureSpec::stretched_bar()),
            "stretched_bar" => Ok(FixtureSpec::StretchedBar { nx: int(1)?, ny: int(2)?, length: num(3)?, stretch: num(4)? }),
            other => Err(Error::Fixture(format!("unknown fixture '{other}'"))),
        }
    }
}

impl fmt::Display for FixtureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixtureSpec::PointSwapSquare { n } => write!(f, "point_swap_square:{n}"),
            FixtureSpec::TriangleFan12 => f.write_str("triangle_fan_12"),
            FixtureSpec::CavityCube { n, angle_deg } => write!(f, "cavity_cube:{n}:{angle_deg}"),
            FixtureSpec::StretchedBar { nx, ny, length, stretch } => write!(f, "stretched_bar:{nx}:{ny}:{length}:{stretch}"),
        }
    }
}

pub fn generate_fixture(spec: &FixtureSpec) -> Result<MeshPair> {
    match *spec {
        FixtureSpec::PointSwapSquare { n } => point_swap_square(n),
        FixtureSpec::TriangleFan12 => triangle_fan(12),
        FixtureSpec::CavityCube { n, angle_deg } => cavity_cube(n, angle_deg),
        FixtureSpec::StretchedBar { nx, ny, length, stretch } => stretched_bar(nx, ny, length, stretch),
    }
}

/// Vertices and triangles of an nx×ny grid on [0,w]×[0,h], cells split along
/// alternating diagonals.
fn grid_2d(nx: usize, ny: usize, w: f64, h: f64) -> (Vec<f64>, Vec<Element>) {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut pts = Vec::with_capacity(2 * (nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            pts.push(w * i as f64 / nx as f64);
            pts.push(h * j as f64 / ny as f64);
        }
    }
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                tris.push(Element::triangle(a, b, c));
                tris.push(Element::triangle(a, c, d));
            } else {
                tris.push(Element::triangle(a, b, d));
                tris.push(Element::triangle(b, c, d));
            }
        }
    }
    (pts, tris)
}

fn point_swap_square(n: usize) -> Result<MeshPair> {
    if n < 4 {
        return Err(Error::Fixture(format!("point_swap_square needs n >= 4, got {n}")));
    }
    let (rest, elements) = grid_2d(n, n, 1.0, 1.0);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut locked: Vec<bool> = (0..(n + 1) * (n + 1)).map(|v| {
        let (i, j) = (v % (n + 1), v / (n + 1));
        i == 0 || j == 0 || i == n || j == n
    })
    .collect();
    let a = id(n / 2 - 1, n / 2);
    let b = id(n / 2 + 1, n / 2);
    locked[a] = true;
    locked[b] = true;
    let mut init = rest.clone();
    for k in 0..2 {
        init.swap(2 * a + k, 2 * b + k);
    }
    MeshPair::new(2, rest, elements, locked, init)
}

fn triangle_fan(k: usize) -> Result<MeshPair> {
    let mut rest = vec![0.0, 0.0];
    for i in 0..k {
        let t = 2.0 * PI * i as f64 / k as f64;
        rest.push(t.cos());
        rest.push(t.sin());
    }
    let elements = (0..k).map(|i| Element::triangle(0, 1 + i, 1 + (i + 1) % k)).collect();
    // center pushed outside the rim: the triangles facing it are inverted
    let mut init = rest.clone();
    init[0] = 1.5;
    MeshPair::new(2, rest, elements, vec![false; k + 1], init)
}

fn cavity_cube(n: usize, angle_deg: f64) -> Result<MeshPair> {
    if n < 3 {
        return Err(Error::Fixture(format!("cavity_cube needs n >= 3, got {n}")));
    }
    if !angle_deg.is_finite() {
        return Err(Error::Fixture("cavity_cube angle must be finite".into()));
    }
    let lo = (n + 1) / 3;
    let hi = n - lo;
    let in_cavity = |i: usize, j: usize, k: usize| (lo..hi).contains(&i) && (lo..hi).contains(&j) && (lo..hi).contains(&k);
    let grid_id = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let coord = |i: usize| -1.0 + 2.0 * i as f64 / n as f64;

    let ng = (n + 1).pow(3);
    let mut used = vec![false; ng];
    let mut raw_tets = Vec::new();
    // Kuhn subdivision: one tet per axis permutation, conforming across cells
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if in_cavity(i, j, k) {
                    continue;
                }
                for perm in PERMS {
                    let mut p = [i, j, k];
                    let mut tet = [grid_id(i, j, k); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        p[axis] += 1;
                        tet[s + 1] = grid_id(p[0], p[1], p[2]);
                    }
                    for &v in &tet {
                        used[v] = true;
                    }
                    raw_tets.push(tet);
                }
            }
        }
    }

    let mut new_id = vec![usize::MAX; ng];
    let mut rest = Vec::new();
    let mut locked = Vec::new();
    let mut init = Vec::new();
    let (s, c) = angle_deg.to_radians().sin_cos();
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                let g = grid_id(i, j, k);
                if !used[g] {
                    continue;
                }
                new_id[g] = locked.len();
                let x = [coord(i), coord(j), coord(k)];
                rest.extend_from_slice(&x);
                let outer = [i, j, k].iter().any(|&t| t == 0 || t == n);
                let inner = [i, j, k].iter().all(|&t| (lo..=hi).contains(&t)) && [i, j, k].iter().any(|&t| t == lo || t == hi);
                locked.push(outer || inner);
                if inner {
                    init.extend_from_slice(&[c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]]);
                } else {
                    init.extend_from_slice(&x);
                }
            }
        }
    }

    let point = |v: usize| [rest[3 * v], rest[3 * v + 1], rest[3 * v + 2]];
    let elements = raw_tets
        .into_iter()
        .map(|t| {
            let mut t = t.map(|g| new_id[g]);
            let (p0, p1, p2, p3) = (point(t[0]), point(t[1]), point(t[2]), point(t[3]));
            let e = |a: [f64; 3]| [a[0] - p0[0], a[1] - p0[1], a[2] - p0[2]];
            let (e1, e2, e3) = (e(p1), e(p2), e(p3));
            let det = e1[0] * (e2[1] * e3[2] - e2[2] * e3[1]) - e1[1] * (e2[0] * e3[2] - e2[2] * e3[0])
                + e1[2] * (e2[0] * e3[1] - e2[1] * e3[0]);
            if det < 0.0 {
                t.swap(2, 3);
            }
            Element::tet(t[0], t[1], t[2], t[3])
        })
        .collect();
    MeshPair::new(3, rest, elements, locked, init)
}

fn stretched_bar(nx: usize, ny: usize, length: f64, stretch: f64) -> Result<MeshPair> {
    if nx < 1 || ny < 1 || !(length > 0.0) || !(stretch > 0.0) {
        return Err(Error::Fixture(format!("invalid stretched_bar parameters {nx} {ny} {length} {stretch}")));
    }
    let (rest, elements) = grid_2d(nx, ny, length, 1.0);
    let locked = (0..(nx + 1) * (ny + 1)).map(|v| v % (nx + 1) == 0 || v % (nx + 1) == nx).collect();
    let init = rest.chunks_exact(2).flat_map(|p| [p[0] * stretch, p[1]]).collect();
    MeshPair::new(2, rest, elements, locked, init)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::min_det;
    use crate::mesh::build_instance;

    fn initial_min_det(spec: FixtureSpec) -> f64 {
        let mesh = generate_fixture(&spec).unwrap();
        let inst = build_instance(mesh, spec.default_policy()).unwrap();
        min_det(&inst.mesh.initial_map, &inst)
    }

    #[test]
    fn point_swap_square_is_folded() {
        assert!(initial_min_det(FixtureSpec::PointSwapSquare { n: 8 }) < 0.0);
        let mesh = generate_fixture(&FixtureSpec::PointSwapSquare { n: 8 }).unwrap();
        assert_eq!(mesh.num_vertices(), 81);
        assert_eq!(mesh.num_locked(), 32 + 2);
    }

    #[test]
    fn fan_has_twelve_triangles() {
        let mesh = generate_fixture(&FixtureSpec::TriangleFan12).unwrap();
        assert_eq!(mesh.elements.len(), 12);
        assert_eq!(mesh.num_vertices(), 13);
        assert!(mesh.is_free_boundary());
    }

    #[test]
    fn unrotated_cavity_cube_is_fold_free() {
        let spec = FixtureSpec::CavityCube { n: 6, angle_deg: 0.0 };
        assert!(initial_min_det(spec) > 0.0);
        let mesh = generate_fixture(&spec).unwrap();
        // 6³ - 2³ cells, 6 tets each
        assert_eq!(mesh.elements.len(), 6 * (216 - 8));
    }

    #[test]
    fn rotated_cavity_cube_is_folded() {
        assert!(initial_min_det(FixtureSpec::CavityCube { n: 6, angle_deg: 45.0 }) < 0.0);
    }

    #[test]
    fn stretched_bar_starts_fold_free() {
        assert!(initial_min_det(FixtureSpec::stretched_bar()) > 0.0);
    }

    #[test]
    fn names_round_trip() {
        for s in ["point_swap_square:8", "triangle_fan_12", "cavity_cube:8:45", "stretched_bar:16:4:4:2"] {
            assert_eq!(s.parse::<FixtureSpec>().unwrap().to_string(), s);
        }
        assert!("cavity_cube:8".parse::<FixtureSpec>().is_err());
        assert!("nope".parse::<FixtureSpec>().is_err());
    }
}
