#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use untangle_core::{build_instance, Element, Instance, MeshPair, SmallMat, TargetShapePolicy};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Structured triangle grid on [0, nx] × [0, ny].
pub fn tri_grid(nx: usize, ny: usize) -> (Vec<f64>, Vec<Element>) {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut pts = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            pts.extend_from_slice(&[i as f64, j as f64]);
        }
    }
    let mut el = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            el.push(Element::triangle(id(i, j), id(i + 1, j), id(i + 1, j + 1)));
            el.push(Element::triangle(id(i, j), id(i + 1, j + 1), id(i, j + 1)));
        }
    }
    (pts, el)
}

pub fn quad_grid(nx: usize, ny: usize) -> (Vec<f64>, Vec<Element>) {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let (pts, _) = tri_grid(nx, ny);
    let mut el = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            el.push(Element::quad(id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)));
        }
    }
    (pts, el)
}

/// Freudenthal subdivision of an nx × ny × nz block of unit cubes.
pub fn tet_block(nx: usize, ny: usize, nz: usize) -> (Vec<f64>, Vec<Element>) {
    let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut pts = Vec::new();
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                pts.extend_from_slice(&[i as f64, j as f64, k as f64]);
            }
        }
    }
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut el = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for p in perms {
                    let mut c = [i, j, k];
                    let mut t = [id(i, j, k); 4];
                    for (s, &ax) in p.iter().enumerate() {
                        c[ax] += 1;
                        t[s + 1] = id(c[0], c[1], c[2]);
                    }
                    // odd permutations give negative orientation
                    let odd = matches!(p, [0, 2, 1] | [1, 0, 2] | [2, 1, 0]);
                    if odd {
                        t.swap(2, 3);
                    }
                    el.push(Element::tet(t[0], t[1], t[2], t[3]));
                }
            }
        }
    }
    (pts, el)
}

pub fn instance(dim: usize, pts: Vec<f64>, el: Vec<Element>, locked: Vec<bool>, init: Vec<f64>) -> Instance {
    let mesh = MeshPair::new(dim, pts, el, locked, init).expect("valid mesh");
    build_instance(mesh, TargetShapePolicy::Rest).expect("non-degenerate mesh")
}

/// Small meshes with nothing locked: triangles, quads and tets.
pub fn small_meshes() -> Vec<Instance> {
    let mut out = Vec::new();
    for (pts, el) in [tri_grid(3, 2), quad_grid(2, 2)] {
        let n = pts.len() / 2;
        out.push(instance(2, pts.clone(), el, vec![false; n], pts));
    }
    let (pts, el) = tet_block(2, 1, 1);
    let n = pts.len() / 3;
    out.push(instance(3, pts.clone(), el, vec![false; n], pts));
    out
}

/// Rest positions plus uniform noise of the given amplitude.
pub fn perturbed(rest: &[f64], amplitude: f64, rng: &mut StdRng) -> Vec<f64> {
    rest.iter().map(|x| x + rng.gen_range(-amplitude..amplitude)).collect()
}

pub fn random_jacobian(dim: usize, rng: &mut StdRng) -> SmallMat {
    let mut m = SmallMat::zeros(dim);
    loop {
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = rng.gen_range(-2.0..2.0);
            }
        }
        if m.det().abs() > 1e-3 {
            return m;
        }
    }
}

/// Fourth-order central difference of `f` at `x` along coordinate `i`.
pub fn fd_partial(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut y = x.to_vec();
    let mut at = |t: f64| {
        y[i] = x[i] + t;
        f(&y)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn sym_min_max_eig(m: &[f64], n: usize) -> (f64, f64) {
    let mat = nalgebra::DMatrix::from_row_slice(n, n, m);
    let sym = (&mat + mat.transpose()) * 0.5;
    let e = nalgebra::SymmetricEigen::new(sym).eigenvalues;
    (e.min(), e.amax())
}
