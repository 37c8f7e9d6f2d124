//! File formats and run configuration.

mod locks;
mod medit;
mod report;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use locks::{format_locks, parse_locks, read_locks};
pub use medit::{format_medit, parse_medit, read_medit, write_medit, MeditMesh};
pub use report::{write_outputs, RunReport};

use crate::error::{Error, Result};
use crate::mesh::{MeshPair, TargetShapePolicy};
use crate::solver::{EpsRule, Scheme, SolverConfig};

/// Everything a command-line run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rest: PathBuf,
    pub init: PathBuf,
    pub locks: Option<PathBuf>,
    pub out: PathBuf,
    pub report: PathBuf,
    pub lambda: f64,
    pub scheme: Scheme,
    pub eps_rule: EpsRule,
    pub targets: TargetShapePolicy,
    pub max_outer: usize,
    /// Worker threads; `None` lets rayon decide.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for p in [&self.rest, &self.init].into_iter().chain(self.locks.as_ref()) {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        for p in [&self.out, &self.report] {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !dir.is_dir() {
                return Err(Error::Config(format!("output directory {} does not exist", dir.display())));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        self.solver_config().validate()
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { lambda: self.lambda, scheme: self.scheme, eps_rule: self.eps_rule, max_outer: self.max_outer, ..Default::default() }
    }
}

/// Builds a mesh pair from a rest mesh, a map with the same connectivity and
/// an optional lock list. Without a lock list, vertices with a positive
/// reference mark in the rest mesh are locked.
pub fn load_problem(rest: &Path, init: &Path, locks: Option<&Path>) -> Result<MeshPair> {
    let r = read_medit(rest)?;
    let m = read_medit(init)?;
    let mismatch = |what: String| Error::parse(init, m.elements_line.max(1), format!("connectivity mismatch with {}: {what}", rest.display()));
    if r.dim != m.dim {
        return Err(mismatch(format!("dimension {} vs {}", m.dim, r.dim)));
    }
    if r.num_vertices() != m.num_vertices() {
        return Err(mismatch(format!("{} vertices vs {}", m.num_vertices(), r.num_vertices())));
    }
    if r.elements.len() != m.elements.len() {
        return Err(mismatch(format!("{} elements vs {}", m.elements.len(), r.elements.len())));
    }
    if let Some(i) = (0..r.elements.len()).find(|&i| r.elements[i] != m.elements[i]) {
        return Err(mismatch(format!("element {} differs", i + 1)));
    }
    let locked = match locks {
        Some(p) => read_locks(p, r.num_vertices())?,
        None => r.refs.iter().map(|&x| x > 0).collect(),
    };
    MeshPair::new(r.dim, r.points, r.elements, locked, m.points)
}

/// Writes rest mesh, initial map and lock list for a mesh pair.
pub fn write_problem(mesh: &MeshPair, rest: &Path, init: &Path, locks: &Path) -> Result<()> {
    let refs: Vec<i64> = mesh.locked.iter().map(|&l| l as i64).collect();
    write_medit(rest, mesh.dim, &mesh.rest, &refs, &mesh.elements)?;
    write_medit(init, mesh.dim, &mesh.initial_map, &refs, &mesh.elements)?;
    std::fs::write(locks, format_locks(&mesh.locked)).map_err(|e| Error::io(locks, e))
}
