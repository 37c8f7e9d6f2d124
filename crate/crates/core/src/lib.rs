//! Foldover-free (locally injective) piecewise-affine maps for triangle, quad
//! and tetrahedral meshes.
//!
//! The map is obtained by minimizing a regularized polyconvex distortion
//! energy while a regularization parameter `eps` is driven towards zero.
//! Two inner minimizers are available: L-BFGS, and a Newton scheme on a
//! positive semidefinite approximation of the Hessian solved with block-Jacobi
//! preconditioned conjugate gradients.
//!
//! Element loops run on rayon when the `parallel` feature is enabled (the
//! default). All reductions use a fixed summation tree so results are
//! bit-identical for any thread count and with the sequential fallback.

pub mod energy;
pub mod error;
pub mod fixtures;
pub mod hessian;
pub mod io;
pub mod linalg;
pub mod mesh;
mod par;
pub mod quality;
pub mod solver;

pub use energy::{chi, chi_prime, element_energy, gradient, total_energy, ElementEval, EnergyParams};
pub use error::{Error, Result};
pub use fixtures::{generate_fixture, FixtureSpec};
pub use hessian::{assemble_h_plus, corner_m_indefinite, corner_m_plus, BlockSparse, CornerHessian};
pub use linalg::SmallMat;
pub use mesh::{build_instance, compute_jacobian, CornerSimplex, Element, ElementKind, Instance, MapState, MeshPair, TargetShapePolicy};
pub use quality::{singular_ratio, QualityReport};
pub use solver::{untangle, EpsRule, IterationRecord, IterationTrace, Outcome, Scheme, SolverConfig};
