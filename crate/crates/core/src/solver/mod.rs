//! Penalty continuation: repeatedly minimize `F(·, ε)` while lowering `ε`,
//! until the map is fold-free and the energy stagnates.

pub mod lbfgs;
pub mod line_search;
pub mod newton;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::debug;
use serde::{Deserialize, Serialize};

pub use crate::energy::min_det;
use crate::energy::{chi_raw, total_energy, EnergyParams};
use crate::error::{Error, Result};
use crate::hessian::BlockSparse;
use crate::mesh::{Instance, MapState};
use crate::quality::{self, QualityReport};
pub use lbfgs::{lbfgs_minimize, LbfgsConfig, LbfgsResult, LbfgsStop};
pub use newton::{newton_step, pcg, CgResult, NewtonConfig, NewtonStep};

/// Smallest regularization ever used.
pub const EPS_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    QuasiNewton,
    Newton,
    /// Quasi-Newton, switching to Newton after two consecutive outer
    /// iterations without essential descent on a tangled map.
    #[default]
    Auto,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quasi_newton" | "quasi-newton" | "lbfgs" => Ok(Self::QuasiNewton),
            "newton" => Ok(Self::Newton),
            "auto" => Ok(Self::Auto),
            other => Err(Error::Config(format!("unknown scheme '{other}' (expected quasi_newton|newton|auto)"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::QuasiNewton => "quasi_newton",
            Self::Newton => "newton",
            Self::Auto => "auto",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsRule {
    /// Update from the previous ε, the new min det J and the achieved descent;
    /// starts from ε = 1.
    Theory,
    /// `ε = sqrt(1e-12 + 0.04 min(0, min det J)²)` from the current state.
    #[default]
    Heuristic,
}

impl FromStr for EpsRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theory" => Ok(Self::Theory),
            "heuristic" => Ok(Self::Heuristic),
            other => Err(Error::Config(format!("unknown eps rule '{other}' (expected theory|heuristic)"))),
        }
    }
}

impl fmt::Display for EpsRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Theory => "theory",
            Self::Heuristic => "heuristic",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub scheme: Scheme,
    pub eps_rule: EpsRule,
    pub sigma_floor: f64,
    /// Relative F decrease below which the outer loop stops on a fold-free map.
    pub stagnation: f64,
    pub max_outer: usize,
    pub lbfgs: LbfgsConfig,
    pub newton: NewtonConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            scheme: Scheme::Auto,
            eps_rule: EpsRule::Heuristic,
            sigma_floor: 0.1,
            stagnation: 1e-3,
            max_outer: 1000,
            lbfgs: LbfgsConfig::default(),
            newton: NewtonConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and nonnegative, got {}", self.lambda)));
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor < 1.0) {
            return Err(Error::Config(format!("sigma floor must lie in (0, 1), got {}", self.sigma_floor)));
        }
        if !(self.stagnation > 0.0 && self.stagnation < 1.0) {
            return Err(Error::Config(format!("stagnation factor must lie in (0, 1), got {}", self.stagnation)));
        }
        if self.lbfgs.memory == 0 {
            return Err(Error::Config("L-BFGS memory must be positive".into()));
        }
        Ok(())
    }
}

/// `σ = max(floor, 1 − F_next/F_prev)`.
pub fn sigma_k(f_prev: f64, f_next: f64, floor: f64) -> f64 {
    floor.max(1.0 - f_next / f_prev)
}

/// Regularization update that keeps `(1−σ) χ(D, ε) ≤ χ(D, ε_next)` for every
/// `D ≥ min_det`.
pub fn update_epsilon_theory(eps: f64, min_det: f64, sigma: f64) -> f64 {
    if min_det < 0.0 {
        let r = min_det.hypot(eps);
        (1.0 - sigma * r / (min_det.abs() + r)) * eps
    } else {
        (1.0 - sigma) * eps
    }
}

pub fn update_epsilon_heuristic(min_det: f64) -> f64 {
    let m = min_det.min(0.0);
    (1e-12 + 4e-2 * m * m).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerScheme {
    QuasiNewton,
    Newton,
}

/// One outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub scheme: InnerScheme,
    /// ε used by the inner minimizer.
    pub eps: f64,
    /// ε for the next iteration.
    pub eps_next: f64,
    /// `F(U^k, ε^k)`.
    pub f_before: f64,
    /// `F(U^{k+1}, ε^k)`.
    pub f_after: f64,
    /// `F(U^{k+1}, ε^{k+1})`.
    pub f_next: f64,
    /// min det J at `U^{k+1}`.
    pub min_det: f64,
    /// Descent coefficient after flooring.
    pub sigma: f64,
    /// `1 − f_after / f_before`.
    pub sigma_raw: f64,
    pub inner_iterations: usize,
    pub line_search_failed: bool,
    pub cg_fallback: bool,
    pub wall_time_s: f64,
}

impl IterationRecord {
    /// `(1−σ) χ(D₋, ε) ≤ χ(D₋, ε_next)` up to `rel_tol`.
    pub fn sufficient_condition_holds(&self, rel_tol: f64) -> bool {
        let lhs = (1.0 - self.sigma) * chi_raw(self.min_det, self.eps);
        let rhs = chi_raw(self.min_det, self.eps_next);
        lhs <= rhs * (1.0 + rel_tol)
    }

    /// `F(U^{k+1}, ε^{k+1}) ≤ F(U^k, ε^k)` up to `rel_tol`.
    pub fn non_growth_holds(&self, rel_tol: f64) -> bool {
        self.f_next <= self.f_before * (1.0 + rel_tol)
    }

    /// The inner solve achieved the essential descent `σ_raw ≥ floor`.
    pub fn descent_certified(&self, floor: f64) -> bool {
        self.sigma_raw >= floor
    }

    /// Equality of every field except timing.
    pub fn same_numbers(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time_s = other.wall_time_s;
        let bits = |r: &Self| {
            [r.eps, r.eps_next, r.f_before, r.f_after, r.f_next, r.min_det, r.sigma, r.sigma_raw].map(f64::to_bits)
        };
        a == *other && bits(self) == bits(other)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn same_numbers(&self, other: &Self) -> bool {
        self.records.len() == other.records.len() && self.records.iter().zip(&other.records).all(|(a, b)| a.same_numbers(b))
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub state: MapState,
    pub trace: IterationTrace,
    pub report: QualityReport,
    /// Final map is fold-free.
    pub success: bool,
    /// Outer loop stopped on its own criterion rather than the budget.
    pub converged: bool,
    /// Outer iteration at which the auto scheme switched to Newton.
    pub switched_to_newton: Option<usize>,
}

fn map_length_scale(u: &[f64], d: usize) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in u.chunks_exact(d) {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let diag = (0..d).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt();
    if diag > 0.0 && diag.is_finite() {
        diag
    } else {
        1.0
    }
}

/// Runs the continuation loop from the instance's initial map.
///
/// A run that exhausts its budget is not an error: the outcome carries the
/// trace and `success = (min det J > 0)`.
pub fn untangle(instance: &Instance, config: &SolverConfig) -> Result<Outcome> {
    config.validate()?;
    let start = Instant::now();
    let d = instance.dim();
    let mut state = MapState::initial(instance);
    state.eps = match config.eps_rule {
        EpsRule::Theory => 1.0,
        EpsRule::Heuristic => update_epsilon_heuristic(min_det(&state.u, instance)),
    }
    .max(EPS_FLOOR);

    let mut inner = match config.scheme {
        Scheme::Newton => InnerScheme::Newton,
        _ => InnerScheme::QuasiNewton,
    };
    let mut pattern: Option<BlockSparse> = None;
    let mut stalls = 0usize;
    let mut switched_to_newton = None;
    let mut trace = IterationTrace::default();
    let mut converged = false;
    let mut last_min_det = min_det(&state.u, instance);

    for k in 0..config.max_outer {
        let t0 = Instant::now();
        let eps = state.eps;
        let params = EnergyParams { lambda: config.lambda, eps };
        let f_before = total_energy(&state.u, instance, &params);
        let scale = map_length_scale(&state.u, d);

        let (u_next, inner_iterations, line_search_failed, cg_fallback) = match inner {
            InnerScheme::QuasiNewton => {
                let r = lbfgs_minimize(&state.u, instance, &params, &config.lbfgs, scale);
                (r.u, r.iterations, r.stop == LbfgsStop::LineSearchFailed, false)
            }
            InnerScheme::Newton => {
                let h = pattern.get_or_insert_with(|| BlockSparse::pattern(instance));
                let mut u = state.u.clone();
                let (mut ls_failed, mut fallback) = (false, false);
                let mut steps = 0;
                for _ in 0..config.newton.max_steps.max(1) {
                    let step = newton_step(&u, instance, &params, &config.newton, h, scale);
                    if step.converged {
                        break;
                    }
                    steps += 1;
                    fallback |= step.cg_fallback;
                    if step.line_search_failed {
                        ls_failed = steps == 1;
                        break;
                    }
                    u = step.u;
                }
                (u, steps, ls_failed, fallback)
            }
        };

        let f_after = total_energy(&u_next, instance, &params);
        let sigma_raw = 1.0 - f_after / f_before;
        let sigma = sigma_k(f_before, f_after, config.sigma_floor);
        let dmin = min_det(&u_next, instance);
        let eps_next = match config.eps_rule {
            EpsRule::Theory => update_epsilon_theory(eps, dmin, sigma),
            EpsRule::Heuristic => update_epsilon_heuristic(dmin),
        }
        .max(EPS_FLOOR);
        let f_next = total_energy(&u_next, instance, &EnergyParams { lambda: config.lambda, eps: eps_next });

        let record = IterationRecord {
            iteration: k,
            scheme: inner,
            eps,
            eps_next,
            f_before,
            f_after,
            f_next,
            min_det: dmin,
            sigma,
            sigma_raw,
            inner_iterations,
            line_search_failed,
            cg_fallback,
            wall_time_s: t0.elapsed().as_secs_f64(),
        };
        debug!(
            "outer {k}: eps {eps:.3e} -> {eps_next:.3e}, F {f_before:.6e} -> {f_after:.6e}, min det {dmin:.3e}, sigma {sigma_raw:.3}, inner {inner_iterations}"
        );
        trace.records.push(record);

        if config.scheme == Scheme::Auto && inner == InnerScheme::QuasiNewton {
            if sigma_raw < config.sigma_floor && dmin <= 0.0 {
                stalls += 1;
            } else {
                stalls = 0;
            }
            if stalls >= 2 {
                inner = InnerScheme::Newton;
                switched_to_newton = Some(k + 1);
                debug!("switching to Newton at outer iteration {}", k + 1);
            }
        }

        state.u = u_next;
        state.eps = eps_next;
        state.iteration = k + 1;
        last_min_det = dmin;

        if dmin > 0.0 && f_next > (1.0 - config.stagnation) * f_before {
            converged = true;
            break;
        }
    }

    let mut report = quality::report(&state.u, instance);
    report.iterations = state.iteration;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(Outcome { success: last_min_det > 0.0, state, trace, report, converged, switched_to_newton })
}
