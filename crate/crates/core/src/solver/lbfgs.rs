//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Locked DOFs carry zero gradient, so every search direction leaves them
//! untouched.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::line_search::strong_wolfe;
use crate::energy::{energy_and_gradient, EnergyParams};
use crate::mesh::Instance;
use crate::par::dot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when `‖∇F‖∞ < gtol (1 + |F|)`.
    pub gtol: f64,
    /// Stop when one iteration decreases F by less than `ftol · max(|F|, 1)`.
    pub ftol: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { memory: 10, max_iterations: 500, gtol: 1e-10, ftol: 1e-13, c1: 1e-4, c2: 0.9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LbfgsStop {
    Gradient,
    Stalled,
    Budget,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub u: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: LbfgsStop,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `F(·, ε)` from `u0` with `ε` fixed.
///
/// `length_scale` sets the size of the first (steepest-descent) step.
pub fn lbfgs_minimize(u0: &[f64], instance: &Instance, params: &EnergyParams, config: &LbfgsConfig, length_scale: f64) -> LbfgsResult {
    let n = u0.len();
    let mut u = u0.to_vec();
    let (mut f, mut g) = energy_and_gradient(&u, instance, params);
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut stop = LbfgsStop::Budget;
    let mut iterations = 0;
    let mut retried = false;

    while iterations < config.max_iterations {
        let gmax = inf_norm(&g);
        if gmax < config.gtol * (1.0 + f.abs()) {
            stop = LbfgsStop::Gradient;
            break;
        }

        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        let (alpha_init, gamma) = match history.back() {
            Some((s, y, _)) => (1.0, dot(s, y) / dot(y, y)),
            None => (1.0, length_scale / gmax),
        };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += (a - b) * s[i];
            }
        }
        let p: Vec<f64> = q.iter().map(|x| -x).collect();
        let mut d0 = dot(&g, &p);
        let p = if d0 < 0.0 {
            p
        } else {
            history.clear();
            let p: Vec<f64> = g.iter().map(|x| -x * length_scale / gmax).collect();
            d0 = dot(&g, &p);
            p
        };

        let (trial, evals) = strong_wolfe(
            |alpha| {
                let x: Vec<f64> = u.iter().zip(&p).map(|(ui, pi)| ui + alpha * pi).collect();
                energy_and_gradient(&x, instance, params)
            },
            |grad| dot(grad, &p),
            f,
            d0,
            alpha_init,
            config.c1,
            config.c2,
        );
        evaluations += evals;
        let Some(trial) = trial else {
            if !history.is_empty() && !retried {
                // restart from steepest descent once
                history.clear();
                retried = true;
                continue;
            }
            stop = LbfgsStop::LineSearchFailed;
            break;
        };
        retried = false;
        iterations += 1;

        let s: Vec<f64> = p.iter().map(|pi| trial.alpha * pi).collect();
        let y: Vec<f64> = trial.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        for i in 0..n {
            u[i] += s[i];
        }
        let decrease = f - trial.value;
        f = trial.value;
        g = trial.grad;
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        if decrease <= config.ftol * f.abs().max(1.0) {
            stop = LbfgsStop::Stalled;
            break;
        }
    }

    LbfgsResult { u, value: f, iterations, evaluations, stop }
}
