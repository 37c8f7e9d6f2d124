//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances and time limits are the constants below.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use untangle_core::energy::{energy_and_gradient, evaluate_jacobian};
use untangle_core::io::{write_outputs, RunConfig};
use untangle_core::solver::{update_epsilon_theory, Outcome};
use untangle_core::{
    assemble_h_plus, build_instance, corner_m_indefinite, corner_m_plus, generate_fixture, total_energy, untangle, EnergyParams, EpsRule,
    FixtureSpec, Instance, Scheme, SmallMat, SolverConfig, TargetShapePolicy,
};

const GRADIENT_REL_TOL: f64 = 1e-6;
const GRADIENT_TIME: Duration = Duration::from_secs(10);
const HESSIAN_REL_TOL: f64 = 1e-5;
const HESSIAN_TIME: Duration = Duration::from_secs(10);
const PSD_REL_TOL: f64 = 1e-10;
const PSD_TIME: Duration = Duration::from_secs(10);
const SUFFICIENT_REL_SLACK: f64 = 1e-14;
const POINT_SWAP_TIME: Duration = Duration::from_secs(60);
const CAVITY_TIME: Duration = Duration::from_secs(300);
const NON_GROWTH_REL_SLACK: f64 = 1e-14;
const SIGMA_FLOOR: f64 = 0.1;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn fixture(spec: &str) -> (FixtureSpec, Instance) {
    let spec: FixtureSpec = spec.parse().unwrap();
    let inst = build_instance(generate_fixture(&spec).unwrap(), spec.default_policy()).unwrap();
    (spec, inst)
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let mut g = rng(1001);
    let meshes = small_meshes();
    let combos: Vec<(f64, f64)> = [1.0, 1e-3].iter().flat_map(|&e| [0.0, 1.0, 1e4].map(|l| (e, l))).collect();
    let mut worst = 0.0f64;
    let mut states = 0;
    for dim in [2, 3] {
        let pool: Vec<&Instance> = meshes.iter().filter(|m| m.dim() == dim).collect();
        for s in 0..100 {
            let inst = pool[s % pool.len()];
            let (eps, lambda) = combos[s % combos.len()];
            let p = EnergyParams { lambda, eps };
            let amplitude = g.gen_range(0.05..0.6);
            let u = perturbed(&inst.mesh.rest, amplitude, &mut g);
            let (_, an) = energy_and_gradient(&u, inst, &p);
            let mut f = |x: &[f64]| total_energy(x, inst, &p);
            let h = 1e-4 * eps.min(1.0);
            let fd: Vec<f64> = (0..u.len()).map(|i| fd_partial(&mut f, &u, i, h)).collect();
            worst = worst.max(rel_err(&an, &fd));
            states += 1;
        }
    }
    let t = start.elapsed();
    Verdict::new(
        worst <= GRADIENT_REL_TOL && t <= GRADIENT_TIME,
        format!("{states} states, worst rel err {worst:.2e} (tol {GRADIENT_REL_TOL:e}), {:.2}s", t.as_secs_f64()),
    )
}

/// Second derivatives of φ in `a` from φ values alone: four-point stencil,
/// Richardson-extrapolated over h and h/2.
fn fd_hessian_of_phi(j: &SmallMat, p: &EnergyParams, h: f64) -> Vec<f64> {
    let d = j.dim();
    let n = d * d;
    let a = j.flatten_cols();
    let phi = |x: &[f64]| evaluate_jacobian(&SmallMat::from_flat_cols(d, x), p).phi;
    let stencil = |h: f64| {
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let at = |sr: f64, sc: f64| {
                    let mut x = a;
                    x[r] += sr * h;
                    x[c] += sc * h;
                    phi(&x[..n])
                };
                out[r * n + c] = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
            }
        }
        out
    };
    let coarse = stencil(h);
    let fine = stencil(h / 2.0);
    fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
}

fn hessian_decomposition() -> Verdict {
    let start = Instant::now();
    let mut g = rng(2002);
    let mut worst = 0.0f64;
    let mut negative = 0;
    let mut samples = 0;
    for dim in [2, 3] {
        for s in 0..50 {
            let mut j = random_jacobian(dim, &mut g);
            // every other sample is inverted
            if (s % 2 == 1) != (j.det() < 0.0) {
                for r in 0..dim {
                    j[(r, 0)] = -j[(r, 0)];
                }
            }
            negative += (j.det() < 0.0) as usize;
            let p = EnergyParams { lambda: [0.0, 1.0, 1e4][s % 3], eps: [1.0, 0.1][s % 2] };
            let e = evaluate_jacobian(&j, &p);
            let plus = corner_m_plus(&e, &p).m_plus;
            let sum: Vec<f64> = plus.iter().zip(corner_m_indefinite(&e, &p)).map(|(x, y)| x + y).collect();
            let fd = fd_hessian_of_phi(&j, &p, 2e-3 * p.eps);
            worst = worst.max(rel_err(&sum, &fd));
            samples += 1;
        }
    }
    let t = start.elapsed();
    Verdict::new(
        worst <= HESSIAN_REL_TOL && t <= HESSIAN_TIME,
        format!("{samples} Jacobians ({negative} with det J < 0), worst rel err {worst:.2e} (tol {HESSIAN_REL_TOL:e}), {:.2}s", t.as_secs_f64()),
    )
}

fn positive_definiteness() -> Verdict {
    let start = Instant::now();
    let mut g = rng(3003);
    let mut worst = f64::INFINITY;
    for s in 0..200 {
        let dim = 2 + s % 2;
        let j = random_jacobian(dim, &mut g);
        let p = EnergyParams { lambda: [0.0, 1.0, 1e4][s % 3], eps: 10f64.powf(g.gen_range(-8.0..0.5)) };
        let m = corner_m_plus(&evaluate_jacobian(&j, &p), &p).m_plus;
        let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (lo, _) = sym_min_max_eig(&m, dim * dim);
        worst = worst.min(lo / norm);
    }
    let mut quadratic_ok = true;
    let mut forms = 0;
    for spec in ["point_swap_square:8", "cavity_cube:6:45", "stretched_bar"] {
        let (_, inst) = fixture(spec);
        if inst.mesh.num_locked() < inst.dim() {
            continue;
        }
        let h = assemble_h_plus(&inst.mesh.initial_map, &inst, &EnergyParams { lambda: 1.0, eps: 1e-2 });
        let mut y = vec![0.0; h.size()];
        for _ in 0..100 {
            let x: Vec<f64> = (0..h.size()).map(|_| g.gen_range(-1.0..1.0)).collect();
            h.matvec(&x, &mut y);
            let q: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            quadratic_ok &= q > 0.0;
            forms += 1;
        }
    }
    let t = start.elapsed();
    Verdict::new(
        worst >= -PSD_REL_TOL && quadratic_ok && t <= PSD_TIME,
        format!(
            "200 samples, min eig / |M+| = {worst:.2e} (tol -{PSD_REL_TOL:e}); xᵀH⁺x > 0 on {forms} random x: {quadratic_ok}; {:.2}s",
            t.as_secs_f64()
        ),
    )
}

/// Every fixture under the theory rule, with each scheme.
fn theory_runs() -> Vec<(String, Outcome)> {
    let mut out = Vec::new();
    for spec in ["point_swap_square:8", "triangle_fan_12", "cavity_cube:8:45", "stretched_bar"] {
        let (spec, inst) = fixture(spec);
        for scheme in [Scheme::QuasiNewton, Scheme::Newton, Scheme::Auto] {
            let run = untangle(&inst, &SolverConfig { scheme, eps_rule: EpsRule::Theory, ..Default::default() }).unwrap();
            out.push((format!("{spec}/{scheme}"), run));
        }
    }
    out
}

fn eps_rule_conformance(runs: &[(String, Outcome)]) -> Verdict {
    let hand = update_epsilon_theory(4.0, -3.0, 0.1);
    let second = update_epsilon_theory(1.0, 0.2, 0.1);
    let mut checked = 0;
    let mut violations = Vec::new();
    for (name, run) in runs {
        for r in &run.trace.records {
            checked += 1;
            if !r.sufficient_condition_holds(SUFFICIENT_REL_SLACK) {
                violations.push(format!("{name}#{}", r.iteration));
            }
        }
    }
    Verdict::new(
        hand == 3.75 && second == 0.9 && violations.is_empty() && checked > 0,
        format!("hand values {hand}, {second}; sufficient condition on {checked} traced iterations, violations {violations:?}"),
    )
}

fn point_swap() -> Verdict {
    let (_, inst) = fixture("point_swap_square:8");
    let mut parts = Vec::new();
    let mut pass = true;
    for scheme in [Scheme::QuasiNewton, Scheme::Newton] {
        for eps_rule in [EpsRule::Heuristic, EpsRule::Theory] {
            let start = Instant::now();
            let run = single_threaded(|| untangle(&inst, &SolverConfig { scheme, eps_rule, ..Default::default() }).unwrap());
            let t = start.elapsed();
            let ok = run.report.min_det > 0.0 && t <= POINT_SWAP_TIME;
            pass &= ok;
            parts.push(format!("{scheme}/{eps_rule}: D- {:.3e} in {:.2}s", run.report.min_det, t.as_secs_f64()));
        }
    }
    Verdict::new(pass, parts.join("; "))
}

fn fan() -> Verdict {
    let (_, inst) = fixture("triangle_fan_12");
    let start_min = untangle_core::solver::min_det(&inst.mesh.initial_map, &inst);
    let run = untangle(&inst, &SolverConfig::default()).unwrap();
    let f = total_energy(&run.state.u, &inst, &EnergyParams { lambda: 1.0, eps: 1e-9 });
    Verdict::new(
        run.converged && run.report.min_det > 0.0 && f.is_finite(),
        format!("D- {start_min:.3} -> {:.3e} after {} outer iterations, F(eps = 1e-9) = {f:.4e}", run.report.min_det, run.trace.len()),
    )
}

fn cavity_stress(runs: &[(String, Outcome)]) -> Verdict {
    let (_, inst) = fixture("cavity_cube:8:45");
    let start = Instant::now();
    let run = untangle(&inst, &SolverConfig { scheme: Scheme::Auto, ..Default::default() }).unwrap();
    let t = start.elapsed();
    let mut checked = 0;
    let mut violations = Vec::new();
    for (name, r) in runs {
        for rec in &r.trace.records {
            if rec.descent_certified(SIGMA_FLOOR) {
                checked += 1;
                if !rec.non_growth_holds(NON_GROWTH_REL_SLACK) {
                    violations.push(format!("{name}#{}", rec.iteration));
                }
            }
        }
    }
    Verdict::new(
        run.report.min_det > 0.0 && t <= CAVITY_TIME && violations.is_empty() && checked > 0,
        format!(
            "auto: D- {:.3e} in {:.2}s ({} corners); non-growth on {checked} certified iterations, violations {violations:?}",
            run.report.min_det,
            t.as_secs_f64(),
            inst.corners.len()
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn lambda_semantics() -> Verdict {
    let (_, inst) = fixture("stretched_bar");
    let measure = |lambda: f64| {
        let run = untangle(&inst, &SolverConfig { lambda, ..Default::default() }).unwrap();
        let q = &run.report;
        (
            median(q.per_corner_stretch.iter().map(|s| s - 1.0).collect()),
            median(q.per_corner_det.iter().map(|d| (d - 1.0).abs()).collect()),
            run.success,
        )
    };
    let (s0, d0, ok0) = measure(0.0);
    let (s4, d4, ok4) = measure(1e4);
    Verdict::new(
        ok0 && ok4 && s0 < s4 && d4 < d0,
        format!("median stretch-1: {s0:.3e} (lambda 0) vs {s4:.3e} (lambda 1e4); median |det-1|: {d0:.3e} vs {d4:.3e}"),
    )
}

fn determinism() -> Verdict {
    const THREADS: usize = 4;
    let dir = tempfile::tempdir().unwrap();
    let (_, inst) = fixture("cavity_cube:6:45");
    let pool = rayon::ThreadPoolBuilder::new().num_threads(THREADS).build().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let config = RunConfig {
            rest: "rest.mesh".into(),
            init: "init.mesh".into(),
            locks: None,
            out: dir.path().join(format!("out{k}.mesh")),
            report: dir.path().join(format!("report{k}.json")),
            lambda: 1.0,
            scheme: Scheme::Newton,
            eps_rule: EpsRule::Heuristic,
            targets: TargetShapePolicy::Rest,
            max_outer: 1000,
            threads: Some(THREADS),
        };
        let run = pool.install(|| untangle(&inst, &config.solver_config()).unwrap());
        write_outputs(&run, &inst, &config).unwrap();
        outputs.push((fs::read(&config.out).unwrap(), run.trace));
    }
    let same_mesh = outputs[0].0 == outputs[1].0;
    let same_trace = outputs[0].1.same_numbers(&outputs[1].1);
    Verdict::new(
        same_mesh && same_trace,
        format!(
            "{THREADS} threads: output meshes identical {same_mesh}, traces identical {same_trace} ({} iterations)",
            outputs[0].1.len()
        ),
    )
}

fn main() -> ExitCode {
    let runs = theory_runs();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("gradient correctness", Box::new(gradient_correctness)),
        ("hessian decomposition", Box::new(hessian_decomposition)),
        ("positive definiteness", Box::new(positive_definiteness)),
        ("eps-rule conformance", Box::new(|| eps_rule_conformance(&runs))),
        ("point-swap untangling", Box::new(point_swap)),
        ("fan behavior", Box::new(fan)),
        ("cavity stress test", Box::new(|| cavity_stress(&runs))),
        ("lambda semantics", Box::new(lambda_semantics)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let v = check();
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += !v.pass as usize;
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
