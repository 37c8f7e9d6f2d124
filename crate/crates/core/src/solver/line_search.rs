//! One-dimensional searches along a descent direction.

/// Golden-section ratio `(sqrt 5 - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accepted {
    pub tau: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Approximate `argmin_{τ ∈ [0, τ_max]} φ(τ)`: bracket, refine by golden
/// section, then make sure the Armijo condition holds (backtracking from the
/// refined point if it does not).
///
/// `slope` is `φ'(0)` and must be negative. Returns `None` when no step with
/// sufficient decrease is found.
pub fn golden_armijo<F>(mut phi: F, f0: f64, slope: f64, tau_init: f64, tau_max: f64, c1: f64) -> Option<Accepted>
where
    F: FnMut(f64) -> f64,
{
    if !(slope < 0.0) || !f0.is_finite() {
        return None;
    }
    let mut evals = 0usize;
    let mut eval = |t: f64, evals: &mut usize| {
        *evals += 1;
        let v = phi(t);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let armijo = |t: f64, v: f64| v <= f0 + c1 * t * slope;

    let mut best = (0.0, f0);
    let (mut lo, mut hi);
    let mut t = tau_init.min(tau_max);
    let mut ft = eval(t, &mut evals);
    if ft < f0 {
        best = (t, ft);
        lo = 0.0;
        loop {
            let t2 = (2.0 * t).min(tau_max);
            if t2 <= t {
                hi = t;
                break;
            }
            let f2 = eval(t2, &mut evals);
            if f2 < ft {
                best = (t2, f2);
                lo = t;
                t = t2;
                ft = f2;
            } else {
                hi = t2;
                break;
            }
        }
    } else {
        let mut found = false;
        hi = t;
        for _ in 0..64 {
            t *= 0.5;
            ft = eval(t, &mut evals);
            if ft < f0 {
                best = (t, ft);
                found = true;
                break;
            }
            hi = t;
        }
        if !found {
            return None;
        }
        lo = 0.0;
    }

    // golden section on [lo, hi]
    if hi > lo {
        let (mut a, mut b) = (lo, hi);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = eval(c, &mut evals);
        let mut fd = eval(d, &mut evals);
        for _ in 0..60 {
            if fc < best.1 {
                best = (c, fc);
            }
            if fd < best.1 {
                best = (d, fd);
            }
            if (b - a) <= 1e-4 * b {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = eval(c, &mut evals);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = eval(d, &mut evals);
            }
        }
    }

    if armijo(best.0, best.1) {
        return Some(Accepted { tau: best.0, value: best.1, evaluations: evals });
    }
    let mut t = best.0;
    for _ in 0..64 {
        t *= 0.5;
        let v = eval(t, &mut evals);
        if armijo(t, v) {
            return Some(Accepted { tau: t, value: v, evaluations: evals });
        }
    }
    None
}

/// A trial point of the strong-Wolfe search.
#[derive(Clone, Debug)]
pub struct Trial {
    pub alpha: f64,
    pub value: f64,
    pub slope: f64,
    pub grad: Vec<f64>,
}

/// Strong-Wolfe line search (bracketing and zoom with safeguarded cubic
/// interpolation). `eval(α)` returns the value and the full gradient at
/// `x + α p`; `dir_slope(g)` returns `gᵀp`.
pub fn strong_wolfe<E, S>(mut eval: E, dir_slope: S, f0: f64, d0: f64, alpha_init: f64, c1: f64, c2: f64) -> (Option<Trial>, usize)
where
    E: FnMut(f64) -> (f64, Vec<f64>),
    S: Fn(&[f64]) -> f64,
{
    let mut evals = 0usize;
    let mut trial = |alpha: f64, evals: &mut usize| {
        *evals += 1;
        let (mut value, grad) = eval(alpha);
        let mut slope = dir_slope(&grad);
        if !value.is_finite() || !slope.is_finite() {
            value = f64::INFINITY;
            slope = f64::NAN;
        }
        Trial { alpha, value, slope, grad }
    };
    let start = Trial { alpha: 0.0, value: f0, slope: d0, grad: Vec::new() };
    let sufficient = |t: &Trial| t.value <= f0 + c1 * t.alpha * d0;
    let curvature = |t: &Trial| t.slope.abs() <= -c2 * d0;

    let mut prev = start;
    let mut alpha = alpha_init;
    for i in 0..40 {
        let cur = trial(alpha, &mut evals);
        if !sufficient(&cur) || (i > 0 && cur.value >= prev.value) {
            return (zoom(&mut trial, prev, cur, f0, d0, c1, c2, &mut evals), evals);
        }
        if curvature(&cur) {
            return (Some(cur), evals);
        }
        if cur.slope >= 0.0 {
            return (zoom(&mut trial, cur, prev, f0, d0, c1, c2, &mut evals), evals);
        }
        prev = cur;
        alpha *= 2.0;
    }
    (if sufficient(&prev) && prev.alpha > 0.0 { Some(prev) } else { None }, evals)
}

#[allow(clippy::too_many_arguments)]
fn zoom<T>(trial: &mut T, mut lo: Trial, mut hi: Trial, f0: f64, d0: f64, c1: f64, c2: f64, evals: &mut usize) -> Option<Trial>
where
    T: FnMut(f64, &mut usize) -> Trial,
{
    for _ in 0..60 {
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= 1e-16 * b.max(1e-300) {
            break;
        }
        let mut alpha = cubic_min(&lo, &hi).unwrap_or(0.5 * (lo.alpha + hi.alpha));
        if !(alpha > a + 0.1 * width && alpha < b - 0.1 * width) {
            alpha = 0.5 * (lo.alpha + hi.alpha);
        }
        let cur = trial(alpha, evals);
        if cur.value > f0 + c1 * alpha * d0 || cur.value >= lo.value {
            hi = cur;
        } else {
            if cur.slope.abs() <= -c2 * d0 {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // fall back to the best point with sufficient decrease
    if lo.alpha > 0.0 && lo.value <= f0 + c1 * lo.alpha * d0 {
        Some(lo)
    } else {
        None
    }
}

fn cubic_min(p: &Trial, q: &Trial) -> Option<f64> {
    if !(p.value.is_finite() && q.value.is_finite() && p.slope.is_finite() && q.slope.is_finite()) {
        return None;
    }
    let d1 = p.slope + q.slope - 3.0 * (p.value - q.value) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let denom = q.slope - p.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let phi = |t: f64| (t - 0.3).powi(2);
        let r = golden_armijo(phi, 0.09, -0.6, 1.0, 8.0, 1e-4).unwrap();
        assert!((r.tau - 0.3).abs() < 1e-4);
    }

    #[test]
    fn golden_expands_bracket() {
        let phi = |t: f64| (t - 5.0).powi(2);
        let r = golden_armijo(phi, 25.0, -10.0, 1.0, 8.0, 1e-4).unwrap();
        assert!((r.tau - 5.0).abs() < 1e-3);
    }

    #[test]
    fn golden_rejects_ascent() {
        assert!(golden_armijo(|t| t, 0.0, 1.0, 1.0, 8.0, 1e-4).is_none());
    }

    #[test]
    fn strong_wolfe_on_quadratic() {
        // f(x) = (x - 2)², from x = 0 along p = 1
        let eval = |a: f64| ((a - 2.0).powi(2), vec![2.0 * (a - 2.0)]);
        let (t, _) = strong_wolfe(eval, |g| g[0], 4.0, -4.0, 1.0, 1e-4, 0.9);
        let t = t.unwrap();
        assert!(t.value <= 4.0 + 1e-4 * t.alpha * -4.0);
        assert!(t.slope.abs() <= 0.9 * 4.0);
    }
}
