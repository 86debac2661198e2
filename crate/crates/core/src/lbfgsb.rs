//! Box-constrained limited-memory BFGS.
//!
//! Projected variant: the quasi-Newton direction is computed on the free
//! variables (those not pinned at a bound by the gradient), and the line
//! search backtracks along the projected path `P(x + a d)` until the Armijo
//! condition holds.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct LbfgsbConfig {
    pub memory: usize,
    pub max_iterations: usize,
    pub max_line_search: usize,
    /// Stop when the projected gradient's max-norm falls below this.
    pub pg_tolerance: f64,
    /// Stop when the relative decrease of the objective falls below this.
    pub f_tolerance: f64,
}

impl Default for LbfgsbConfig {
    fn default() -> Self {
        Self { memory: 10, max_iterations: 50, max_line_search: 20, pg_tolerance: 1e-6, f_tolerance: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsbResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient with components zeroed where the bound is active and the
/// gradient points outward.
fn free_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// Minimize `objective` (value and gradient) over the box `[lower, upper]`.
///
/// Non-finite objective values are treated as line-search failures.
pub fn minimize<F>(
    mut objective: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    config: &LbfgsbConfig,
) -> LbfgsbResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut f, mut g) = objective(&x);
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut converged = false;
    let mut iterations = 0;

    if !f.is_finite() {
        return LbfgsbResult { x, f, iterations, evaluations, converged };
    }

    while iterations < config.max_iterations {
        let pg = free_gradient(&x, &g, lower, upper);
        if pg.iter().all(|v| v.abs() < config.pg_tolerance) {
            converged = true;
            break;
        }
        iterations += 1;

        // Two-loop recursion on the free gradient.
        let mut d = pg.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        for (di, &pgi) in d.iter_mut().zip(&pg) {
            *di = if pgi == 0.0 { 0.0 } else { -*di };
        }
        if dot(&d, &pg) >= 0.0 {
            history.clear();
            d = pg.iter().map(|v| -v).collect();
        }

        let mut step = if history.is_empty() {
            let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (1.0f64).min(1.0 / dmax.max(1e-300))
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..config.max_line_search {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial, lower, upper);
            let (ft, gt) = objective(&trial);
            evaluations += 1;
            let decrease: f64 = g.iter().zip(trial.iter().zip(&x)).map(|(gi, (t, xi))| gi * (t - xi)).sum();
            if ft.is_finite() && ft <= f + 1e-4 * decrease {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            if history.is_empty() {
                break;
            }
            // Retry from steepest descent with a fresh memory.
            history.clear();
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let rel = (f - f_new) / f.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        f = f_new;
        g = g_new;
        if rel <= config.f_tolerance {
            converged = true;
            break;
        }
    }
    LbfgsbResult { x, f, iterations, evaluations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        (f, g)
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let cfg = LbfgsbConfig { max_iterations: 500, ..Default::default() };
        let r = minimize(rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &cfg);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn active_bound() {
        // min (x - 3)^2 + (y + 1)^2 over [0, 2] x [0, 2] -> (2, 0)
        let f = |x: &[f64]| {
            ((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)])
        };
        let r = minimize(f, &[1.0, 1.0], &[0.0, 0.0], &[2.0, 2.0], &LbfgsbConfig::default());
        assert!((r.x[0] - 2.0).abs() < 1e-9 && r.x[1].abs() < 1e-9, "{:?}", r);
        assert!(r.converged);
    }

    #[test]
    fn never_increases_objective() {
        let quartic = |x: &[f64]| {
            let f: f64 = x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v.powi(4) - v).sum();
            let g = x.iter().enumerate().map(|(i, v)| 4.0 * (i as f64 + 1.0) * v.powi(3) - 1.0).collect();
            (f, g)
        };
        let x0 = [0.9, -0.7, 0.3, 0.1];
        let f0 = quartic(&x0).0;
        let r = minimize(quartic, &x0, &[-1.0; 4], &[1.0; 4], &LbfgsbConfig::default());
        assert!(r.f <= f0);
    }

    #[test]
    fn non_finite_start_returns_immediately() {
        let r = minimize(|_| (f64::NAN, vec![0.0]), &[0.0], &[-1.0], &[1.0], &LbfgsbConfig::default());
        assert_eq!(r.iterations, 0);
    }
}
