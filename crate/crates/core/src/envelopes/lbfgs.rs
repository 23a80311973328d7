//! Limited-memory BFGS with Armijo backtracking for objectives that may be
//! `+∞`. An infinite trial value is treated as a failed step.

use std::collections::VecDeque;

pub(crate) struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once `max |∇E| ≤ gradient_tol`.
    pub gradient_tol: f64,
}

pub(crate) struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `objective(x, grad)` returns `E(x)` and fills `grad`; it returns
/// `f64::INFINITY` where `E` is infinite, leaving `grad` unspecified.
pub(crate) fn minimize<F>(mut objective: F, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut value = objective(&x, &mut g);
    if !value.is_finite() || n == 0 {
        return LbfgsOutcome { x, iterations: 0 };
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut iterations = 0;
    let mut stalls = 0;

    while iterations < opts.max_iters {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax <= opts.gradient_tol {
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            for di in &mut d {
                *di *= gamma;
            }
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            slope = dot(&g, &d);
        }

        let mut step = if history.is_empty() {
            (1.0 / gmax).min(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        for _ in 0..50 {
            for i in 0..n {
                trial[i] = x[i] + step * d[i];
            }
            let v = objective(&trial, &mut g_trial);
            if v.is_finite() && v <= value + 1e-4 * step * slope {
                let s: Vec<f64> = (0..n).map(|i| trial[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| g_trial[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                    if history.len() == opts.memory {
                        history.pop_front();
                    }
                    history.push_back((s, y, 1.0 / sy));
                }
                let decrease = value - v;
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut g, &mut g_trial);
                if decrease <= 1e-15 * value.abs().max(1e-300) {
                    stalls += 1;
                } else {
                    stalls = 0;
                }
                value = v;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        }
        if stalls >= 5 {
            break;
        }
    }
    LbfgsOutcome { x, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let opts = LbfgsOptions {
            memory: 8,
            max_iters: 500,
            gradient_tol: 1e-10,
        };
        let r = minimize(f, vec![-1.2, 1.0], &opts);
        let value = f(&r.x, &mut [0.0; 2]);
        assert!(value < 1e-16, "{value}");
        assert!((r.x[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn barrier_is_never_crossed() {
        // E = 1/x + x on x > 0, +∞ otherwise; start far right
        let f = |x: &[f64], g: &mut [f64]| {
            if x[0] <= 0.0 {
                return f64::INFINITY;
            }
            g[0] = 1.0 - 1.0 / (x[0] * x[0]);
            1.0 / x[0] + x[0]
        };
        let opts = LbfgsOptions {
            memory: 4,
            max_iters: 100,
            gradient_tol: 1e-12,
        };
        let r = minimize(f, vec![50.0], &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }
}
