//! Box-constrained damped Newton ascent for smooth concave objectives.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Hessian of the objective (negative semidefinite for concave problems).
    pub hessian: DMatrix<f64>,
}

pub(crate) struct NewtonResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub capped: Vec<usize>,
}

pub(crate) struct NewtonOptions {
    pub bound: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            bound: super::COEFFICIENT_CAP,
            tolerance: super::GRADIENT_TOLERANCE,
            max_iterations: 500,
            max_halvings: 200,
        }
    }
}

fn pinned(x: f64, g: f64, bound: f64) -> bool {
    (x >= bound && g > 0.0) || (x <= -bound && g < 0.0)
}

/// Maximizes over `[-bound, bound]^d` starting at `x0`. Coordinates pinned at
/// the bound with the gradient pointing outward are held fixed; the rest take
/// a damped Newton step followed by projection and Armijo backtracking.
pub(crate) fn maximize(
    x0: Vec<f64>,
    eval: impl Fn(&[f64]) -> Evaluation,
    value: impl Fn(&[f64]) -> f64,
    opts: &NewtonOptions,
) -> Result<NewtonResult> {
    let mut x = x0;
    let mut ev = eval(&x);
    for iter in 0..opts.max_iterations {
        let free: Vec<usize> = (0..x.len()).filter(|&i| !pinned(x[i], ev.gradient[i], opts.bound)).collect();
        let gnorm = free.iter().map(|&i| ev.gradient[i].abs()).fold(0.0, f64::max);
        if gnorm < opts.tolerance || free.is_empty() {
            let capped = (0..x.len()).filter(|&i| x[i].abs() >= opts.bound).collect();
            return Ok(NewtonResult { x, value: ev.value, gradient_norm: gnorm, iterations: iter, capped });
        }
        let step = newton_direction(&ev, &free);
        let slope: f64 = free.iter().zip(&step).map(|(&i, d)| ev.gradient[i] * d).sum();
        let slack = 1e-12 * (1.0 + ev.value.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_halvings {
            let mut trial = x.clone();
            for (&i, d) in free.iter().zip(&step) {
                trial[i] = (x[i] + t * d).clamp(-opts.bound, opts.bound);
            }
            let f = value(&trial);
            if f.is_finite() && f >= ev.value + 1e-4 * t * slope.max(0.0) - slack {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => {
                x = next;
                ev = eval(&x);
                if !ev.value.is_finite() {
                    return Err(Error::NonConvergence("objective became non-finite".into()));
                }
            }
            None => {
                return Err(Error::NonConvergence(format!(
                    "line search failed after {} step halvings (gradient norm {gnorm:.3e})",
                    opts.max_halvings
                )))
            }
        }
    }
    Err(Error::NonConvergence(format!("no convergence within {} Newton iterations", opts.max_iterations)))
}

/// Solves `(-H_FF + mu I) d = g_F`, raising `mu` until the matrix factors.
fn newton_direction(ev: &Evaluation, free: &[usize]) -> Vec<f64> {
    let m = free.len();
    let neg_h = DMatrix::from_fn(m, m, |r, c| -ev.hessian[(free[r], free[c])]);
    let g = DVector::from_iterator(m, free.iter().map(|&i| ev.gradient[i]));
    let scale = (0..m).map(|r| neg_h[(r, r)].abs()).fold(0.0, f64::max).max(1e-12);
    let mut mu = 1e-10 * scale;
    loop {
        let mut a = neg_h.clone();
        for r in 0..m {
            a[(r, r)] += mu;
        }
        if let Some(chol) = a.cholesky() {
            return chol.solve(&g).iter().copied().collect();
        }
        mu *= 10.0;
        if mu > 1e12 * scale {
            // gradient ascent as a last resort
            return g.iter().map(|v| v / scale).collect();
        }
    }
}
