//! Quasi-Newton minimizer used by the maximum-likelihood reconstruction.

use nalgebra::{DMatrix, DVector};

#[derive(Copy, Clone, Debug)]
pub struct BfgsOptions {
    pub gradient_tol: f64,
    pub max_iterations: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            gradient_tol: 1e-8,
            max_iterations: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

/// Minimizes `f`, which returns the value and gradient. Steps are accepted only
/// under the Armijo condition, so the objective never increases. The inverse
/// Hessian is reset to the identity whenever the line search stalls; two
/// consecutive stalls end the run.
pub fn minimize<F>(mut f: F, x0: DVector<f64>, opts: BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut trace = vec![fx];
    let mut stalls = 0;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if g.norm() < opts.gradient_tol {
            break;
        }
        iterations += 1;
        let mut dir = -(&h * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            h = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = -g.norm_squared();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }

        let Some((xn, fnew, gn)) = accepted else {
            stalls += 1;
            if stalls >= 2 {
                break;
            }
            h = DMatrix::identity(n, n);
            continue;
        };
        if fnew == fx {
            stalls += 1;
        } else {
            stalls = 0;
        }

        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ, expanded
            h += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        x = xn;
        fx = fnew;
        g = gn;
        trace.push(fx);
        if stalls >= 2 {
            break;
        }
    }

    let gradient_norm = g.norm();
    BfgsOutcome {
        x,
        value: fx,
        gradient_norm,
        iterations,
        converged: gradient_norm < opts.gradient_tol,
        trace,
    }
}
