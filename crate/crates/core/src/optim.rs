//! Damped Gauss-Newton for penalized nonlinear least squares, shared by the
//! database alignment and the transformed gappy fit.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Levenberg damping schedule and stopping rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussNewtonConfig {
    pub lambda0: f64,
    /// Damping multiplier after a rejected step.
    pub increase: f64,
    /// Damping divisor after an accepted step.
    pub decrease: f64,
    pub max_lambda: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
}

impl Default for GaussNewtonConfig {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            increase: 10.0,
            decrease: 10.0,
            max_lambda: 1e12,
            max_iterations: 100,
            rel_tol: 1e-8,
        }
    }
}

/// Cost, gradient and Gauss-Newton Hessian `J^T J` (plus penalty) at a point.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub cost: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

pub trait LeastSquaresProblem: Sync {
    fn n_params(&self) -> usize;

    /// Objective only. Returning [`Error::DomainEscape`] marks the point as
    /// infeasible; the solver then rejects the step and raises damping.
    fn cost(&self, x: &DVector<f64>) -> Result<f64>;

    fn linearize(&self, x: &DVector<f64>) -> Result<Linearization>;
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: DVector<f64>,
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
    /// Cost after each accepted step, starting with the initial cost.
    pub history: Vec<f64>,
}

pub fn minimize<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x0: DVector<f64>,
    cfg: &GaussNewtonConfig,
) -> Result<Solution> {
    let mut x = x0;
    let mut lin = problem.linearize(&x)?;
    let initial_cost = lin.cost;
    let mut history = vec![lin.cost];
    let mut lambda = cfg.lambda0;
    let mut accepted = 0;
    let mut iterations = 0;

    'outer: while iterations < cfg.max_iterations {
        iterations += 1;
        if lin.gradient.amax() == 0.0 {
            break;
        }
        let scale = lin.hessian.diagonal().amax().max(f64::MIN_POSITIVE);
        loop {
            let mut damped = lin.hessian.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += lambda * lin.hessian[(i, i)].max(1e-12 * scale);
            }
            let step = match Cholesky::new(damped) {
                Some(c) => -c.solve(&lin.gradient),
                None => {
                    lambda *= cfg.increase;
                    if lambda > cfg.max_lambda {
                        break 'outer;
                    }
                    continue;
                }
            };
            let trial = &x + &step;
            let outcome = match problem.cost(&trial) {
                Ok(c) if c.is_finite() && c < lin.cost => Some(c),
                Ok(_) | Err(Error::DomainEscape { .. }) => None,
                Err(e) => return Err(e),
            };
            match outcome {
                Some(_) => {
                    let previous = lin.cost;
                    x = trial;
                    lin = problem.linearize(&x)?;
                    history.push(lin.cost);
                    accepted += 1;
                    lambda = (lambda / cfg.decrease).max(1e-15);
                    if previous - lin.cost < cfg.rel_tol * previous {
                        break 'outer;
                    }
                    break;
                }
                None => {
                    lambda *= cfg.increase;
                    if lambda > cfg.max_lambda {
                        if accepted == 0 && predicted_gain(&lin) > 1e-10 * lin.cost.max(1e-300) {
                            return Err(Error::NoDescent { cost: lin.cost });
                        }
                        break 'outer;
                    }
                }
            }
        }
    }

    Ok(Solution {
        x,
        cost: lin.cost,
        initial_cost,
        iterations,
        accepted_steps: accepted,
        history,
    })
}

/// Decrease predicted by the undamped quadratic model.
fn predicted_gain(lin: &Linearization) -> f64 {
    let n = lin.hessian.nrows();
    let mut h = lin.hessian.clone();
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        h[(i, i)] += 1e-12 * scale;
    }
    match Cholesky::new(h) {
        Some(c) => 0.5 * lin.gradient.dot(&c.solve(&lin.gradient)),
        None => f64::INFINITY,
    }
}

/// Central-difference gradient of a scalar function, used by tests to check
/// analytic linearizations.
pub fn finite_difference_gradient(
    f: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
    step: f64,
) -> DVector<f64> {
    let mut probe = x.clone();
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let h = step * (1.0 + x[i].abs());
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        }),
    )
}
