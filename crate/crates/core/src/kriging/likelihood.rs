//! Maximum-likelihood estimation of the correlation hyperparameters.
//!
//! The regression coefficients and process variance are profiled out in
//! closed form, leaving a function of `theta` alone. The search runs in
//! `log(theta)` coordinates: a handful of starts on a fixed log-grid, each
//! refined by a derivative-free compass search.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::correlation::{CorrelationConfig, CorrelationFamily};
use super::regression::RegressionBasis;
use super::system::AugmentedSystem;
use crate::domain::{Domain, SampleSet};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Per-axis box for `theta`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ThetaBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidInput("theta bounds shape mismatch".into()));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(lo, hi)| !(*lo > 0.0 && lo <= hi && hi.is_finite()))
        {
            return Err(Error::InvalidInput("theta bounds must satisfy 0 < lo <= hi".into()));
        }
        Ok(Self { lower, upper })
    }

    /// `[1e-2 / L^p, 1e2 / L^p]` per axis, `L` the edge length and `p` the
    /// exponent `theta` multiplies in `family`.
    pub fn default_for(domain: &Domain, family: CorrelationFamily) -> Self {
        let p = family.length_power();
        let (lo_c, hi_c) = match family {
            CorrelationFamily::CubicSpline => (0.5, 50.0),
            _ => (1e-2, 1e2),
        };
        let lower = domain.edges().iter().map(|l| lo_c / l.powf(p)).collect();
        let upper = domain.edges().iter().map(|l| hi_c / l.powf(p)).collect();
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(t, (lo, hi))| *t >= lo * (1.0 - 1e-12) && *t <= hi * (1.0 + 1e-12))
    }
}

/// Options for the multistart search.
#[derive(Clone, Debug)]
pub struct MleOptions {
    /// Positions of the starts along the diagonal of the log-box, in `(0, 1)`.
    pub starts: Vec<f64>,
    /// Stop when no probe improves the objective by this relative amount
    /// and the step has shrunk below `min_step`.
    pub rel_tol: f64,
    pub min_step: f64,
    pub max_evals: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            starts: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            rel_tol: 1e-6,
            min_step: 1e-3,
            max_evals: 4000,
        }
    }
}

/// Profiled negative log-likelihood at `corr`, constant terms included:
/// `n/2 (ln 2 pi + 1) + n/2 ln sigma^2 + 1/2 ln det R`.
pub(crate) fn profiled_nll(
    points: &[Vec<f64>],
    values: &[f64],
    trend: &DMatrix<f64>,
    corr: &CorrelationConfig,
) -> Result<f64> {
    let sys = AugmentedSystem::assemble(points, values, trend.clone(), corr)?;
    Ok(nll_from_system(&sys))
}

fn nll_from_system(sys: &AugmentedSystem) -> f64 {
    let n = sys.n() as f64;
    let sigma2 = sys.sigma2().max(f64::MIN_POSITIVE);
    0.5 * n * (LN_2PI + 1.0) + 0.5 * n * sigma2.ln() + 0.5 * sys.log_det_r()
}

/// Negative log of the full likelihood for arbitrary `beta` and `sigma2`.
pub(crate) fn full_nll(
    points: &[Vec<f64>],
    values: &[f64],
    trend: &DMatrix<f64>,
    corr: &CorrelationConfig,
    beta: &DVector<f64>,
    sigma2: f64,
) -> Result<f64> {
    let sys = AugmentedSystem::assemble(points, values, trend.clone(), corr)?;
    let n = values.len() as f64;
    let resid = DVector::from_column_slice(values) - trend * beta;
    let quad = resid.dot(&sys.chol_r().solve(&resid));
    Ok(0.5 * n * LN_2PI + 0.5 * n * sigma2.ln() + 0.5 * sys.log_det_r() + quad / (2.0 * sigma2))
}

/// The reduced objective `sigma^2(theta) * det(R)^(1/n)`.
pub(crate) fn reduced_objective(
    points: &[Vec<f64>],
    values: &[f64],
    trend: &DMatrix<f64>,
    corr: &CorrelationConfig,
) -> Result<f64> {
    let sys = AugmentedSystem::assemble(points, values, trend.clone(), corr)?;
    Ok(sys.sigma2() * (sys.log_det_r() / sys.n() as f64).exp())
}

/// Profiled negative log-likelihood of an ordinary Kriging model.
pub fn neg_log_likelihood(
    samples: &SampleSet,
    basis: RegressionBasis,
    corr: &CorrelationConfig,
) -> Result<f64> {
    profiled_nll(samples.points(), samples.values(), &basis.design(samples.points()), corr)
}

/// Full negative log-likelihood with the closed-form `beta(theta)` and
/// `sigma^2(theta)` substituted back in.
pub fn neg_log_likelihood_full(
    samples: &SampleSet,
    basis: RegressionBasis,
    corr: &CorrelationConfig,
) -> Result<f64> {
    let f = basis.design(samples.points());
    let sys = AugmentedSystem::assemble(samples.points(), samples.values(), f.clone(), corr)?;
    full_nll(samples.points(), samples.values(), &f, corr, sys.beta(), sys.sigma2())
}

/// `sigma^2(theta) det(R)^(1/n)` for an ordinary Kriging model.
pub fn reduced_likelihood_objective(
    samples: &SampleSet,
    basis: RegressionBasis,
    corr: &CorrelationConfig,
) -> Result<f64> {
    reduced_objective(samples.points(), samples.values(), &basis.design(samples.points()), corr)
}

/// Fit `theta` for ordinary Kriging by maximum likelihood.
pub fn fit_hyperparameters(
    samples: &SampleSet,
    basis: RegressionBasis,
    family: CorrelationFamily,
    bounds: &ThetaBounds,
) -> Result<CorrelationConfig> {
    let k = basis.len(samples.dim());
    if samples.len() < k + 1 {
        return Err(Error::InvalidInput(format!(
            "need at least {} samples to fit hyperparameters, got {}",
            k + 1,
            samples.len()
        )));
    }
    fit_theta(
        samples.points(),
        samples.values(),
        &basis.design(samples.points()),
        family,
        bounds,
        &MleOptions::default(),
    )
}

/// Multistart MLE over `theta` for a generic trend matrix.
pub(crate) fn fit_theta(
    points: &[Vec<f64>],
    values: &[f64],
    trend: &DMatrix<f64>,
    family: CorrelationFamily,
    bounds: &ThetaBounds,
    opts: &MleOptions,
) -> Result<CorrelationConfig> {
    let d = points[0].len();
    if bounds.dim() != d {
        return Err(Error::InvalidInput(format!(
            "theta bounds have dimension {}, samples {d}",
            bounds.dim()
        )));
    }
    let log_lo: Vec<f64> = bounds.lower.iter().map(|v| v.ln()).collect();
    let log_hi: Vec<f64> = bounds.upper.iter().map(|v| v.ln()).collect();

    let objective = |log_theta: &[f64]| -> f64 {
        let theta = log_theta.iter().map(|v| v.exp()).collect();
        let corr = CorrelationConfig {
            family,
            theta,
            nugget: 0.0,
        };
        profiled_nll(points, values, trend, &corr).unwrap_or(f64::INFINITY)
    };

    let results: Vec<(Vec<f64>, f64)> = opts
        .starts
        .par_iter()
        .map(|&t| {
            let x0: Vec<f64> = (0..d).map(|k| log_lo[k] + t * (log_hi[k] - log_lo[k])).collect();
            compass_search(&objective, x0, &log_lo, &log_hi, opts)
        })
        .collect();

    // lowest objective wins; ties go to the earliest start
    let mut best: Option<&(Vec<f64>, f64)> = None;
    for r in &results {
        if r.1.is_finite() && best.is_none_or(|b| r.1 < b.1) {
            best = Some(r);
        }
    }
    let (log_theta, _) = best.ok_or(Error::AllStartsFailed)?;
    CorrelationConfig::new(family, log_theta.iter().map(|v| v.exp()).collect())
}

fn compass_search(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    mut x: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    opts: &MleOptions,
) -> (Vec<f64>, f64) {
    let d = x.len();
    let mut fx = f(&x);
    let mut evals = 1;
    let mut step = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| (b - a) / 8.0)
        .fold(0.0f64, f64::max);
    if step == 0.0 {
        return (x, fx);
    }
    while step >= opts.min_step && evals < opts.max_evals {
        let mut improved = false;
        for k in 0..d {
            for dir in [1.0, -1.0] {
                let mut trial = x.clone();
                trial[k] = (x[k] + dir * step).clamp(lo[k], hi[k]);
                if trial[k] == x[k] {
                    continue;
                }
                let ft = f(&trial);
                evals += 1;
                let gain = fx - ft;
                if gain > opts.rel_tol * (1.0 + fx.abs()) || (!fx.is_finite() && ft.is_finite()) {
                    x = trial;
                    fx = ft;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}
