//! Gappy POD: fitting the POD modes to scattered samples of a new function.
//!
//! The linear fit solves `min |phi - Psi a|` with `Psi_ik = psi_k(x_i)`.
//! The transformed fit additionally moves the inputs by a second per-axis
//! affine map `p` (applied after each entry's alignment transform) and adds
//! a value shift, minimizing
//!
//! ```text
//! 1/2 sum_i (phi_i - ybar(p(x_i)) . a_y - p_shift)^2 + delta/2 |p|^2
//! ```
//!
//! with `a_y = offset + coef a` the entry weights of the fit. The result is
//! a generic surrogate model (GSM).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::GsmTransform;
use crate::domain::SampleSet;
use crate::error::{Error, Result};
use crate::optim::{minimize, GaussNewtonConfig, LeastSquaresProblem, Linearization};
use crate::pod::{entry_matrix, PodBasis};

/// Relative singular-value cutoff for the rank check on `Psi`.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GappyConfig {
    /// Penalty on `p`; `None` uses [`default_delta`].
    pub delta: Option<f64>,
    pub gauss_newton: GaussNewtonConfig,
    /// Extra starting points for the transformed fit: for each fraction
    /// `f` and axis `k`, `p` starts with an input shift of `+-f` times the
    /// edge length of axis `k`. The fit from `p = 0` always runs; the
    /// lowest objective wins. Empty means `p = 0` only.
    pub start_shifts: Vec<f64>,
}

impl Default for GappyConfig {
    fn default() -> Self {
        Self {
            delta: None,
            gauss_newton: GaussNewtonConfig::default(),
            start_shifts: vec![0.02, 0.05],
        }
    }
}

/// How the coefficients of a GSM were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    Linear,
    Transformed,
    /// Transformed fit requested but skipped because there were fewer than
    /// `l + 2d + 1` samples; `p` is zero.
    LinearFallback,
}

/// `1e-2 * var(phi) * n`, with the unbiased sample variance.
pub fn default_delta(samples: &SampleSet) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let v = samples.values();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    1e-2 * var * n as f64
}

/// Values at the samples with the mean entry removed (no-op for plain POD).
fn centered_targets(basis: &PodBasis, y: &DMatrix<f64>, samples: &SampleSet) -> DVector<f64> {
    DVector::from_column_slice(samples.values()) - y * basis.offset()
}

/// Least-squares mode coefficients through an SVD of `Psi`.
pub fn gappy_fit_linear(basis: &PodBasis, samples: &SampleSet) -> Result<Vec<f64>> {
    let l = basis.rank();
    if samples.len() < l {
        return Err(Error::RankDeficient {
            rank: samples.len(),
            required: l,
        });
    }
    let y = entry_matrix(basis.database(), samples.points())?;
    let psi = &y * basis.coefficients();
    let target = centered_targets(basis, &y, samples);
    let svd = psi.svd(true, true);
    let top = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * top)
        .count();
    if rank < l {
        return Err(Error::RankDeficient { rank, required: l });
    }
    let a = svd
        .solve(&target, RANK_TOL * top)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(a.as_slice().to_vec())
}

/// The fitted POD combination, possibly transformed: the low-fidelity model
/// for hierarchical Kriging.
#[derive(Clone, Debug)]
pub struct GenericSurrogateModel {
    basis: PodBasis,
    a_psi: Vec<f64>,
    a_y: DVector<f64>,
    p: GsmTransform,
    residual: f64,
    kind: FitKind,
}

impl GenericSurrogateModel {
    /// Assemble a model from known coefficients; `residual` is recomputed
    /// when samples are later supplied through a fit.
    pub fn from_parts(
        basis: PodBasis,
        a_psi: Vec<f64>,
        p: GsmTransform,
        residual: f64,
        kind: FitKind,
    ) -> Result<Self> {
        if a_psi.len() != basis.rank() || p.dim() != basis.dim() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients / {}-d transform for a rank {} basis in {} dimensions",
                a_psi.len(),
                p.dim(),
                basis.rank(),
                basis.dim()
            )));
        }
        let a_y = basis.pullback(&a_psi);
        Ok(Self {
            basis,
            a_psi,
            a_y,
            p,
            residual,
            kind,
        })
    }

    pub fn basis(&self) -> &PodBasis {
        &self.basis
    }

    pub fn a_psi(&self) -> &[f64] {
        &self.a_psi
    }

    /// Entry weights: the model is `ybar(p(x)) . a_y + p_shift`.
    pub fn a_y(&self) -> &[f64] {
        self.a_y.as_slice()
    }

    pub fn transform(&self) -> &GsmTransform {
        &self.p
    }

    /// Root sum of squared residuals at the fitted samples.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn kind(&self) -> FitKind {
        self.kind
    }

    /// Set when the transformed fit was skipped for lack of samples.
    pub fn is_fallback(&self) -> bool {
        self.kind == FitKind::LinearFallback
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let y = self.basis.database().values_under_gsm(x, &self.p)?;
        Ok(y.iter().zip(self.a_y.iter()).map(|(a, b)| a * b).sum::<f64>() + self.p.value_shift())
    }
}

pub fn gsm_eval(gsm: &GenericSurrogateModel, x: &[f64]) -> Result<f64> {
    gsm.eval(x)
}

fn residual_norm(gsm: &GenericSurrogateModel, samples: &SampleSet) -> Result<f64> {
    let mut acc = 0.0;
    for (x, v) in samples.points().iter().zip(samples.values()) {
        acc += (v - gsm.eval(x)?).powi(2);
    }
    Ok(acc.sqrt())
}

/// Linear fit wrapped as a GSM with `p = 0`.
pub fn fit_linear_model(basis: &PodBasis, samples: &SampleSet) -> Result<GenericSurrogateModel> {
    linear_model_of_kind(basis, samples, FitKind::Linear)
}

fn linear_model_of_kind(
    basis: &PodBasis,
    samples: &SampleSet,
    kind: FitKind,
) -> Result<GenericSurrogateModel> {
    let a = gappy_fit_linear(basis, samples)?;
    let mut gsm = GenericSurrogateModel::from_parts(
        basis.clone(),
        a,
        GsmTransform::identity(basis.dim()),
        0.0,
        kind,
    )?;
    gsm.residual = residual_norm(&gsm, samples)?;
    Ok(gsm)
}

/// Joint Gauss-Newton fit of mode coefficients and transform, started from
/// the linear fit at `p = 0`.
pub fn gappy_fit_transformed(
    basis: &PodBasis,
    samples: &SampleSet,
    cfg: &GappyConfig,
) -> Result<GenericSurrogateModel> {
    let d = basis.dim();
    if samples.len() < basis.rank() + GsmTransform::n_params_for(d) {
        return linear_model_of_kind(basis, samples, FitKind::LinearFallback);
    }
    let delta = match cfg.delta {
        Some(v) if v >= 0.0 => v,
        Some(v) => return Err(Error::InvalidInput(format!("delta {v} must be >= 0"))),
        None => default_delta(samples),
    };
    let a0 = gappy_fit_linear(basis, samples)?;
    let problem = GappyProblem::new(basis, samples, delta);
    let edges = basis.database().domain().edges();
    let mut starts = vec![GsmTransform::identity(d)];
    for &f in &cfg.start_shifts {
        for (k, edge) in edges.iter().enumerate() {
            for sign in [-1.0, 1.0] {
                let mut p = vec![0.0; GsmTransform::n_params_for(d)];
                p[2 * k + 1] = sign * f * edge;
                starts.push(GsmTransform::from_params(p)?);
            }
        }
    }
    let runs: Vec<Result<crate::optim::Solution>> = starts
        .par_iter()
        .map(|p| minimize(&problem, problem.pack(&a0, p), &cfg.gauss_newton))
        .collect();
    // Earliest start wins ties; a failing extra start is simply dropped.
    let mut best: Option<crate::optim::Solution> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(s) if best.as_ref().is_none_or(|b| s.cost < b.cost) => best = Some(s),
            Ok(_) => {}
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let sol = match best {
        Some(s) => s,
        None => return Err(first_err.expect("at least one start ran")),
    };
    let (a, p) = problem.unpack(&sol.x)?;
    let mut gsm = GenericSurrogateModel::from_parts(basis.clone(), a, p, 0.0, FitKind::Transformed)?;
    gsm.residual = residual_norm(&gsm, samples)?;
    Ok(gsm)
}

/// The penalized transformed fit over `z = [a, p]`.
pub struct GappyProblem<'a> {
    basis: &'a PodBasis,
    samples: &'a SampleSet,
    delta: f64,
    /// Sample points plus the corners of the reference domain; every one
    /// must stay evaluable under a candidate `p`.
    guard_points: Vec<Vec<f64>>,
}

impl<'a> GappyProblem<'a> {
    pub fn new(basis: &'a PodBasis, samples: &'a SampleSet, delta: f64) -> Self {
        let mut guard_points = samples.points().to_vec();
        guard_points.extend(basis.database().domain().corners());
        Self {
            basis,
            samples,
            delta,
            guard_points,
        }
    }

    pub fn pack(&self, a: &[f64], p: &GsmTransform) -> DVector<f64> {
        DVector::from_iterator(
            self.n_params(),
            a.iter().chain(p.params()).copied(),
        )
    }

    pub fn unpack(&self, z: &DVector<f64>) -> Result<(Vec<f64>, GsmTransform)> {
        let l = self.basis.rank();
        Ok((
            z.as_slice()[..l].to_vec(),
            GsmTransform::from_params(z.as_slice()[l..].to_vec())?,
        ))
    }

    fn check(&self, p: &GsmTransform) -> Result<()> {
        let db = self.basis.database();
        for x in &self.guard_points {
            db.check_under_gsm(x, p)?;
        }
        Ok(())
    }

    /// Residuals `phi_i - model(x_i)` and their Jacobian with respect to `z`.
    pub fn residual_jacobian(&self, z: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (a, p) = self.unpack(z)?;
        self.check(&p)?;
        let l = self.basis.rank();
        let d = self.basis.dim();
        let n = self.samples.len();
        let a_y = self.basis.pullback(&a);
        let coef = self.basis.coefficients();
        let db = self.basis.database();
        let mut r = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, self.n_params());
        for (i, (x, phi)) in self.samples.points().iter().zip(self.samples.values()).enumerate() {
            let jet = db.jet_under_gsm(x, &p)?;
            let y = DVector::from_column_slice(&jet.values);
            r[i] = phi - (y.dot(&a_y) + p.value_shift());
            let psi = coef.transpose() * &y;
            for k in 0..l {
                jac[(i, k)] = -psi[k];
            }
            for c in 0..2 * d {
                let g: f64 = jet.grads.iter().zip(a_y.iter()).map(|(g, w)| g[c] * w).sum();
                jac[(i, l + c)] = -g;
            }
            jac[(i, l + 2 * d)] = -1.0;
        }
        Ok((r, jac))
    }

    pub fn residuals(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let (a, p) = self.unpack(z)?;
        self.check(&p)?;
        let a_y = self.basis.pullback(&a);
        let db = self.basis.database();
        let mut r = DVector::zeros(self.samples.len());
        for (i, (x, phi)) in self.samples.points().iter().zip(self.samples.values()).enumerate() {
            let y = db.values_under_gsm(x, &p)?;
            let model: f64 = y.iter().zip(a_y.iter()).map(|(a, b)| a * b).sum();
            r[i] = phi - model - p.value_shift();
        }
        Ok(r)
    }

    fn penalty(&self, z: &DVector<f64>) -> f64 {
        let l = self.basis.rank();
        0.5 * self.delta * z.rows(l, z.len() - l).norm_squared()
    }
}

impl LeastSquaresProblem for GappyProblem<'_> {
    fn n_params(&self) -> usize {
        self.basis.rank() + GsmTransform::n_params_for(self.basis.dim())
    }

    fn cost(&self, z: &DVector<f64>) -> Result<f64> {
        Ok(0.5 * self.residuals(z)?.norm_squared() + self.penalty(z))
    }

    fn linearize(&self, z: &DVector<f64>) -> Result<Linearization> {
        let (r, j) = self.residual_jacobian(z)?;
        let l = self.basis.rank();
        let mut gradient = j.transpose() * &r;
        let mut hessian = j.transpose() * &j;
        for c in l..z.len() {
            gradient[c] += self.delta * z[c];
            hessian[(c, c)] += self.delta;
        }
        Ok(Linearization {
            cost: 0.5 * r.norm_squared() + self.penalty(z),
            gradient,
            hessian,
        })
    }
}
