//! Factorization of the augmented Kriging system
//!
//! ```text
//! [ R   F ] [ c  ]   [ r(x) ]
//! [ F^T 0 ] [ mu ] = [ f(x) ]
//! ```
//!
//! shared by ordinary Kriging (polynomial trend) and hierarchical Kriging
//! (a single low-fidelity trend column). The block system is solved through
//! a Cholesky factor of `R` and one of the Schur complement `F^T R^-1 F`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::correlation::CorrelationConfig;
use crate::error::{Error, Result};

/// Relative nugget ladder tried after a plain factorization fails.
const NUGGET_LADDER: [f64; 7] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Squared pivot ratio below which a successful Cholesky is still treated
/// as numerically singular.
const PIVOT_RATIO_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug)]
pub(crate) struct AugmentedSystem {
    points: Vec<Vec<f64>>,
    corr: CorrelationConfig,
    nugget: f64,
    chol_r: Cholesky<f64, Dyn>,
    trend: DMatrix<f64>,
    /// `R^-1 F`
    rinv_f: DMatrix<f64>,
    chol_schur: Cholesky<f64, Dyn>,
    /// `R^-1 (Y - F beta)`: the first block of the cached solution against `(Y, 0)`.
    weights: DVector<f64>,
    /// Second block of the cached solution; equals the GLS coefficients.
    beta: DVector<f64>,
    sigma2: f64,
    log_det_r: f64,
}

pub(crate) fn correlation_matrix(points: &[Vec<f64>], corr: &CorrelationConfig) -> DMatrix<f64> {
    let n = points.len();
    let mut r = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = corr.between(&points[i], &points[j]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

fn factor_with_ladder(r: &DMatrix<f64>, base_nugget: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = r.nrows();
    let scale = r.trace() / n as f64;
    let attempt = |nugget: f64| -> Option<Cholesky<f64, Dyn>> {
        let mut m = r.clone();
        for i in 0..n {
            m[(i, i)] += nugget;
        }
        let chol = Cholesky::new(m)?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        ((lo / hi).powi(2) >= PIVOT_RATIO_FLOOR).then_some(chol)
    };
    if let Some(c) = attempt(base_nugget) {
        return Ok((c, base_nugget));
    }
    let mut last = base_nugget;
    for rel in NUGGET_LADDER {
        let nugget = base_nugget.max(rel * scale);
        last = nugget;
        if let Some(c) = attempt(nugget) {
            return Ok((c, nugget));
        }
    }
    Err(Error::SingularSystem { nugget: last })
}

impl AugmentedSystem {
    /// Factor the system for samples `(points, values)` with trend matrix
    /// `trend` (`n x K`).
    pub(crate) fn assemble(
        points: &[Vec<f64>],
        values: &[f64],
        trend: DMatrix<f64>,
        corr: &CorrelationConfig,
    ) -> Result<Self> {
        let n = points.len();
        let k = trend.ncols();
        if trend.nrows() != n {
            return Err(Error::InvalidInput("trend rows must match samples".into()));
        }
        if n < k {
            return Err(Error::RankDeficientRegression(format!(
                "{n} samples cannot determine {k} trend coefficients"
            )));
        }
        if corr.dim() != points[0].len() {
            return Err(Error::InvalidInput(format!(
                "theta has {} entries for {}-dimensional samples",
                corr.dim(),
                points[0].len()
            )));
        }
        let r = correlation_matrix(points, corr);
        let (chol_r, nugget) = factor_with_ladder(&r, corr.nugget)?;

        let rinv_f = chol_r.solve(&trend);
        let schur = trend.transpose() * &rinv_f;
        let schur = (&schur + schur.transpose()) * 0.5;
        let chol_schur = Cholesky::new(schur.clone()).ok_or_else(|| {
            Error::RankDeficientRegression("F^T R^-1 F is not positive definite".into())
        })?;
        let schur_diag_max = schur.diagonal().amax();
        let schur_diag_min = chol_schur.l_dirty().diagonal().min().powi(2);
        if !(schur_diag_min > 1e-13 * schur_diag_max) {
            return Err(Error::RankDeficientRegression(
                "F^T R^-1 F is numerically singular".into(),
            ));
        }

        let y = DVector::from_column_slice(values);
        let rinv_y = chol_r.solve(&y);
        let beta = chol_schur.solve(&(trend.transpose() * &rinv_y));
        let resid = &y - &trend * &beta;
        let weights = chol_r.solve(&resid);
        let sigma2 = (resid.dot(&weights) / n as f64).max(0.0);
        let log_det_r = 2.0 * chol_r.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();

        let mut corr = corr.clone();
        corr.nugget = nugget;
        Ok(Self {
            points: points.to_vec(),
            corr,
            nugget,
            chol_r,
            trend,
            rinv_f,
            chol_schur,
            weights,
            beta,
            sigma2,
            log_det_r,
        })
    }

    pub(crate) fn correlations(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| self.corr.between(x, p)),
        )
    }

    /// `(r, f)^T` times the cached solution against `(Y, 0)`.
    pub(crate) fn predict_with(&self, r: &DVector<f64>, f: &[f64]) -> f64 {
        let trend: f64 = f.iter().zip(self.beta.iter()).map(|(a, b)| a * b).sum();
        r.dot(&self.weights) + trend
    }

    /// `(r, f)^T M^-1 (r, f)` for the augmented matrix `M`.
    pub(crate) fn quadratic_form(&self, r: &DVector<f64>, f: &[f64]) -> f64 {
        let rinv_r = self.chol_r.solve(r);
        let g = self.rinv_f.transpose() * r - DVector::from_column_slice(f);
        let sinv_g = self.chol_schur.solve(&g);
        r.dot(&rinv_r) - g.dot(&sinv_g)
    }

    pub(crate) fn mse_with(&self, r: &DVector<f64>, f: &[f64]) -> f64 {
        (self.sigma2 * (1.0 - self.quadratic_form(r, f))).max(0.0)
    }

    /// Solve the augmented system against an arbitrary right-hand side.
    pub(crate) fn solve(&self, top: &DVector<f64>, bottom: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let rinv_top = self.chol_r.solve(top);
        let v = self
            .chol_schur
            .solve(&(self.trend.transpose() * &rinv_top - bottom));
        let u = &rinv_top - &self.rinv_f * &v;
        (u, v)
    }

    pub(crate) fn corr(&self) -> &CorrelationConfig {
        &self.corr
    }

    pub(crate) fn nugget(&self) -> f64 {
        self.nugget
    }

    pub(crate) fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub(crate) fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub(crate) fn log_det_r(&self) -> f64 {
        self.log_det_r
    }

    pub(crate) fn n(&self) -> usize {
        self.points.len()
    }

    pub(crate) fn trend(&self) -> &DMatrix<f64> {
        &self.trend
    }

    pub(crate) fn chol_r(&self) -> &Cholesky<f64, Dyn> {
        &self.chol_r
    }
}
