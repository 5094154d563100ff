//! Hierarchical Kriging: ordinary Kriging whose regression trend is a
//! single low-fidelity model scaled by `beta`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::domain::{ResponseSurface, SampleSet};
use crate::error::{Error, Result};
use crate::gappy::GenericSurrogateModel;
use crate::kriging::system::AugmentedSystem;
use crate::kriging::{fit_theta, CorrelationConfig, CorrelationFamily, MleOptions, ThetaBounds};

/// Anything usable as the trend of a hierarchical model. Evaluation may fail
/// (a GSM can leave its database's validity region).
pub trait LowFidelity: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<f64>;
}

impl LowFidelity for GenericSurrogateModel {
    fn dim(&self) -> usize {
        GenericSurrogateModel::dim(self)
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        GenericSurrogateModel::eval(self, x)
    }
}

impl<T: ResponseSurface> LowFidelity for T {
    fn dim(&self) -> usize {
        ResponseSurface::dim(self)
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value(x))
    }
}

/// Constant function, e.g. the trend that turns hierarchical Kriging back
/// into ordinary Kriging.
#[derive(Clone, Copy, Debug)]
pub struct ConstantTrend {
    pub dim: usize,
    pub value: f64,
}

impl ResponseSurface for ConstantTrend {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _x: &[f64]) -> f64 {
        self.value
    }

    fn gradient(&self, _x: &[f64], _step: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }
}

#[derive(Clone)]
pub struct HierarchicalKrigingModel {
    samples: SampleSet,
    low: Arc<dyn LowFidelity>,
    system: AugmentedSystem,
}

impl std::fmt::Debug for HierarchicalKrigingModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HierarchicalKrigingModel")
            .field("n", &self.samples.len())
            .field("beta", &self.beta())
            .field("sigma2", &self.sigma2())
            .field("corr", self.system.corr())
            .finish()
    }
}

fn trend_column(samples: &SampleSet, low: &dyn LowFidelity) -> Result<DMatrix<f64>> {
    if low.dim() != samples.dim() {
        return Err(Error::InvalidInput(format!(
            "low-fidelity model is {}-dimensional, samples {}",
            low.dim(),
            samples.dim()
        )));
    }
    let phi: Vec<f64> = samples
        .points()
        .iter()
        .map(|x| low.eval(x))
        .collect::<Result<_>>()?;
    let scale = samples.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if phi.iter().all(|v| v.abs() <= f64::EPSILON * scale) {
        return Err(Error::ZeroTrend);
    }
    Ok(DMatrix::from_column_slice(phi.len(), 1, &phi))
}

pub fn build_hk(
    samples: &SampleSet,
    low: Arc<dyn LowFidelity>,
    corr: &CorrelationConfig,
) -> Result<HierarchicalKrigingModel> {
    corr.validate()?;
    let trend = trend_column(samples, low.as_ref())?;
    let system = AugmentedSystem::assemble(samples.points(), samples.values(), trend, corr)?;
    Ok(HierarchicalKrigingModel {
        samples: samples.clone(),
        low,
        system,
    })
}

/// Maximum-likelihood `theta` for the hierarchical model itself.
pub fn fit_hk_hyperparameters(
    samples: &SampleSet,
    low: &dyn LowFidelity,
    family: CorrelationFamily,
    bounds: &ThetaBounds,
) -> Result<CorrelationConfig> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least 2 samples to fit hyperparameters".into(),
        ));
    }
    let trend = trend_column(samples, low)?;
    fit_theta(
        samples.points(),
        samples.values(),
        &trend,
        family,
        bounds,
        &MleOptions::default(),
    )
}

impl HierarchicalKrigingModel {
    /// `(r(x), lofi(x))` times the cached augmented solution.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let f = self.low.eval(x)?;
        let r = self.system.correlations(x);
        Ok(self.system.predict_with(&r, &[f]))
    }

    /// `beta lofi(x) + r(x)^T R^-1 (phi - beta Phi)` with `beta` recomputed
    /// from its generalized least-squares formula.
    pub fn predict_beta_form(&self, x: &[f64]) -> Result<f64> {
        let chol = self.system.chol_r();
        let trend = self.system.trend().column(0).clone_owned();
        let phi = DVector::from_column_slice(self.samples.values());
        let rinv_trend = chol.solve(&trend);
        let beta = rinv_trend.dot(&phi) / rinv_trend.dot(&trend);
        let r = self.system.correlations(x);
        let z = chol.solve(&(phi - &trend * beta));
        Ok(beta * self.low.eval(x)? + r.dot(&z))
    }

    pub fn predict_mse(&self, x: &[f64]) -> Result<f64> {
        let f = self.low.eval(x)?;
        let r = self.system.correlations(x);
        Ok(self.system.mse_with(&r, &[f]))
    }

    pub fn beta(&self) -> f64 {
        self.system.beta()[0]
    }

    pub fn sigma2(&self) -> f64 {
        self.system.sigma2()
    }

    pub fn correlation(&self) -> &CorrelationConfig {
        self.system.corr()
    }

    pub fn nugget(&self) -> f64 {
        self.system.nugget()
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn low_fidelity(&self) -> &Arc<dyn LowFidelity> {
        &self.low
    }

    /// Trend column `Phi_i = lofi(x_i)`.
    pub fn trend_values(&self) -> &[f64] {
        self.system.trend().as_slice()
    }
}

pub fn hk_predict(model: &HierarchicalKrigingModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

pub fn hk_predict_mse(model: &HierarchicalKrigingModel, x: &[f64]) -> Result<f64> {
    model.predict_mse(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FnSurface;
    use crate::kriging::{build_kriging, RegressionBasis};

    fn low() -> Arc<dyn LowFidelity> {
        Arc::new(FnSurface::new(2, |x: &[f64]| 1.0 + x[0] * x[0] - 0.5 * x[1]))
    }

    fn samples(f: impl Fn(&[f64]) -> f64) -> SampleSet {
        let pts: Vec<Vec<f64>> = (0..9)
            .map(|i| vec![0.1 + 0.1 * i as f64, (0.37 * i as f64 * 7.0) % 1.0])
            .collect();
        let vals = pts.iter().map(|x| f(x)).collect();
        SampleSet::new(pts, vals).unwrap()
    }

    fn corr() -> CorrelationConfig {
        CorrelationConfig::gaussian(vec![6.0, 4.0]).unwrap()
    }

    fn probes() -> Vec<Vec<f64>> {
        (0..25)
            .map(|i| vec![(i as f64 * 0.618) % 1.0, (i as f64 * 0.414) % 1.0])
            .collect()
    }

    #[test]
    fn samples_on_trend_give_unit_beta() {
        let lf = low();
        let s = samples(|x| lf.eval(x).unwrap());
        let hk = build_hk(&s, lf.clone(), &corr()).unwrap();
        assert!((hk.beta() - 1.0).abs() < 1e-8);
        for x in probes() {
            assert!((hk.predict(&x).unwrap() - lf.eval(&x).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn scaled_trend_recovered() {
        let lf = low();
        let s = samples(|x| 2.5 * lf.eval(x).unwrap());
        let hk = build_hk(&s, lf.clone(), &corr()).unwrap();
        assert!((hk.beta() - 2.5).abs() < 1e-8);
        for x in probes() {
            let z = hk.predict(&x).unwrap() - hk.beta() * lf.eval(&x).unwrap();
            assert!(z.abs() < 1e-8);
        }
    }

    #[test]
    fn single_sample() {
        let s = SampleSet::new(vec![vec![0.2, 0.4]], vec![3.0]).unwrap();
        let hk = build_hk(&s, low(), &corr()).unwrap();
        let phi1 = low().eval(&[0.2, 0.4]).unwrap();
        assert!((hk.beta() - 3.0 / phi1).abs() < 1e-12);
        assert!((hk.predict(&[0.2, 0.4]).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn interpolates_and_forms_agree() {
        let s = samples(|x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let hk = build_hk(&s, low(), &corr()).unwrap();
        for (x, v) in s.points().iter().zip(s.values()) {
            assert!((hk.predict(x).unwrap() - v).abs() <= 1e-8 * (1.0 + v.abs()));
            assert!(hk.predict_mse(x).unwrap() <= 1e-8 * hk.sigma2());
        }
        for x in probes() {
            let a = hk.predict(&x).unwrap();
            let b = hk.predict_beta_form(&x).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            assert!(hk.predict_mse(&x).unwrap() >= 0.0);
        }
    }

    #[test]
    fn far_field_is_scaled_trend() {
        let s = samples(|x| (3.0 * x[0]).sin() + x[1]);
        let hk = build_hk(&s, low(), &corr()).unwrap();
        let x = [30.0, -20.0];
        let expect = hk.beta() * low().eval(&x).unwrap();
        assert!((hk.predict(&x).unwrap() - expect).abs() < 1e-10 * expect.abs().max(1.0));
    }

    #[test]
    fn constant_trend_reduces_to_ordinary_kriging() {
        let s = samples(|x| (3.0 * x[0]).cos() * x[1]);
        let hk = build_hk(&s, Arc::new(ConstantTrend { dim: 2, value: 1.0 }), &corr()).unwrap();
        let ok = build_kriging(&s, RegressionBasis::Constant, &corr()).unwrap();
        for x in probes() {
            assert!((hk.predict(&x).unwrap() - ok.predict(&x)).abs() < 1e-10);
            assert!((hk.predict_mse(&x).unwrap() - ok.predict_mse(&x)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_trend_rejected() {
        let s = samples(|x| x[0]);
        let zero = Arc::new(ConstantTrend { dim: 2, value: 0.0 });
        assert!(matches!(build_hk(&s, zero, &corr()), Err(Error::ZeroTrend)));
    }

    #[test]
    fn mle_theta_is_within_bounds() {
        let s = samples(|x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let bounds = ThetaBounds::new(vec![0.1, 0.1], vec![100.0, 100.0]).unwrap();
        let c = fit_hk_hyperparameters(&s, low().as_ref(), CorrelationFamily::Gaussian, &bounds)
            .unwrap();
        assert!(bounds.contains(&c.theta));
        build_hk(&s, low(), &c).unwrap();
    }
}
