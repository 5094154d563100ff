//! Ordinary Kriging: a polynomial regression trend plus a stationary
//! Gaussian-process correction, interpolating the samples exactly.

mod correlation;
mod likelihood;
mod regression;
pub(crate) mod system;

use nalgebra::{DMatrix, DVector};

pub use correlation::{correlation_value, CorrelationConfig, CorrelationFamily};
pub use likelihood::{
    fit_hyperparameters, neg_log_likelihood, neg_log_likelihood_full,
    reduced_likelihood_objective, MleOptions, ThetaBounds,
};
pub(crate) use likelihood::fit_theta;
pub use regression::RegressionBasis;

use crate::domain::{ResponseSurface, SampleSet};
use crate::error::Result;
use system::AugmentedSystem;

/// A built Kriging interpolant. Immutable once built.
#[derive(Clone, Debug)]
pub struct KrigingModel {
    samples: SampleSet,
    basis: RegressionBasis,
    system: AugmentedSystem,
}

/// Factor the augmented system and cache its solution against `(Y, 0)`.
pub fn build_kriging(
    samples: &SampleSet,
    basis: RegressionBasis,
    corr: &CorrelationConfig,
) -> Result<KrigingModel> {
    corr.validate()?;
    let trend = basis.design(samples.points());
    let system = AugmentedSystem::assemble(samples.points(), samples.values(), trend, corr)?;
    Ok(KrigingModel {
        samples: samples.clone(),
        basis,
        system,
    })
}

impl KrigingModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let r = self.system.correlations(x);
        self.system.predict_with(&r, &self.basis.eval(x))
    }

    /// Predicted mean squared error, clamped at zero.
    pub fn predict_mse(&self, x: &[f64]) -> f64 {
        let r = self.system.correlations(x);
        self.system.mse_with(&r, &self.basis.eval(x))
    }

    /// Weights `c(x)` of the predictor `c(x)^T Y`.
    pub fn weights_at(&self, x: &[f64]) -> DVector<f64> {
        let r = self.system.correlations(x);
        let f = DVector::from_vec(self.basis.eval(x));
        self.system.solve(&r, &f).0
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn basis(&self) -> RegressionBasis {
        self.basis
    }

    /// Correlation settings actually used, including any nugget added
    /// during factorization.
    pub fn correlation(&self) -> &CorrelationConfig {
        self.system.corr()
    }

    pub fn nugget(&self) -> f64 {
        self.system.nugget()
    }

    pub fn beta(&self) -> &[f64] {
        self.system.beta().as_slice()
    }

    pub fn sigma2(&self) -> f64 {
        self.system.sigma2()
    }

    pub fn design_matrix(&self) -> &DMatrix<f64> {
        self.system.trend()
    }
}

impl ResponseSurface for KrigingModel {
    fn dim(&self) -> usize {
        self.samples.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.predict(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Assemble `[[R, F], [F^T, 0]]` densely and solve it with LU.
    fn dense_predict(model: &KrigingModel, x: &[f64]) -> (f64, f64) {
        let s = model.samples();
        let n = s.len();
        let f = model.design_matrix();
        let k = f.ncols();
        let corr = model.correlation();
        let mut m = DMatrix::zeros(n + k, n + k);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = corr.between(&s.points()[i], &s.points()[j]);
            }
            m[(i, i)] += corr.nugget;
            for c in 0..k {
                m[(i, n + c)] = f[(i, c)];
                m[(n + c, i)] = f[(i, c)];
            }
        }
        let mut rhs = DVector::zeros(n + k);
        for i in 0..n {
            rhs[i] = s.values()[i];
        }
        let lu = m.clone().lu();
        let sol = lu.solve(&rhs).unwrap();
        let mut rf = DVector::zeros(n + k);
        for i in 0..n {
            rf[i] = corr.between(x, &s.points()[i]);
        }
        let fx = model.basis().eval(x);
        for c in 0..k {
            rf[n + c] = fx[c];
        }
        let pred = rf.dot(&sol);
        let q = rf.dot(&lu.solve(&rf).unwrap());
        (pred, model.sigma2() * (1.0 - q))
    }

    fn random_model(seed: u64, n: usize, d: usize, basis: RegressionBasis) -> KrigingModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect();
        let vals = pts
            .iter()
            .map(|p| p.iter().map(|v| (3.0 * v).sin()).sum::<f64>() + rng.random::<f64>() * 0.1)
            .collect();
        let s = SampleSet::new(pts, vals).unwrap();
        let theta = (0..d).map(|_| rng.random_range(2.0..10.0)).collect();
        build_kriging(&s, basis, &CorrelationConfig::gaussian(theta).unwrap()).unwrap()
    }

    #[test]
    fn single_sample_is_constant() {
        let s = SampleSet::new(vec![vec![0.3, 0.4]], vec![1.7]).unwrap();
        let m = build_kriging(
            &s,
            RegressionBasis::Constant,
            &CorrelationConfig::gaussian(vec![3.0, 1.0]).unwrap(),
        )
        .unwrap();
        assert!((m.beta()[0] - 1.7).abs() < 1e-14);
        for x in [[0.0, 0.0], [0.9, 0.1], [0.3, 0.4]] {
            assert!((m.predict(&x) - 1.7).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_trend_reproduced_exactly() {
        let xs: Vec<Vec<f64>> = [0.1, 0.35, 0.6, 0.9].iter().map(|v| vec![*v]).collect();
        let ys = xs.iter().map(|x| 2.0 * x[0] + 3.0).collect();
        let s = SampleSet::new(xs, ys).unwrap();
        let m = build_kriging(
            &s,
            RegressionBasis::Linear,
            &CorrelationConfig::gaussian(vec![5.0]).unwrap(),
        )
        .unwrap();
        // oracle: the least-squares line through the samples is exact
        assert!((m.beta()[0] - 3.0).abs() < 1e-8);
        assert!((m.beta()[1] - 2.0).abs() < 1e-8);
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            assert!((m.predict(&[x]) - (2.0 * x + 3.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn far_field_tends_to_trend() {
        let m = random_model(3, 6, 2, RegressionBasis::Constant);
        let far = [40.0, -40.0];
        assert!((m.predict(&far) - m.beta()[0]).abs() < 1e-12);
        assert!(m.predict_mse(&far) >= 0.99 * m.sigma2());
    }

    #[test]
    fn interpolates_and_mse_vanishes_at_samples() {
        for seed in 0..10 {
            let m = random_model(seed, 12, 2, RegressionBasis::Linear);
            for (x, y) in m.samples().points().iter().zip(m.samples().values()) {
                assert!((m.predict(x) - y).abs() <= 1e-8 * (1.0 + y.abs()));
                assert!(m.predict_mse(x) <= 1e-8 * m.sigma2().max(1e-300));
            }
        }
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..5 {
            let m = random_model(seed, 5, 2, RegressionBasis::Constant);
            for _ in 0..10 {
                let x = [rng.random::<f64>(), rng.random::<f64>()];
                let (p, mse) = dense_predict(&m, &x);
                assert!((m.predict(&x) - p).abs() < 1e-10);
                assert!((m.predict_mse(&x) - mse.max(0.0)).abs() < 1e-10);
            }
        }
        // 1-D, three samples, midpoint
        let s = SampleSet::new(vec![vec![0.0], vec![0.4], vec![1.0]], vec![1.0, -0.5, 2.0]).unwrap();
        let m = build_kriging(
            &s,
            RegressionBasis::Constant,
            &CorrelationConfig::gaussian(vec![4.0]).unwrap(),
        )
        .unwrap();
        let (_, mse) = dense_predict(&m, &[0.7]);
        assert!((m.predict_mse(&[0.7]) - mse).abs() < 1e-10);
    }

    #[test]
    fn unbiasedness_constraint_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_model(11, 9, 2, RegressionBasis::Linear);
        for _ in 0..20 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let c = m.weights_at(&x);
            let ftc = m.design_matrix().transpose() * c;
            let fx = m.basis().eval(&x);
            for k in 0..fx.len() {
                assert!((ftc[k] - fx[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn too_few_samples_for_basis() {
        let s = SampleSet::new(vec![vec![0.1, 0.2], vec![0.5, 0.5]], vec![1.0, 2.0]).unwrap();
        let err = build_kriging(
            &s,
            RegressionBasis::Linear,
            &CorrelationConfig::gaussian(vec![1.0, 1.0]).unwrap(),
        );
        assert!(matches!(err, Err(crate::Error::RankDeficientRegression(_))));
    }

    #[test]
    fn near_duplicates_trigger_nugget() {
        let s = SampleSet::new(
            vec![vec![0.5], vec![0.5 + 1e-9], vec![0.1]],
            vec![1.0, 1.0, 0.0],
        )
        .unwrap();
        let m = build_kriging(
            &s,
            RegressionBasis::Constant,
            &CorrelationConfig::gaussian(vec![1.0]).unwrap(),
        )
        .unwrap();
        assert!(m.nugget() > 0.0);
    }
}
