use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Polynomial trend `sum_k beta_k f_k(x)` of an ordinary Kriging model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionBasis {
    #[default]
    Constant,
    Linear,
}

impl RegressionBasis {
    /// Number of basis functions in dimension `d`.
    pub fn len(&self, d: usize) -> usize {
        match self {
            RegressionBasis::Constant => 1,
            RegressionBasis::Linear => d + 1,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            RegressionBasis::Constant => vec![1.0],
            RegressionBasis::Linear => std::iter::once(1.0).chain(x.iter().copied()).collect(),
        }
    }

    /// Design matrix `F = [f_k(x_i)]`.
    pub fn design(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let k = self.len(points[0].len());
        DMatrix::from_fn(points.len(), k, |i, j| self.eval(&points[i])[j])
    }
}
