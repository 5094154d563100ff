use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-axis affine map of the inputs plus an affine map of the value:
/// `x_k -> x_k (1 + s_k) + t_k`, `y -> y (1 + a) + b`.
///
/// Parameters are stored as `[s_1, t_1, ..., s_d, t_d, a, b]`, so a
/// two-dimensional transform carries six numbers. All zeros is the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlignmentTransform {
    params: Vec<f64>,
}

impl AlignmentTransform {
    pub fn identity(d: usize) -> Self {
        Self {
            params: vec![0.0; 2 * d + 2],
        }
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.len() < 4 || params.len() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "alignment transform needs 2d + 2 parameters, got {}",
                params.len()
            )));
        }
        Ok(Self { params })
    }

    pub fn n_params_for(d: usize) -> usize {
        2 * d + 2
    }

    pub fn dim(&self) -> usize {
        (self.params.len() - 2) / 2
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn axis_scale(&self, k: usize) -> f64 {
        self.params[2 * k]
    }

    pub fn axis_shift(&self, k: usize) -> f64 {
        self.params[2 * k + 1]
    }

    pub fn value_scale(&self) -> f64 {
        self.params[2 * self.dim()]
    }

    pub fn value_shift(&self) -> f64 {
        self.params[2 * self.dim() + 1]
    }

    pub fn is_identity(&self) -> bool {
        self.params.iter().all(|v| *v == 0.0)
    }

    pub fn is_invertible(&self) -> bool {
        (0..self.dim()).all(|k| 1.0 + self.axis_scale(k) != 0.0) && 1.0 + self.value_scale() != 0.0
    }

    pub fn map_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| v * (1.0 + self.axis_scale(k)) + self.axis_shift(k))
            .collect()
    }

    pub fn map_value(&self, y: f64) -> f64 {
        y * (1.0 + self.value_scale()) + self.value_shift()
    }

    pub fn unmap_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| (v - self.axis_shift(k)) / (1.0 + self.axis_scale(k)))
            .collect()
    }

    pub fn unmap_value(&self, y: f64) -> f64 {
        (y - self.value_shift()) / (1.0 + self.value_scale())
    }

    /// Parameters of the inverse affine map, so that
    /// `inverse().map_point(map_point(x)) == x`.
    pub fn inverse(&self) -> Self {
        let d = self.dim();
        let mut p = Vec::with_capacity(2 * d + 2);
        for k in 0..d {
            let s = 1.0 + self.axis_scale(k);
            p.push(1.0 / s - 1.0);
            p.push(-self.axis_shift(k) / s);
        }
        let a = 1.0 + self.value_scale();
        p.push(1.0 / a - 1.0);
        p.push(-self.value_shift() / a);
        Self { params: p }
    }
}

/// Input-space transform `x -> x (1 + q_scale) + q_shift` per axis.
pub fn transform_point(x: &[f64], q: &AlignmentTransform) -> Vec<f64> {
    q.map_point(x)
}

/// Value transform `y -> y (1 + q_a) + q_b`.
pub fn transform_value(y: f64, q: &AlignmentTransform) -> f64 {
    q.map_value(y)
}

/// Second transform applied on top of an alignment when fitting the POD
/// modes to new data: per-axis scale and shift of the inputs plus an
/// additive value shift. No value scale, the mode coefficients already
/// provide one.
///
/// Stored as `[s_1, t_1, ..., s_d, t_d, shift]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GsmTransform {
    params: Vec<f64>,
}

impl GsmTransform {
    pub fn identity(d: usize) -> Self {
        Self {
            params: vec![0.0; 2 * d + 1],
        }
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.len() < 3 || params.len() % 2 != 1 {
            return Err(Error::InvalidInput(format!(
                "gsm transform needs 2d + 1 parameters, got {}",
                params.len()
            )));
        }
        Ok(Self { params })
    }

    pub fn n_params_for(d: usize) -> usize {
        2 * d + 1
    }

    pub fn dim(&self) -> usize {
        (self.params.len() - 1) / 2
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn axis_scale(&self, k: usize) -> f64 {
        self.params[2 * k]
    }

    pub fn axis_shift(&self, k: usize) -> f64 {
        self.params[2 * k + 1]
    }

    pub fn value_shift(&self) -> f64 {
        self.params[2 * self.dim()]
    }

    pub fn is_identity(&self) -> bool {
        self.params.iter().all(|v| *v == 0.0)
    }

    /// Apply on top of an already aligned point.
    pub fn map_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| v * (1.0 + self.axis_scale(k)) + self.axis_shift(k))
            .collect()
    }
}
