use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-dimensional correlation shape; the full correlation is the product
/// over axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CorrelationFamily {
    /// `exp(-theta * h^2)`
    #[default]
    Gaussian,
    /// `exp(-theta * |h|^p)` with `p` in `[1, 2]`
    PowerExponential { p: f64 },
    /// Piecewise cubic with compact support `|h| < 1/theta`.
    CubicSpline,
}

impl CorrelationFamily {
    /// Exponent that `theta` scales against, used for default bounds.
    pub(crate) fn length_power(&self) -> f64 {
        match self {
            CorrelationFamily::Gaussian => 2.0,
            CorrelationFamily::PowerExponential { p } => *p,
            CorrelationFamily::CubicSpline => 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CorrelationFamily::PowerExponential { p } if !(1.0..=2.0).contains(p) => Err(
                Error::InvalidInput(format!("power-exponential p = {p} outside [1, 2]")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    fn one_dim(&self, h: f64, theta: f64) -> f64 {
        let h = h.abs();
        match self {
            CorrelationFamily::Gaussian => (-theta * h * h).exp(),
            CorrelationFamily::PowerExponential { p } => (-theta * h.powf(*p)).exp(),
            CorrelationFamily::CubicSpline => {
                let xi = theta * h;
                if xi <= 0.2 {
                    1.0 - 15.0 * xi * xi + 30.0 * xi * xi * xi
                } else if xi < 1.0 {
                    1.25 * (1.0 - xi).powi(3)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Correlation family plus per-axis inverse length scales and a nugget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationConfig {
    pub family: CorrelationFamily,
    pub theta: Vec<f64>,
    #[serde(default)]
    pub nugget: f64,
}

impl CorrelationConfig {
    pub fn new(family: CorrelationFamily, theta: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            family,
            theta,
            nugget: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn gaussian(theta: Vec<f64>) -> Result<Self> {
        Self::new(CorrelationFamily::Gaussian, theta)
    }

    pub fn with_nugget(mut self, nugget: f64) -> Self {
        self.nugget = nugget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if self.theta.is_empty() {
            return Err(Error::InvalidInput("theta is empty".into()));
        }
        if let Some(t) = self.theta.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidInput(format!("theta entry {t} must be > 0")));
        }
        if !(self.nugget.is_finite() && self.nugget >= 0.0) {
            return Err(Error::InvalidInput("nugget must be >= 0".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Correlation between two points (nugget excluded).
    #[inline]
    pub fn between(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut r = 1.0;
        for k in 0..self.theta.len() {
            r *= self.family.one_dim(a[k] - b[k], self.theta[k]);
            if r == 0.0 {
                break;
            }
        }
        r
    }
}

/// Product correlation of a separation vector `h`.
pub fn correlation_value(h: &[f64], corr: &CorrelationConfig) -> f64 {
    let zero = vec![0.0; h.len()];
    corr.between(h, &zero)
}
