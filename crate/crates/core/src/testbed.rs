//! Analytic stand-in for an expensive response family, plus validation
//! grids and error metrics.
//!
//! Members live on `[0.2, 0.9] x [-4, 12]` and combine a linear trend, a
//! tilted `tanh` ridge and a Gaussian bump:
//!
//! ```text
//! f(x) = c0 + s1 x1 + s2 x2 + A tanh((x2 - r0 - r1 x1) / w)
//!      + H exp(-((x1 - b1) / rho1)^2 - ((x2 - b2) / rho2)^2)
//! ```
//!
//! A member may carry a known distortion `q`: its value at `z` is
//! `q.unmap_value(f(q.unmap_point(z)))`, so that aligning it with `q`
//! recovers `f` exactly.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{AlignedDatabase, AlignmentTransform};
use crate::domain::{Domain, ResponseSurface};
use crate::error::{Error, Result};

/// The reference box of the family.
pub fn family_domain() -> Domain {
    Domain::new(vec![0.2, -4.0], vec![0.9, 12.0]).expect("static bounds")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub intercept: f64,
    pub slope: [f64; 2],
    pub ridge_amplitude: f64,
    /// Ridge location `r0 + r1 x1` along `x2`.
    pub ridge_offset: f64,
    pub ridge_tilt: f64,
    pub ridge_width: f64,
    pub bump_height: f64,
    pub bump_center: [f64; 2],
    pub bump_radius: [f64; 2],
}

impl Default for FamilyParams {
    fn default() -> Self {
        Self {
            intercept: 0.1,
            slope: [0.3, 0.1],
            ridge_amplitude: -0.4,
            ridge_offset: 10.0,
            ridge_tilt: -6.0,
            ridge_width: 1.5,
            bump_height: 0.3,
            bump_center: [0.85, 10.0],
            bump_radius: [0.08, 2.5],
        }
    }
}

impl FamilyParams {
    pub fn linear(intercept: f64, slope: [f64; 2]) -> Self {
        Self {
            intercept,
            slope,
            ridge_amplitude: 0.0,
            bump_height: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.ridge_width > 0.0
            && self.bump_radius.iter().all(|r| *r > 0.0)
            && [
                self.intercept,
                self.slope[0],
                self.slope[1],
                self.ridge_amplitude,
                self.ridge_offset,
                self.ridge_tilt,
                self.bump_height,
                self.bump_center[0],
                self.bump_center[1],
            ]
            .iter()
            .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid family parameters {self:?}")))
        }
    }

    /// Seeded variation of these parameters; `scale = 1` is the spread used
    /// for the synthetic databases.
    pub fn perturbed(&self, rng: &mut impl Rng, scale: f64) -> Self {
        let mut u = |half: f64| scale * rng.random_range(-half..=half);
        Self {
            intercept: self.intercept + u(0.05),
            slope: [self.slope[0] + u(0.1), self.slope[1] + u(0.015)],
            ridge_amplitude: self.ridge_amplitude * (1.0 + u(0.25)),
            ridge_offset: self.ridge_offset + u(1.0),
            ridge_tilt: self.ridge_tilt + u(1.0),
            ridge_width: self.ridge_width * (1.0 + u(0.2)),
            bump_height: self.bump_height * (1.0 + u(0.3)),
            bump_center: [self.bump_center[0] + u(0.02), self.bump_center[1] + u(0.5)],
            bump_radius: [
                self.bump_radius[0] * (1.0 + u(0.15)),
                self.bump_radius[1] * (1.0 + u(0.15)),
            ],
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (ridge, bump) = self.features(x);
        self.intercept + self.slope[0] * x[0] + self.slope[1] * x[1]
            + self.ridge_amplitude * ridge
            + self.bump_height * bump
    }

    fn features(&self, x: &[f64]) -> (f64, f64) {
        let t = (x[1] - self.ridge_offset - self.ridge_tilt * x[0]) / self.ridge_width;
        let u = (x[0] - self.bump_center[0]) / self.bump_radius[0];
        let v = (x[1] - self.bump_center[1]) / self.bump_radius[1];
        (t.tanh(), (-u * u - v * v).exp())
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; 2] {
        let t = (x[1] - self.ridge_offset - self.ridge_tilt * x[0]) / self.ridge_width;
        let sech2 = 1.0 - t.tanh().powi(2);
        let ridge = self.ridge_amplitude * sech2 / self.ridge_width;
        let (_, bump) = self.features(x);
        let u = (x[0] - self.bump_center[0]) / self.bump_radius[0];
        let v = (x[1] - self.bump_center[1]) / self.bump_radius[1];
        let hb = self.bump_height * bump;
        [
            self.slope[0] - ridge * self.ridge_tilt - hb * 2.0 * u / self.bump_radius[0],
            self.slope[1] + ridge - hb * 2.0 * v / self.bump_radius[1],
        ]
    }
}

/// A family member, optionally distorted by a known alignment transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub params: FamilyParams,
    /// Transform that maps this member back onto its undistorted shape.
    pub distortion: Option<AlignmentTransform>,
}

pub fn make_family_member(params: FamilyParams) -> FamilyMember {
    FamilyMember {
        params,
        distortion: None,
    }
}

impl FamilyMember {
    pub fn distorted(params: FamilyParams, q: AlignmentTransform) -> Self {
        Self {
            params,
            distortion: Some(q),
        }
    }
}

impl ResponseSurface for FamilyMember {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.distortion {
            None => self.params.value(x),
            Some(q) => q.unmap_value(self.params.value(&q.unmap_point(x))),
        }
    }

    fn gradient(&self, x: &[f64], _step: &[f64]) -> Vec<f64> {
        match &self.distortion {
            None => self.params.gradient(x).to_vec(),
            Some(q) => {
                let g = self.params.gradient(&q.unmap_point(x));
                let a = 1.0 + q.value_scale();
                (0..2).map(|k| g[k] / (a * (1.0 + q.axis_scale(k)))).collect()
            }
        }
    }
}

/// How the synthetic database is drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyConfig {
    pub m: usize,
    pub seed: u64,
    pub distortions: bool,
    /// Spread of the parameter perturbations; 0 gives identical members.
    pub spread: f64,
    /// Spread of the distortions.
    pub distortion_scale: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            m: 8,
            seed: 7,
            distortions: true,
            spread: 1.0,
            distortion_scale: 1.0,
        }
    }
}

/// Members drawn from the family, the ground-truth alignment of each, and
/// one extra member kept out of the database to play the unknown function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDatabase {
    pub config: FamilyConfig,
    pub members: Vec<FamilyMember>,
    /// Ground-truth transforms; entry 0 is the identity.
    pub true_transforms: Vec<AlignmentTransform>,
    pub holdout: FamilyMember,
}

/// A random admissible distortion. Every component has a magnitude between
/// fixed bounds and a random sign, so distorted members are clearly
/// displaced while aligned preimages stay within a 15% inflation of the
/// family domain.
pub fn random_distortion(rng: &mut impl Rng, scale: f64) -> AlignmentTransform {
    const RANGES: [(f64, f64); 6] = [
        (0.01, 0.03),
        (0.01, 0.025),
        (0.01, 0.04),
        (0.6, 1.2),
        (0.05, 0.15),
        (0.02, 0.05),
    ];
    let params = RANGES
        .iter()
        .map(|&(lo, hi)| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            sign * scale * rng.random_range(lo..=hi)
        })
        .collect();
    AlignmentTransform::from_params(params).expect("six parameters")
}

impl SyntheticDatabase {
    /// The members as an unaligned database over the family domain.
    pub fn database(&self) -> Result<AlignedDatabase> {
        let entries = self
            .members
            .iter()
            .map(|m| Arc::new(m.clone()) as Arc<dyn ResponseSurface>)
            .collect();
        AlignedDatabase::new(entries, family_domain())
    }
}

pub fn build_synthetic_database(cfg: &FamilyConfig) -> Result<SyntheticDatabase> {
    if cfg.m < 2 {
        return Err(Error::InvalidInput(format!(
            "database needs at least 2 members, got {}",
            cfg.m
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = FamilyParams::default();
    let mut members = Vec::with_capacity(cfg.m);
    let mut true_transforms = Vec::with_capacity(cfg.m);
    for j in 0..cfg.m {
        let params = if j == 0 {
            base.clone()
        } else {
            base.perturbed(&mut rng, cfg.spread)
        };
        if j > 0 && cfg.distortions {
            let q = random_distortion(&mut rng, cfg.distortion_scale);
            true_transforms.push(q.clone());
            members.push(FamilyMember::distorted(params, q));
        } else {
            true_transforms.push(AlignmentTransform::identity(2));
            members.push(make_family_member(params));
        }
    }
    let holdout = make_family_member(base.perturbed(&mut rng, cfg.spread));
    Ok(SyntheticDatabase {
        config: cfg.clone(),
        members,
        true_transforms,
        holdout,
    })
}

/// Oracle values on a tensor grid over the domain.
#[derive(Clone, Debug)]
pub struct ValidationGrid {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    sigma: f64,
}

impl ValidationGrid {
    /// `per_axis` nodes per axis, endpoints included.
    pub fn new(domain: &Domain, per_axis: usize, oracle: &dyn ResponseSurface) -> Result<Self> {
        let points = domain.tensor_grid(per_axis);
        let values = points.iter().map(|x| oracle.value(x)).collect();
        Self::from_values(points, values)
    }

    pub fn from_values(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != values.len() {
            return Err(Error::InvalidInput("validation grid is empty or ragged".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sigma = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if !(sigma > 0.0) {
            return Err(Error::DegenerateValidation);
        }
        Ok(Self {
            points,
            values,
            sigma,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Population standard deviation of the oracle values.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `x1,x2,...,value` rows with a header line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        let d = self.points[0].len();
        let header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
        writeln!(out, "{},value", header.join(",")).expect("write to vec");
        for (x, v) in self.points.iter().zip(&self.values) {
            let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
            writeln!(out, "{},{v}", coords.join(",")).expect("write to vec");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// Mean absolute error over the grid, divided by the oracle's std.
    pub eta_1: f64,
    /// Maximum absolute error divided by the oracle's std.
    pub eta_inf: f64,
}

pub fn error_metrics(
    predict: impl Fn(&[f64]) -> Result<f64> + Sync,
    grid: &ValidationGrid,
) -> Result<ErrorMetrics> {
    let errors: Vec<f64> = grid
        .points
        .par_iter()
        .zip(&grid.values)
        .map(|(x, v)| predict(x).map(|p| (p - v).abs()))
        .collect::<Result<_>>()?;
    let sum: f64 = errors.iter().sum();
    let max = errors.iter().copied().fold(0.0f64, f64::max);
    Ok(ErrorMetrics {
        eta_1: sum / (grid.sigma * grid.len() as f64),
        eta_inf: max / grid.sigma,
    })
}
