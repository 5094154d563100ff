//! Box domains, sample sets and the evaluable-surface contract shared by
//! database entries, Kriging models and generic surrogate models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to decide that two sample coordinates coincide.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidInput(format!(
                "domain bounds must be non-empty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput(format!(
                    "axis {k}: lower {lo} must be finite and below upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit cube `[0,1]^d`.
    pub fn unit(d: usize) -> Self {
        Self::new(vec![0.0; d], vec![1.0; d]).expect("d >= 1")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn edge(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.edge(k)).collect()
    }

    pub fn volume(&self) -> f64 {
        self.edges().iter().product()
    }

    /// Membership test with a small relative slack on each axis.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(k, &v)| {
                let slack = 1e-12 * self.edge(k);
                v >= self.lower[k] - slack && v <= self.upper[k] + slack
            })
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::DomainEscape {
                point: x.to_vec(),
                lower: self.lower.clone(),
                upper: self.upper.clone(),
            })
        }
    }

    /// Grow every axis by `fraction` of its edge length on both sides.
    pub fn inflate(&self, fraction: f64) -> Self {
        let lower = (0..self.dim())
            .map(|k| self.lower[k] - fraction * self.edge(k))
            .collect();
        let upper = (0..self.dim())
            .map(|k| self.upper[k] + fraction * self.edge(k))
            .collect();
        Self { lower, upper }
    }

    /// All `2^d` corner points.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|k| {
                        if mask >> k & 1 == 1 {
                            self.upper[k]
                        } else {
                            self.lower[k]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Tensor grid with `per_axis` equispaced points per axis, endpoints
    /// included. The first axis varies slowest.
    pub fn tensor_grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        assert!(per_axis >= 1);
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|k| linspace(self.lower[k], self.upper[k], per_axis))
            .collect();
        tensor_product(&axes)
    }

    /// Map a point of the unit cube into this box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(k, &t)| self.lower[k] + t * self.edge(k))
            .collect()
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

pub(crate) fn tensor_product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.len());
        for p in &points {
            for &v in axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        points = next;
    }
    points
}

/// Scattered observations `(x_i, y_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl SampleSet {
    /// Validates shape, finiteness and pairwise distinctness.
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("sample set is empty".into()));
        }
        if points.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidInput("points must have dimension >= 1".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::InvalidInput(format!(
                    "point {i} has dimension {}, expected {d}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) || !values[i].is_finite() {
                return Err(Error::InvalidInput(format!("sample {i} is not finite")));
            }
        }
        for i in 0..points.len() {
            for j in 0..i {
                if same_point(&points[i], &points[j]) {
                    return Err(Error::InvalidInput(format!(
                        "samples {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(Self { points, values })
    }

    /// Like [`SampleSet::new`] but also requires every point to lie in `domain`.
    pub fn within(domain: &Domain, points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let set = Self::new(points, values)?;
        if set.dim() != domain.dim() {
            return Err(Error::InvalidInput(format!(
                "samples have dimension {}, domain {}",
                set.dim(),
                domain.dim()
            )));
        }
        for p in &set.points {
            domain.check(p)?;
        }
        Ok(set)
    }

    /// Evaluate `surface` at `points`.
    pub fn from_surface(surface: &dyn ResponseSurface, points: Vec<Vec<f64>>) -> Result<Self> {
        let values = points.iter().map(|p| surface.value(p)).collect();
        Self::new(points, values)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.points.iter().any(|p| same_point(p, x))
    }

    /// Append one observation; fails if `x` duplicates an existing point.
    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput("dimension mismatch on push".into()));
        }
        if self.contains_point(&x) {
            return Err(Error::InvalidInput(format!("{x:?} is already sampled")));
        }
        self.points.push(x);
        self.values.push(y);
        Ok(())
    }
}

/// Coordinate-wise equality up to [`DUPLICATE_TOL`] relative tolerance.
pub fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= DUPLICATE_TOL * (1.0 + x.abs().max(y.abs())))
}

/// An evaluable scalar function over a box domain.
pub trait ResponseSurface: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Gradient at `x`. The default is a central difference with per-axis
    /// step `step[k]`; implementations with closed-form derivatives ignore it.
    fn gradient(&self, x: &[f64], step: &[f64]) -> Vec<f64> {
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|k| {
                let h = step[k];
                probe[k] = x[k] + h;
                let up = self.value(&probe);
                probe[k] = x[k] - h;
                let down = self.value(&probe);
                probe[k] = x[k];
                (up - down) / (2.0 * h)
            })
            .collect()
    }
}

impl<T: ResponseSurface + ?Sized> ResponseSurface for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }

    fn gradient(&self, x: &[f64], step: &[f64]) -> Vec<f64> {
        (**self).gradient(x, step)
    }
}

/// Wraps a closure as a [`ResponseSurface`].
pub struct FnSurface<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnSurface<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ResponseSurface for FnSurface<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_bounds() {
        assert!(Domain::new(vec![0.0], vec![0.0]).is_err());
        assert!(Domain::new(vec![], vec![]).is_err());
        assert!(Domain::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn inflate_matches_per_side_fraction() {
        let d = Domain::new(vec![0.2, -4.0], vec![0.9, 12.0]).unwrap();
        let e = d.inflate(0.15);
        assert!((e.lower()[0] - 0.095).abs() < 1e-12);
        assert!((e.upper()[1] - 14.4).abs() < 1e-12);
    }

    #[test]
    fn tensor_grid_covers_corners() {
        let d = Domain::unit(2);
        let g = d.tensor_grid(3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![0.0, 0.0]);
        assert_eq!(g[8], vec![1.0, 1.0]);
        assert_eq!(d.corners().len(), 4);
    }

    #[test]
    fn duplicate_samples_rejected() {
        let err = SampleSet::new(vec![vec![0.5], vec![0.5]], vec![1.0, 2.0]);
        assert!(err.is_err());
        let ok = SampleSet::new(vec![vec![0.5], vec![0.5 + 1e-9]], vec![1.0, 2.0]);
        assert!(ok.is_ok());
    }

    #[test]
    fn default_gradient_is_central_difference() {
        let s = FnSurface::new(2, |x: &[f64]| x[0] * x[0] + 3.0 * x[1]);
        let g = s.gradient(&[1.0, 2.0], &[1e-5, 1e-5]);
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }
}
