use std::fmt;
use std::sync::Arc;

use super::transform::{AlignmentTransform, GsmTransform};
use crate::domain::{Domain, ResponseSurface};
use crate::error::{Error, Result};

/// Fraction of each edge added on both sides of the reference domain to form
/// the region where entries must be evaluable.
pub const DEFAULT_INFLATION: f64 = 0.15;

/// Relative finite-difference step for entry derivatives.
pub const FD_STEP: f64 = 1e-5;

/// Database of response surfaces with one alignment transform per entry.
/// Entry 0 is the reference and always carries the identity.
#[derive(Clone)]
pub struct AlignedDatabase {
    entries: Vec<Arc<dyn ResponseSurface>>,
    transforms: Vec<AlignmentTransform>,
    domain: Domain,
    extended: Domain,
}

impl fmt::Debug for AlignedDatabase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlignedDatabase")
            .field("len", &self.entries.len())
            .field("transforms", &self.transforms)
            .field("domain", &self.domain)
            .field("extended", &self.extended)
            .finish()
    }
}

/// Entry values at a point together with their derivatives with respect to
/// a transform's parameters.
pub(crate) struct EntryJet {
    pub values: Vec<f64>,
    /// `grads[j]` holds the derivative of entry `j`'s value.
    pub grads: Vec<Vec<f64>>,
}

impl AlignedDatabase {
    /// Unaligned database (all transforms identity) over `domain`, with
    /// the validity region inflated by [`DEFAULT_INFLATION`].
    pub fn new(entries: Vec<Arc<dyn ResponseSurface>>, domain: Domain) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("database has no entries".into()));
        }
        let d = domain.dim();
        if let Some(j) = entries.iter().position(|e| e.dim() != d) {
            return Err(Error::InvalidInput(format!(
                "entry {j} has dimension {}, domain {d}",
                entries[j].dim()
            )));
        }
        let extended = domain.inflate(DEFAULT_INFLATION);
        Ok(Self {
            transforms: vec![AlignmentTransform::identity(d); entries.len()],
            entries,
            domain,
            extended,
        })
    }

    pub fn with_extended_domain(mut self, extended: Domain) -> Result<Self> {
        if extended.dim() != self.domain.dim()
            || self.domain.corners().iter().any(|c| !extended.contains(c))
        {
            return Err(Error::InvalidInput(
                "extended domain must contain the reference domain".into(),
            ));
        }
        self.extended = extended;
        Ok(self)
    }

    pub fn with_transforms(mut self, transforms: Vec<AlignmentTransform>) -> Result<Self> {
        if transforms.len() != self.entries.len() {
            return Err(Error::InvalidInput(format!(
                "{} transforms for {} entries",
                transforms.len(),
                self.entries.len()
            )));
        }
        if !transforms[0].is_identity() {
            return Err(Error::InvalidInput("reference transform must be the identity".into()));
        }
        for (j, t) in transforms.iter().enumerate() {
            if t.dim() != self.dim() || !t.is_invertible() {
                return Err(Error::InvalidInput(format!("transform {j} is not admissible")));
            }
        }
        self.transforms = transforms;
        Ok(self)
    }

    /// Same entries, identity transforms.
    pub fn unaligned(&self) -> Self {
        let mut db = self.clone();
        db.transforms = vec![AlignmentTransform::identity(self.dim()); self.len()];
        db
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn extended_domain(&self) -> &Domain {
        &self.extended
    }

    pub fn transforms(&self) -> &[AlignmentTransform] {
        &self.transforms
    }

    pub fn entries(&self) -> &[Arc<dyn ResponseSurface>] {
        &self.entries
    }

    pub(crate) fn fd_steps(&self) -> Vec<f64> {
        self.domain.edges().iter().map(|l| FD_STEP * l).collect()
    }

    /// `y_j(xbar(x, q)) (1 + a) + b` under an arbitrary transform `q`.
    pub fn value_under(&self, j: usize, x: &[f64], q: &AlignmentTransform) -> Result<f64> {
        let xb = q.map_point(x);
        self.extended.check(&xb)?;
        Ok(q.map_value(self.entries[j].value(&xb)))
    }

    /// Aligned value of entry `j` at `x`.
    pub fn aligned_value(&self, j: usize, x: &[f64]) -> Result<f64> {
        self.value_under(j, x, &self.transforms[j])
    }

    /// Aligned values of all entries at `x`: one evaluation per entry.
    pub fn aligned_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.len()).map(|j| self.aligned_value(j, x)).collect()
    }

    /// Value of entry `j` under `q` and its derivative with respect to the
    /// `2d + 2` parameters of `q`.
    pub(crate) fn value_and_transform_gradient(
        &self,
        j: usize,
        x: &[f64],
        q: &AlignmentTransform,
        steps: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let d = self.dim();
        let xb = q.map_point(x);
        self.extended.check(&xb)?;
        let entry = &self.entries[j];
        let y = entry.value(&xb);
        let dy = entry.gradient(&xb, steps);
        let gain = 1.0 + q.value_scale();
        let mut g = Vec::with_capacity(2 * d + 2);
        for k in 0..d {
            g.push(gain * dy[k] * x[k]);
            g.push(gain * dy[k]);
        }
        g.push(y);
        g.push(1.0);
        Ok((q.map_value(y), g))
    }

    /// Aligned entry values at the doubly transformed point `p(q_j(x))`.
    pub fn values_under_gsm(&self, x: &[f64], p: &GsmTransform) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|j| {
                let q = &self.transforms[j];
                let xx = p.map_point(&q.map_point(x));
                self.extended.check(&xx)?;
                Ok(q.map_value(self.entries[j].value(&xx)))
            })
            .collect()
    }

    /// Like [`Self::values_under_gsm`] plus, for each entry, the derivatives
    /// with respect to the `2d` input parameters of `p`.
    pub(crate) fn jet_under_gsm(&self, x: &[f64], p: &GsmTransform) -> Result<EntryJet> {
        let d = self.dim();
        let steps = self.fd_steps();
        let mut values = Vec::with_capacity(self.len());
        let mut grads = Vec::with_capacity(self.len());
        for j in 0..self.len() {
            let q = &self.transforms[j];
            let xb = q.map_point(x);
            let xx = p.map_point(&xb);
            self.extended.check(&xx)?;
            let entry = &self.entries[j];
            let y = entry.value(&xx);
            let dy = entry.gradient(&xx, &steps);
            let gain = 1.0 + q.value_scale();
            let mut g = Vec::with_capacity(2 * d);
            for k in 0..d {
                g.push(gain * dy[k] * xb[k]);
                g.push(gain * dy[k]);
            }
            values.push(q.map_value(y));
            grads.push(g);
        }
        Ok(EntryJet { values, grads })
    }

    /// Check that `p(q_j(x))` stays in the validity region for every entry.
    pub(crate) fn check_under_gsm(&self, x: &[f64], p: &GsmTransform) -> Result<()> {
        for q in &self.transforms {
            self.extended.check(&p.map_point(&q.map_point(x)))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FnSurface;

    fn db() -> AlignedDatabase {
        let a: Arc<dyn ResponseSurface> = Arc::new(FnSurface::new(2, |x: &[f64]| x[0] + x[1]));
        let b: Arc<dyn ResponseSurface> =
            Arc::new(FnSurface::new(2, |x: &[f64]| x[0] * x[1]));
        AlignedDatabase::new(vec![a, b], Domain::unit(2)).unwrap()
    }

    #[test]
    fn reference_must_stay_identity() {
        let t = AlignmentTransform::from_params(vec![0.0, 0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(db()
            .with_transforms(vec![t.clone(), AlignmentTransform::identity(2)])
            .is_err());
        assert!(db()
            .with_transforms(vec![AlignmentTransform::identity(2), t])
            .is_ok());
    }

    #[test]
    fn escape_detected() {
        let t = AlignmentTransform::from_params(vec![0.0, 0.5, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let db = db()
            .with_transforms(vec![AlignmentTransform::identity(2), t])
            .unwrap();
        assert!(db.aligned_value(1, &[0.5, 0.5]).is_ok());
        assert!(matches!(
            db.aligned_value(1, &[1.0, 0.5]),
            Err(Error::DomainEscape { .. })
        ));
    }

    #[test]
    fn transform_gradient_matches_differences() {
        let db = db();
        let q = AlignmentTransform::from_params(vec![0.05, -0.02, 0.1, 0.03, 0.2, -0.1]).unwrap();
        let x = [0.4, 0.7];
        let (_, g) = db
            .value_and_transform_gradient(1, &x, &q, &db.fd_steps())
            .unwrap();
        for i in 0..6 {
            let h = 1e-6;
            let mut up = q.params().to_vec();
            up[i] += h;
            let mut dn = q.params().to_vec();
            dn[i] -= h;
            let fd = (db
                .value_under(1, &x, &AlignmentTransform::from_params(up).unwrap())
                .unwrap()
                - db
                    .value_under(1, &x, &AlignmentTransform::from_params(dn).unwrap())
                    .unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "param {i}: {fd} vs {}", g[i]);
        }
    }
}
