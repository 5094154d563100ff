//! Registration of database entries onto a reference entry.
//!
//! Every non-reference entry `j` gets a transform `q_j` (per-axis affine map
//! of the inputs, affine map of the value). The transforms minimize the mean
//! pairwise squared difference of the transformed entries over the reference
//! domain plus a ridge penalty `delta/2 * sum |q_j|^2`. The integral is a
//! tensor trapezoid rule and the problem is solved with damped Gauss-Newton.
//!
//! Both transformed functions of a pair are evaluated at the preimages of the
//! same quadrature node, so residuals are
//! `e_ijk = sqrt(w_i) * (ybar_j(node_i) - ybar_k(node_i))`.

mod database;
mod quadrature;
mod transform;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use database::{AlignedDatabase, DEFAULT_INFLATION, FD_STEP};
pub(crate) use database::EntryJet;
pub use quadrature::QuadratureRule;
pub use transform::{transform_point, transform_value, AlignmentTransform, GsmTransform};

use crate::error::{Error, Result};
use crate::optim::{minimize, GaussNewtonConfig, LeastSquaresProblem, Linearization};

/// Nodes per parallel work unit. Fixed so the reduction order does not
/// depend on the thread count.
const NODE_CHUNK: usize = 64;

/// Default number of quadrature nodes per axis.
pub const DEFAULT_QUADRATURE_NODES: usize = 33;

/// How the normal equations are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    /// Accumulate `J^T J` and `J^T e` node by node; `J` is never stored.
    #[default]
    Accumulate,
    /// Materialize the full residual Jacobian first.
    Stored,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AlignmentConfig {
    /// Penalty weight; `None` uses [`default_delta`].
    pub delta: Option<f64>,
    pub gauss_newton: GaussNewtonConfig,
    pub mode: JacobianMode,
}

/// Result of [`align_database`].
#[derive(Clone, Debug)]
pub struct AlignmentOutcome {
    pub database: AlignedDatabase,
    pub delta: f64,
    /// Sum-of-squared-differences term before and after, penalty excluded.
    pub ssd_before: f64,
    pub ssd_after: f64,
    /// Full penalized objective before and after.
    pub objective_before: f64,
    pub objective_after: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// `1e-3` times the mean over entries of the squared value range on the
/// quadrature nodes.
pub fn default_delta(db: &AlignedDatabase, quad: &QuadratureRule) -> Result<f64> {
    let mut total = 0.0;
    for j in 0..db.len() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in quad.nodes() {
            let v = db.aligned_value(j, x)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        total += (hi - lo).powi(2);
    }
    Ok(1e-3 * total / db.len() as f64)
}

/// The discretized sum-of-squared-differences term for the database's
/// current transforms (no penalty).
pub fn ssd_term(db: &AlignedDatabase, quad: &QuadratureRule) -> Result<f64> {
    let problem = AlignmentProblem::new(db, quad, 0.0, JacobianMode::Accumulate)?;
    problem.cost(&problem.params_of(db.transforms()))
}

/// Penalized alignment objective for the database's current transforms.
pub fn ssd_objective(db: &AlignedDatabase, quad: &QuadratureRule, delta: f64) -> Result<f64> {
    let problem = AlignmentProblem::new(db, quad, delta, JacobianMode::Accumulate)?;
    problem.cost(&problem.params_of(db.transforms()))
}

/// Solve for the transforms of entries `1..m`, starting from the database's
/// current transforms.
pub fn align_database(
    db: &AlignedDatabase,
    quad: &QuadratureRule,
    cfg: &AlignmentConfig,
) -> Result<AlignmentOutcome> {
    if db.len() < 2 {
        return Err(Error::InvalidInput("alignment needs at least two entries".into()));
    }
    let delta = match cfg.delta {
        Some(d) if d >= 0.0 => d,
        Some(d) => return Err(Error::InvalidInput(format!("delta {d} must be >= 0"))),
        None => default_delta(db, quad)?,
    };
    let problem = AlignmentProblem::new(db, quad, delta, cfg.mode)?;
    let x0 = problem.params_of(db.transforms());
    let ssd_before = ssd_term(db, quad)?;
    let sol = minimize(&problem, x0, &cfg.gauss_newton)?;
    let aligned = db.clone().with_transforms(problem.transforms_of(&sol.x)?)?;
    let ssd_after = ssd_term(&aligned, quad)?;
    Ok(AlignmentOutcome {
        database: aligned,
        delta,
        ssd_before,
        ssd_after,
        objective_before: sol.initial_cost,
        objective_after: sol.cost,
        iterations: sol.iterations,
        history: sol.history,
    })
}

/// The alignment objective as a penalized least-squares problem over the
/// stacked parameters of entries `1..m`.
pub struct AlignmentProblem<'a> {
    db: &'a AlignedDatabase,
    quad: &'a QuadratureRule,
    delta: f64,
    mode: JacobianMode,
    /// `1 / (m (m - 1))`
    prefactor: f64,
    per_entry: usize,
    steps: Vec<f64>,
}

struct Partial {
    ssd: f64,
    jte: DVector<f64>,
    jtj: DMatrix<f64>,
}

impl<'a> AlignmentProblem<'a> {
    pub fn new(
        db: &'a AlignedDatabase,
        quad: &'a QuadratureRule,
        delta: f64,
        mode: JacobianMode,
    ) -> Result<Self> {
        if db.len() < 2 {
            return Err(Error::InvalidInput("alignment needs at least two entries".into()));
        }
        let m = db.len() as f64;
        Ok(Self {
            db,
            quad,
            delta,
            mode,
            prefactor: 1.0 / (m * (m - 1.0)),
            per_entry: AlignmentTransform::n_params_for(db.dim()),
            steps: db.fd_steps(),
        })
    }

    pub fn params_of(&self, transforms: &[AlignmentTransform]) -> DVector<f64> {
        DVector::from_iterator(
            self.n_params(),
            transforms[1..].iter().flat_map(|t| t.params().iter().copied()),
        )
    }

    pub fn transforms_of(&self, x: &DVector<f64>) -> Result<Vec<AlignmentTransform>> {
        let mut out = vec![AlignmentTransform::identity(self.db.dim())];
        for chunk in x.as_slice().chunks(self.per_entry) {
            out.push(AlignmentTransform::from_params(chunk.to_vec())?);
        }
        Ok(out)
    }

    fn node_values(&self, transforms: &[AlignmentTransform], x: &[f64]) -> Result<Vec<f64>> {
        (0..self.db.len())
            .map(|j| self.db.value_under(j, x, &transforms[j]))
            .collect()
    }

    /// Values at node `x` plus transform gradients for entries `1..m`.
    fn node_jet(&self, transforms: &[AlignmentTransform], x: &[f64]) -> Result<EntryJet> {
        let m = self.db.len();
        let mut values = Vec::with_capacity(m);
        let mut grads = Vec::with_capacity(m);
        values.push(self.db.value_under(0, x, &transforms[0])?);
        grads.push(Vec::new());
        for (j, q) in transforms.iter().enumerate().skip(1) {
            let (v, g) = self.db.value_and_transform_gradient(j, x, q, &self.steps)?;
            values.push(v);
            grads.push(g);
        }
        Ok(EntryJet { values, grads })
    }

    /// `sum_{j<k} (v_j - v_k)^2`, pairwise rather than through the
    /// `m sum v^2 - (sum v)^2` identity to avoid cancellation.
    fn pair_sum(values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..values.len() {
            for k in j + 1..values.len() {
                acc += (values[j] - values[k]).powi(2);
            }
        }
        acc
    }

    /// Stacked residuals `e`, ordered by pair `(j < k)` then node.
    pub fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.residual_jacobian_impl(x, false)?.0)
    }

    /// Residuals and the full Jacobian `de/dq` (columns for entries `1..m`).
    pub fn residual_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.residual_jacobian_impl(x, true)
    }

    fn residual_jacobian_impl(
        &self,
        x: &DVector<f64>,
        with_jacobian: bool,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let transforms = self.transforms_of(x)?;
        let m = self.db.len();
        let n = self.quad.len();
        let pairs = m * (m - 1) / 2;
        let jets: Vec<EntryJet> = self
            .quad
            .nodes()
            .par_iter()
            .map(|node| {
                if with_jacobian {
                    self.node_jet(&transforms, node)
                } else {
                    self.node_values(&transforms, node)
                        .map(|values| EntryJet { values, grads: Vec::new() })
                }
            })
            .collect::<Result<_>>()?;
        let p = self.per_entry;
        let mut e = DVector::zeros(pairs * n);
        let mut jac = if with_jacobian {
            DMatrix::zeros(pairs * n, self.n_params())
        } else {
            DMatrix::zeros(0, 0)
        };
        let mut row = 0;
        for j in 0..m {
            for k in j + 1..m {
                for (i, jet) in jets.iter().enumerate() {
                    let sw = self.quad.weights()[i].sqrt();
                    e[row] = sw * (jet.values[j] - jet.values[k]);
                    if with_jacobian {
                        if j > 0 {
                            for (c, g) in jet.grads[j].iter().enumerate() {
                                jac[(row, (j - 1) * p + c)] = sw * g;
                            }
                        }
                        for (c, g) in jet.grads[k].iter().enumerate() {
                            jac[(row, (k - 1) * p + c)] = -sw * g;
                        }
                    }
                    row += 1;
                }
            }
        }
        Ok((e, jac))
    }

    fn accumulate(&self, x: &DVector<f64>) -> Result<Partial> {
        let transforms = self.transforms_of(x)?;
        let np = self.n_params();
        let p = self.per_entry;
        let m = self.db.len();
        let nodes = self.quad.nodes();
        let weights = self.quad.weights();
        let chunks: Vec<Partial> = (0..nodes.len())
            .collect::<Vec<_>>()
            .par_chunks(NODE_CHUNK)
            .map(|idx| -> Result<Partial> {
                let mut part = Partial {
                    ssd: 0.0,
                    jte: DVector::zeros(np),
                    jtj: DMatrix::zeros(np, np),
                };
                for &i in idx {
                    let w = weights[i];
                    let jet = self.node_jet(&transforms, &nodes[i])?;
                    part.ssd += w * Self::pair_sum(&jet.values);
                    let s1: f64 = jet.values.iter().sum();
                    for j in 1..m {
                        let gj = &jet.grads[j];
                        // entry j appears in m - 1 pairs
                        let coeff = w * (m as f64 * jet.values[j] - s1);
                        for c in 0..p {
                            part.jte[(j - 1) * p + c] += coeff * gj[c];
                        }
                        for k in 1..m {
                            let gk = &jet.grads[k];
                            let factor = if j == k { w * (m as f64 - 1.0) } else { -w };
                            for a in 0..p {
                                let row = (j - 1) * p + a;
                                let fa = factor * gj[a];
                                for b in 0..p {
                                    part.jtj[(row, (k - 1) * p + b)] += fa * gk[b];
                                }
                            }
                        }
                    }
                }
                Ok(part)
            })
            .collect::<Result<_>>()?;
        let mut total = Partial {
            ssd: 0.0,
            jte: DVector::zeros(np),
            jtj: DMatrix::zeros(np, np),
        };
        for c in chunks {
            total.ssd += c.ssd;
            total.jte += c.jte;
            total.jtj += c.jtj;
        }
        Ok(total)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl LeastSquaresProblem for AlignmentProblem<'_> {
    fn n_params(&self) -> usize {
        (self.db.len() - 1) * self.per_entry
    }

    fn cost(&self, x: &DVector<f64>) -> Result<f64> {
        let transforms = self.transforms_of(x)?;
        let nodes = self.quad.nodes();
        let weights = self.quad.weights();
        let parts: Vec<f64> = (0..nodes.len())
            .collect::<Vec<_>>()
            .par_chunks(NODE_CHUNK)
            .map(|idx| -> Result<f64> {
                let mut acc = 0.0;
                for &i in idx {
                    acc += weights[i] * Self::pair_sum(&self.node_values(&transforms, &nodes[i])?);
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let ssd: f64 = parts.iter().sum();
        Ok(self.prefactor * ssd + 0.5 * self.delta * x.norm_squared())
    }

    fn linearize(&self, x: &DVector<f64>) -> Result<Linearization> {
        let np = self.n_params();
        let (ssd, jte, jtj) = match self.mode {
            JacobianMode::Accumulate => {
                let part = self.accumulate(x)?;
                (part.ssd, part.jte, part.jtj)
            }
            JacobianMode::Stored => {
                let (e, j) = self.residual_jacobian(x)?;
                (e.norm_squared(), j.transpose() * &e, j.transpose() * &j)
            }
        };
        let c2 = 2.0 * self.prefactor;
        let gradient = jte * c2 + x * self.delta;
        let mut hessian = jtj * c2;
        for i in 0..np {
            hessian[(i, i)] += self.delta;
        }
        // symmetrize against rounding in the accumulation
        let hessian = (&hessian + hessian.transpose()) * 0.5;
        Ok(Linearization {
            cost: self.prefactor * ssd + 0.5 * self.delta * x.norm_squared(),
            gradient,
            hessian,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::domain::{Domain, FnSurface, ResponseSurface};
    use crate::optim::finite_difference_gradient;

    fn surface(f: fn(&[f64]) -> f64) -> Arc<dyn ResponseSurface> {
        Arc::new(FnSurface::new(2, f))
    }

    fn bump(x: &[f64]) -> f64 {
        (-(x[0] - 2.0).powi(2) - 0.5 * (x[1] - 1.5).powi(2)).exp() + 0.2 * x[1]
    }

    fn shifted_bump(x: &[f64]) -> f64 {
        bump(&[x[0] - 0.3, x[1]])
    }

    fn domain() -> Domain {
        Domain::new(vec![0.0, 0.0], vec![4.0, 4.0]).unwrap()
    }

    #[test]
    fn hand_quadrature_of_unit_offset() {
        let d = Domain::unit(1);
        let a: Arc<dyn ResponseSurface> = Arc::new(FnSurface::new(1, |x: &[f64]| x[0]));
        let b: Arc<dyn ResponseSurface> = Arc::new(FnSurface::new(1, |x: &[f64]| x[0] + 1.0));
        let db = AlignedDatabase::new(vec![a, b], d.clone()).unwrap();
        let quad = QuadratureRule::trapezoid(&d, 11);
        let v = ssd_objective(&db, &quad, 0.0).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_entries_give_zero_and_penalty_only() {
        let db = AlignedDatabase::new(vec![surface(bump), surface(bump)], domain()).unwrap();
        let quad = QuadratureRule::trapezoid(db.domain(), 9);
        assert_eq!(ssd_objective(&db, &quad, 1.0).unwrap(), 0.0);

        let q = AlignmentTransform::from_params(vec![0.0, 0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let moved = db
            .clone()
            .with_transforms(vec![AlignmentTransform::identity(2), q])
            .unwrap();
        let ssd = ssd_term(&moved, &quad).unwrap();
        let total = ssd_objective(&moved, &quad, 2.0).unwrap();
        assert!((total - ssd - 0.01).abs() < 1e-14);
    }

    #[test]
    fn identical_entries_align_to_identity() {
        let db = AlignedDatabase::new(
            vec![surface(bump), surface(bump), surface(bump)],
            domain(),
        )
        .unwrap();
        let quad = QuadratureRule::trapezoid(db.domain(), 9);
        let out = align_database(&db, &quad, &AlignmentConfig::default()).unwrap();
        for t in out.database.transforms() {
            assert!(t.params().iter().all(|v| v.abs() <= 1e-6));
        }
        assert!(out.objective_after <= 1e-12);
    }

    #[test]
    fn recovers_known_shift() {
        let db =
            AlignedDatabase::new(vec![surface(bump), surface(shifted_bump)], domain()).unwrap();
        let quad = QuadratureRule::trapezoid(db.domain(), 17);
        let out = align_database(
            &db,
            &quad,
            &AlignmentConfig {
                delta: Some(1e-6),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(out.ssd_after <= 0.01 * out.ssd_before, "{out:?}");
        assert!(out.objective_after <= out.objective_before);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        let q = &out.database.transforms()[1];
        assert!((q.axis_shift(0) - 0.3).abs() < 1e-2, "{q:?}");
    }

    #[test]
    fn heavy_penalty_pins_transforms() {
        let db =
            AlignedDatabase::new(vec![surface(bump), surface(shifted_bump)], domain()).unwrap();
        let quad = QuadratureRule::trapezoid(db.domain(), 9);
        let out = align_database(
            &db,
            &quad,
            &AlignmentConfig {
                delta: Some(1e6),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(out.database.transforms()[1]
            .params()
            .iter()
            .all(|v| v.abs() <= 1e-3));
    }

    #[test]
    fn modes_agree_and_gradient_matches_differences() {
        let db = AlignedDatabase::new(
            vec![surface(bump), surface(shifted_bump), surface(|x| bump(x) * 1.1 + 0.05)],
            domain(),
        )
        .unwrap();
        let quad = QuadratureRule::trapezoid(db.domain(), 7);
        let acc = AlignmentProblem::new(&db, &quad, 0.3, JacobianMode::Accumulate).unwrap();
        let sto = AlignmentProblem::new(&db, &quad, 0.3, JacobianMode::Stored).unwrap();
        let x = DVector::from_fn(12, |i, _| 0.01 * ((i * 7 % 5) as f64 - 2.0));
        let la = acc.linearize(&x).unwrap();
        let ls = sto.linearize(&x).unwrap();
        assert!((la.cost - ls.cost).abs() < 1e-12);
        assert!((&la.gradient - &ls.gradient).amax() < 1e-10);
        assert!((&la.hessian - &ls.hessian).amax() < 1e-10);

        let fd = finite_difference_gradient(|p| acc.cost(p).unwrap(), &x, 1e-6);
        for i in 0..12 {
            let scale = fd[i].abs().max(1e-3);
            assert!((fd[i] - la.gradient[i]).abs() / scale < 1e-5, "{i}");
        }
    }

    #[test]
    fn swapping_non_reference_entries_is_neutral() {
        let q1 = AlignmentTransform::from_params(vec![0.02, 0.1, 0.0, -0.05, 0.1, 0.0]).unwrap();
        let q2 = AlignmentTransform::from_params(vec![-0.01, 0.0, 0.03, 0.0, 0.0, 0.2]).unwrap();
        let a = AlignedDatabase::new(
            vec![surface(bump), surface(shifted_bump), surface(|x| x[0] * x[1] * 0.1)],
            domain(),
        )
        .unwrap()
        .with_transforms(vec![AlignmentTransform::identity(2), q1.clone(), q2.clone()])
        .unwrap();
        let b = AlignedDatabase::new(
            vec![surface(bump), surface(|x| x[0] * x[1] * 0.1), surface(shifted_bump)],
            domain(),
        )
        .unwrap()
        .with_transforms(vec![AlignmentTransform::identity(2), q2, q1])
        .unwrap();
        let quad = QuadratureRule::trapezoid(a.domain(), 9);
        let va = ssd_objective(&a, &quad, 0.5).unwrap();
        let vb = ssd_objective(&b, &quad, 0.5).unwrap();
        assert!((va - vb).abs() <= 1e-12 * va.abs().max(1.0));
    }
}
