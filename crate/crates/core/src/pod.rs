//! Proper orthogonal decomposition of an aligned database.
//!
//! With `m` entries the continuous eigenproblem reduces to the `m x m`
//! covariance matrix `C_ij = (ybar_i, ybar_j)`. Its eigenpairs `(lambda_k, v^k)`
//! give the modes `psi_k = sum_j v^k_j ybar_j / sqrt(lambda_k)`, so that the
//! whole basis is `psi(x) = ybar(x) V_l Sigma_l^-1` and never needs to be
//! tabulated: every evaluation goes through the database once.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{AlignedDatabase, QuadratureRule};
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest are never selected.
pub const NEGLIGIBLE_EIGENVALUE: f64 = 1e-12;

/// Default cumulative-energy threshold for the rank.
pub const DEFAULT_THRESHOLD: f64 = 0.999;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PodVariant {
    #[default]
    Plain,
    /// Modes of the entries minus their pointwise mean.
    MeanCentered,
}

/// Quadrature approximation of the Gram matrix of the aligned entries.
#[derive(Clone, Debug)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
    database: AlignedDatabase,
    variant: PodVariant,
}

impl CovarianceMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn database(&self) -> &AlignedDatabase {
        &self.database
    }

    pub fn variant(&self) -> PodVariant {
        self.variant
    }
}

/// Aligned values of every entry at every point: row `i` is `ybar(points[i])`.
pub fn entry_matrix(db: &AlignedDatabase, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| db.aligned_values(x))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(points.len(), db.len(), |i, j| rows[i][j]))
}

pub fn covariance_matrix(db: &AlignedDatabase, quad: &QuadratureRule) -> Result<CovarianceMatrix> {
    covariance_matrix_with(db, quad, PodVariant::Plain)
}

pub fn covariance_matrix_with(
    db: &AlignedDatabase,
    quad: &QuadratureRule,
    variant: PodVariant,
) -> Result<CovarianceMatrix> {
    let y = entry_matrix(db, quad.nodes())?;
    let m = db.len();
    let w = quad.weights();
    // upper triangle row by row, then mirrored
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (i..m)
                .map(|j| {
                    y.column(i)
                        .iter()
                        .zip(y.column(j).iter())
                        .zip(w)
                        .map(|((a, b), w)| a * b * w)
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut c = DMatrix::zeros(m, m);
    for (i, row) in rows.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            c[(i, i + off)] = *v;
            c[(i + off, i)] = *v;
        }
    }
    if variant == PodVariant::MeanCentered {
        let p = centering(m);
        c = &p * c * &p;
        c = (&c + c.transpose()) * 0.5;
    }
    Ok(CovarianceMatrix {
        matrix: c,
        database: db.clone(),
        variant,
    })
}

fn centering(m: usize) -> DMatrix<f64> {
    DMatrix::identity(m, m) - DMatrix::from_element(m, m, 1.0 / m as f64)
}

/// Eigenvalues in descending order with matching unit eigenvectors as
/// columns. The largest-magnitude component of each eigenvector is positive.
pub fn sorted_eigen(c: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(c.clone());
    let m = c.nrows();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(m, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).clone_owned();
        let lead = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(dst, &v);
    }
    (values, vectors)
}

/// Number of eigenvalues at or above [`NEGLIGIBLE_EIGENVALUE`] times the
/// largest.
pub fn numerical_rank(eigenvalues: &[f64]) -> usize {
    match eigenvalues.first() {
        Some(&top) if top > 0.0 => eigenvalues
            .iter()
            .take_while(|&&v| v >= NEGLIGIBLE_EIGENVALUE * top)
            .count(),
        _ => 0,
    }
}

/// Smallest `l` whose leading eigenvalues hold at least `threshold` of the
/// total. `eigenvalues` must be sorted descending.
pub fn select_rank(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!("threshold {threshold} not in (0, 1]")));
    }
    let usable = numerical_rank(eigenvalues);
    if usable == 0 {
        return Err(Error::DegenerateSpectrum {
            numerical_rank: 0,
            size: eigenvalues.len(),
        });
    }
    let total: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut acc = 0.0;
    for (k, v) in eigenvalues.iter().take(usable).enumerate() {
        acc += v;
        // allow for rounding in the running sum
        if acc >= (threshold - 1e-13) * total {
            return Ok(k + 1);
        }
    }
    Err(Error::DegenerateSpectrum {
        numerical_rank: usable,
        size: eigenvalues.len(),
    })
}

/// Truncated POD basis tied to its database.
#[derive(Clone, Debug)]
pub struct PodBasis {
    database: AlignedDatabase,
    eigenvalues: DVector<f64>,
    /// `V_l`, `m x l`
    vectors: DMatrix<f64>,
    threshold: f64,
    variant: PodVariant,
    /// `psi(x) = ybar(x) * coef`
    coef: DMatrix<f64>,
    /// Weights of the mean entry; zero for the plain variant.
    offset: DVector<f64>,
}

pub fn compute_pod(cov: &CovarianceMatrix, threshold: f64) -> Result<PodBasis> {
    let (values, vectors) = sorted_eigen(&cov.matrix);
    let l = select_rank(values.as_slice(), threshold)?;
    PodBasis::from_parts(
        cov.database.clone(),
        values,
        vectors.columns(0, l).clone_owned(),
        threshold,
        cov.variant,
    )
}

/// Basis of a prescribed rank, bypassing the threshold rule.
pub fn compute_pod_with_rank(cov: &CovarianceMatrix, rank: usize) -> Result<PodBasis> {
    let (values, vectors) = sorted_eigen(&cov.matrix);
    let usable = numerical_rank(values.as_slice());
    if rank == 0 || rank > usable {
        return Err(Error::DegenerateSpectrum {
            numerical_rank: usable,
            size: values.len(),
        });
    }
    let kept: f64 = values.iter().take(rank).sum();
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    PodBasis::from_parts(
        cov.database.clone(),
        values,
        vectors.columns(0, rank).clone_owned(),
        (kept / total).min(1.0),
        cov.variant,
    )
}

impl PodBasis {
    /// Reassemble a basis from stored eigen-data.
    pub fn from_parts(
        database: AlignedDatabase,
        eigenvalues: DVector<f64>,
        vectors: DMatrix<f64>,
        threshold: f64,
        variant: PodVariant,
    ) -> Result<Self> {
        let m = database.len();
        let l = vectors.ncols();
        if vectors.nrows() != m || eigenvalues.len() != m || l == 0 || l > m {
            return Err(Error::InvalidInput(format!(
                "pod data of shape {}x{l} with {} eigenvalues does not fit {m} entries",
                vectors.nrows(),
                eigenvalues.len()
            )));
        }
        if let Some(k) = (0..l).find(|&k| eigenvalues[k] <= 0.0) {
            return Err(Error::DegenerateSpectrum {
                numerical_rank: k,
                size: m,
            });
        }
        let mut coef = vectors.clone();
        for k in 0..l {
            let s = eigenvalues[k].sqrt();
            coef.column_mut(k).unscale_mut(s);
        }
        let offset = match variant {
            PodVariant::Plain => DVector::zeros(m),
            PodVariant::MeanCentered => {
                coef = centering(m) * coef;
                DVector::from_element(m, 1.0 / m as f64)
            }
        };
        Ok(Self {
            database,
            eigenvalues,
            vectors,
            threshold,
            variant,
            coef,
            offset,
        })
    }

    pub fn rank(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn dim(&self) -> usize {
        self.database.dim()
    }

    pub fn database(&self) -> &AlignedDatabase {
        &self.database
    }

    /// All `m` eigenvalues, descending.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Diagonal of `Sigma_l`.
    pub fn sigma(&self) -> Vec<f64> {
        (0..self.rank()).map(|k| self.eigenvalues[k].sqrt()).collect()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn variant(&self) -> PodVariant {
        self.variant
    }

    /// `m x l` map from entry values to mode values.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coef
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// Same eigen-data with only the leading `l` modes.
    pub fn truncated(&self, l: usize) -> Result<Self> {
        if l == 0 || l > self.rank() {
            return Err(Error::InvalidInput(format!(
                "cannot truncate rank {} basis to {l}",
                self.rank()
            )));
        }
        Self::from_parts(
            self.database.clone(),
            self.eigenvalues.clone(),
            self.vectors.columns(0, l).clone_owned(),
            self.threshold,
            self.variant,
        )
    }

    /// All modes at `x` from a single pass over the database.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = DVector::from_vec(self.database.aligned_values(x)?);
        Ok((self.coef.transpose() * y).as_slice().to_vec())
    }

    /// Modes at many points: row `i` is `psi(points[i])`.
    pub fn eval_many(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        Ok(entry_matrix(&self.database, points)? * &self.coef)
    }

    /// Entry weights `a_y` with `ybar(x) . a_y = mean(x) + psi(x) . a_psi`.
    pub fn pullback(&self, a_psi: &[f64]) -> DVector<f64> {
        &self.offset + &self.coef * DVector::from_column_slice(a_psi)
    }

    /// Mean entry at `x` (zero for the plain variant).
    pub fn mean_value(&self, x: &[f64]) -> Result<f64> {
        if self.variant == PodVariant::Plain {
            return Ok(0.0);
        }
        let y = self.database.aligned_values(x)?;
        Ok(y.iter().sum::<f64>() / y.len() as f64)
    }
}

/// `sum_k lambda_k` over the modes not kept, i.e. the projection error the
/// truncated basis leaves on the database.
pub fn discarded_energy(basis: &PodBasis) -> f64 {
    basis
        .eigenvalues
        .iter()
        .skip(basis.rank())
        .map(|v| v.max(0.0))
        .sum()
}

pub fn basis_eval(basis: &PodBasis, x: &[f64]) -> Result<Vec<f64>> {
    basis.eval(x)
}
