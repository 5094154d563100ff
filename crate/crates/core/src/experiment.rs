//! Comparison sweeps: ordinary Kriging against hierarchical Kriging on a
//! generic surrogate model, with and without database alignment, over
//! repeated Latin hypercube designs of several sizes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{align_database, AlignedDatabase, AlignmentConfig, QuadratureRule};
use crate::domain::{Domain, ResponseSurface, SampleSet};
use crate::error::{Error, Result};
use crate::gappy::{fit_linear_model, gappy_fit_transformed, GappyConfig, GenericSurrogateModel};
use crate::hierarchical::{build_hk, fit_hk_hyperparameters, HierarchicalKrigingModel};
use crate::kriging::{
    build_kriging, fit_hyperparameters, CorrelationConfig, CorrelationFamily, KrigingModel,
    RegressionBasis, ThetaBounds,
};
use crate::pod::{compute_pod, covariance_matrix, PodBasis};
use crate::sampling::{latin_hypercube, BuiltModels, Surrogate, SurrogateBuilder};
use crate::testbed::{error_metrics, ErrorMetrics, ValidationGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Kriging,
    /// Aligned database, transformed gappy fit.
    HkGsm,
    /// Unaligned database, linear gappy fit.
    HkGsmNoalign,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Kriging, Method::HkGsm, Method::HkGsmNoalign];

    pub fn name(self) -> &'static str {
        match self {
            Self::Kriging => "kriging",
            Self::HkGsm => "hk-gsm",
            Self::HkGsmNoalign => "hk-gsm-noalign",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}")))
    }
}

/// Where the hierarchical model's `theta` comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaSource {
    /// Maximum likelihood on the hierarchical model itself.
    #[default]
    Refit,
    /// Reuse the ordinary Kriging fit.
    Inherit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub family: CorrelationFamily,
    pub hk_theta: ThetaSource,
    pub gappy: GappyConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: CorrelationFamily::Gaussian,
            hk_theta: ThetaSource::Refit,
            gappy: GappyConfig::default(),
        }
    }
}

/// Ordinary Kriging with constant trend and maximum-likelihood `theta`.
/// A single sample gets the midpoint of the bounds (the likelihood carries
/// no information).
pub fn fit_kriging(samples: &SampleSet, domain: &Domain, family: CorrelationFamily) -> Result<KrigingModel> {
    let bounds = ThetaBounds::default_for(domain, family);
    let corr = if samples.len() >= 2 {
        fit_hyperparameters(samples, RegressionBasis::Constant, family, &bounds)?
    } else {
        geometric_midpoint(&bounds, family)?
    };
    build_kriging(samples, RegressionBasis::Constant, &corr)
}

fn geometric_midpoint(bounds: &ThetaBounds, family: CorrelationFamily) -> Result<CorrelationConfig> {
    let theta = bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .map(|(a, b)| (a * b).sqrt())
        .collect();
    CorrelationConfig::new(family, theta)
}

/// The low-fidelity fit used at `n` samples. The basis is cut to at most
/// `n - 1` modes so the gappy problem stays overdetermined.
pub fn fit_gsm(
    basis: &PodBasis,
    samples: &SampleSet,
    transformed: bool,
    gappy: &GappyConfig,
) -> Result<GenericSurrogateModel> {
    let l = basis.rank().min(samples.len().saturating_sub(1)).max(1);
    let basis = if l < basis.rank() {
        basis.truncated(l)?
    } else {
        basis.clone()
    };
    if transformed {
        gappy_fit_transformed(&basis, samples, gappy)
    } else {
        fit_linear_model(&basis, samples)
    }
}

pub fn fit_hierarchical(
    samples: &SampleSet,
    gsm: GenericSurrogateModel,
    domain: &Domain,
    cfg: &ModelConfig,
    kriging: &KrigingModel,
) -> Result<HierarchicalKrigingModel> {
    let low: Arc<dyn crate::hierarchical::LowFidelity> = Arc::new(gsm);
    let corr = match cfg.hk_theta {
        ThetaSource::Inherit => kriging.correlation().clone().with_nugget(0.0),
        ThetaSource::Refit if samples.len() >= 2 => {
            let bounds = ThetaBounds::default_for(domain, cfg.family);
            fit_hk_hyperparameters(samples, low.as_ref(), cfg.family, &bounds)?
        }
        ThetaSource::Refit => kriging.correlation().clone().with_nugget(0.0),
    };
    build_hk(samples, low, &corr)
}

/// Builds the models of one method from a sample set.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub method: Method,
    pub domain: Domain,
    /// Required for the hierarchical methods.
    pub basis: Option<PodBasis>,
    pub config: ModelConfig,
}

impl SurrogateBuilder for Pipeline {
    fn build(&self, samples: &SampleSet) -> Result<BuiltModels> {
        let kriging = fit_kriging(samples, &self.domain, self.config.family)?;
        if self.method == Method::Kriging {
            return Ok(BuiltModels {
                kriging,
                hierarchical: None,
                fallback: None,
            });
        }
        let basis = self.basis.as_ref().ok_or_else(|| {
            Error::InvalidInput(format!("method {} needs a POD basis", self.method.name()))
        })?;
        let transformed = self.method == Method::HkGsm;
        let hk = fit_gsm(basis, samples, transformed, &self.config.gappy)
            .and_then(|gsm| fit_hierarchical(samples, gsm, &self.domain, &self.config, &kriging));
        Ok(match hk {
            Ok(hk) => BuiltModels {
                kriging,
                hierarchical: Some(hk),
                fallback: None,
            },
            Err(e) => BuiltModels {
                kriging,
                hierarchical: None,
                fallback: Some(e.kind().to_string()),
            },
        })
    }
}

/// POD bases of a database with and without alignment.
#[derive(Clone, Debug)]
pub struct PreparedBases {
    pub aligned: PodBasis,
    pub unaligned: PodBasis,
    pub ssd_before: f64,
    pub ssd_after: f64,
}

pub fn prepare_bases(
    db: &AlignedDatabase,
    quad: &QuadratureRule,
    alignment: &AlignmentConfig,
    threshold: f64,
) -> Result<PreparedBases> {
    let unaligned_db = db.unaligned();
    let outcome = align_database(&unaligned_db, quad, alignment)?;
    Ok(PreparedBases {
        aligned: compute_pod(&covariance_matrix(&outcome.database, quad)?, threshold)?,
        unaligned: compute_pod(&covariance_matrix(&unaligned_db, quad)?, threshold)?,
        ssd_before: outcome.ssd_before,
        ssd_after: outcome.ssd_after,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub base_seed: u64,
    pub model: ModelConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            sizes: vec![5, 7, 10, 15, 20, 30, 40, 50],
            repeats: 10,
            base_seed: 1,
            model: ModelConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    /// The hierarchical model failed and ordinary Kriging was assessed.
    Fallback(String),
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub method: Method,
    pub size: usize,
    pub seed: u64,
    pub status: RowStatus,
    pub metrics: Option<ErrorMetrics>,
    /// Digest of the fitted model parameters.
    pub model_hash: String,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub size: usize,
    /// Rows with metrics.
    pub count: usize,
    pub failed: usize,
    pub mean_eta_1: f64,
    pub mean_eta_inf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Everything a sweep needs besides its configuration.
#[derive(Clone)]
pub struct ExperimentSetup {
    pub oracle: Arc<dyn ResponseSurface>,
    pub domain: Domain,
    pub validation: ValidationGrid,
    pub bases: Option<PreparedBases>,
}

fn model_hash(models: &BuiltModels) -> String {
    let mut h = Sha256::new();
    let k = &models.kriging;
    for v in k.correlation().theta.iter().chain(k.beta()).chain([&k.sigma2()]) {
        h.update(v.to_le_bytes());
    }
    if let Some(hk) = &models.hierarchical {
        for v in hk.correlation().theta.iter().chain([&hk.beta(), &hk.sigma2()]) {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(&h.finalize()[..8])
}

fn run_cell(setup: &ExperimentSetup, cfg: &SweepConfig, method: Method, size: usize, seed: u64) -> ExperimentRow {
    let start = Instant::now();
    let basis = match method {
        Method::Kriging => None,
        Method::HkGsm => setup.bases.as_ref().map(|b| b.aligned.clone()),
        Method::HkGsmNoalign => setup.bases.as_ref().map(|b| b.unaligned.clone()),
    };
    let pipeline = Pipeline {
        method,
        domain: setup.domain.clone(),
        basis,
        config: cfg.model.clone(),
    };
    let result = SampleSet::from_surface(
        setup.oracle.as_ref(),
        latin_hypercube(size, &setup.domain, seed),
    )
    .and_then(|samples| pipeline.build(&samples))
    .and_then(|models| {
        let primary: Surrogate = models.primary();
        let metrics = error_metrics(|x| primary.predict(x), &setup.validation)?;
        Ok((models, metrics))
    });
    let (status, metrics, model_hash) = match result {
        Ok((models, metrics)) => {
            let status = match &models.fallback {
                Some(kind) => RowStatus::Fallback(kind.clone()),
                None => RowStatus::Ok,
            };
            (status, Some(metrics), model_hash(&models))
        }
        Err(e) => (RowStatus::Failed(e.kind().to_string()), None, String::new()),
    };
    ExperimentRow {
        method,
        size,
        seed,
        status,
        metrics,
        model_hash,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Every (method, size, seed) cell, run concurrently; rows come back
/// ordered by method, size and seed.
pub fn run_sweep(setup: &ExperimentSetup, cfg: &SweepConfig) -> Result<ExperimentReport> {
    if cfg.sizes.is_empty() || cfg.sizes.contains(&0) || cfg.repeats == 0 {
        return Err(Error::InvalidInput("sizes and repeats must be positive".into()));
    }
    if cfg.methods.iter().any(|m| *m != Method::Kriging) && setup.bases.is_none() {
        return Err(Error::InvalidInput("hierarchical methods need POD bases".into()));
    }
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &size in &cfg.sizes {
            for r in 0..cfg.repeats as u64 {
                cells.push((method, size, cfg.base_seed + r));
            }
        }
    }
    cells.sort();
    cells.dedup();
    let rows: Vec<ExperimentRow> = cells
        .par_iter()
        .map(|&(method, size, seed)| run_cell(setup, cfg, method, size, seed))
        .collect();
    let aggregates = aggregate(&rows);
    Ok(ExperimentReport { rows, aggregates })
}

/// Arithmetic means per (method, size) over the rows with metrics.
pub fn aggregate(rows: &[ExperimentRow]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(Method, usize), Vec<&ExperimentRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method, r.size)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, size), rows)| {
            let ok: Vec<ErrorMetrics> = rows.iter().filter_map(|r| r.metrics).collect();
            let count = ok.len();
            let mean = |f: fn(&ErrorMetrics) -> f64| {
                if count == 0 {
                    f64::NAN
                } else {
                    ok.iter().map(f).sum::<f64>() / count as f64
                }
            };
            Aggregate {
                method,
                size,
                count,
                failed: rows.len() - count,
                mean_eta_1: mean(|m| m.eta_1),
                mean_eta_inf: mean(|m| m.eta_inf),
            }
        })
        .collect()
}

impl ExperimentReport {
    /// Long format: one line per (method, size, seed, metric). Timing is
    /// left out so that reruns produce identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,size,seed,status,metric,value\n");
        for r in &self.rows {
            let status = match &r.status {
                RowStatus::Ok => "ok".to_string(),
                RowStatus::Fallback(k) => format!("fallback:{k}"),
                RowStatus::Failed(k) => format!("failed:{k}"),
            };
            let values = match r.metrics {
                Some(m) => [format!("{:e}", m.eta_1), format!("{:e}", m.eta_inf)],
                None => [String::new(), String::new()],
            };
            for (metric, value) in ["eta_1", "eta_inf"].iter().zip(values) {
                writeln!(out, "{},{},{},{status},{metric},{value}", r.method.name(), r.size, r.seed)
                    .unwrap();
            }
        }
        out
    }

    /// Means per (method, size) as CSV.
    pub fn aggregates_csv(&self) -> String {
        let mut out = String::from("method,size,count,failed,mean_eta_1,mean_eta_inf\n");
        for a in &self.aggregates {
            writeln!(
                out,
                "{},{},{},{},{:e},{:e}",
                a.method.name(),
                a.size,
                a.count,
                a.failed,
                a.mean_eta_1,
                a.mean_eta_inf
            )
            .unwrap();
        }
        out
    }

    pub fn mean_eta_1(&self, method: Method, size: usize) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.size == size)
            .map(|a| a.mean_eta_1)
    }
}
