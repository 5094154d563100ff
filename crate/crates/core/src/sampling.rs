//! Sample plans: Latin hypercube designs and adaptive infill.
//!
//! The adaptive strategies scan a finite candidate grid and pick either the
//! point of largest predicted mean squared error or the point where the
//! hierarchical and ordinary Kriging predictions disagree most.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, ResponseSurface, SampleSet};
use crate::error::{Error, Result};
use crate::hierarchical::HierarchicalKrigingModel;
use crate::kriging::KrigingModel;
use crate::testbed::{error_metrics, ErrorMetrics, ValidationGrid};

/// Relative tolerance for treating a candidate as an existing sample.
pub const CANDIDATE_TOL: f64 = 1e-9;

/// `n` points, one per stratum on every axis, jittered uniformly inside
/// their strata. Deterministic for a given seed.
pub fn latin_hypercube(n: usize, domain: &Domain, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = domain.dim();
    let mut points = vec![vec![0.0; d]; n];
    for k in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (i, s) in strata.into_iter().enumerate() {
            let u = (s as f64 + rng.random::<f64>()) / n as f64;
            points[i][k] = domain.lower()[k] + u * domain.edge(k);
        }
    }
    points
}

fn near(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= CANDIDATE_TOL * (1.0 + x.abs().max(y.abs())))
}

/// Finite set of candidate points with the already sampled ones removed.
#[derive(Clone, Debug)]
pub struct CandidateGrid {
    points: Vec<Vec<f64>>,
}

impl CandidateGrid {
    pub fn new(points: Vec<Vec<f64>>, sampled: &SampleSet) -> Result<Self> {
        let points: Vec<Vec<f64>> = points
            .into_iter()
            .filter(|x| !sampled.points().iter().any(|s| near(s, x)))
            .collect();
        if points.is_empty() {
            return Err(Error::InvalidInput("candidate grid is empty".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Index of the largest score; the first one wins ties.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

fn scan(grid: &CandidateGrid, score: impl Fn(&[f64]) -> Result<f64> + Sync) -> Result<usize> {
    let scores: Vec<f64> = grid
        .points
        .par_iter()
        .map(|x| score(x))
        .collect::<Result<_>>()?;
    argmax_first(&scores).ok_or_else(|| Error::InvalidInput("candidate grid is empty".into()))
}

/// A model under assessment.
#[derive(Clone, Debug)]
pub enum Surrogate {
    Kriging(KrigingModel),
    Hierarchical(HierarchicalKrigingModel),
}

impl Surrogate {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Kriging(m) => Ok(m.predict(x)),
            Self::Hierarchical(m) => m.predict(x),
        }
    }

    pub fn predict_mse(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Kriging(m) => Ok(m.predict_mse(x)),
            Self::Hierarchical(m) => m.predict_mse(x),
        }
    }

    pub fn samples(&self) -> &SampleSet {
        match self {
            Self::Kriging(m) => m.samples(),
            Self::Hierarchical(m) => m.samples(),
        }
    }
}

/// Candidate with the largest predicted mean squared error.
pub fn adaptive_mse_step(model: &Surrogate, grid: &CandidateGrid) -> Result<Vec<f64>> {
    let i = scan(grid, |x| model.predict_mse(x))?;
    Ok(grid.points[i].clone())
}

/// `|a - b|`, with differences at rounding level reported as exactly zero
/// so that identical models tie everywhere.
pub fn discrepancy(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d <= 1e-12 * (1.0 + a.abs().max(b.abs())) {
        0.0
    } else {
        d
    }
}

/// Candidate where hierarchical and ordinary Kriging differ most.
pub fn adaptive_discrepancy_step(
    hk: &HierarchicalKrigingModel,
    kri: &KrigingModel,
    grid: &CandidateGrid,
) -> Result<Vec<f64>> {
    let i = scan(grid, |x| Ok(discrepancy(hk.predict(x)?, kri.predict(x))))?;
    Ok(grid.points[i].clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Mse,
    Discrepancy,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mse => "mse",
            Self::Discrepancy => "discrepancy",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Self::Mse),
            "discrepancy" => Ok(Self::Discrepancy),
            other => Err(Error::InvalidInput(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdaptivePlan {
    pub strategy: Strategy,
    pub initial: SampleSet,
    /// Total number of samples at the end of the run.
    pub budget: usize,
}

/// Models built from one sample set. `hierarchical` is `None` when its
/// build failed and ordinary Kriging stands in.
#[derive(Clone, Debug)]
pub struct BuiltModels {
    pub kriging: KrigingModel,
    pub hierarchical: Option<HierarchicalKrigingModel>,
    /// Why the hierarchical model is missing, if it is.
    pub fallback: Option<String>,
}

impl BuiltModels {
    pub fn primary(&self) -> Surrogate {
        match &self.hierarchical {
            Some(hk) => Surrogate::Hierarchical(hk.clone()),
            None => Surrogate::Kriging(self.kriging.clone()),
        }
    }
}

/// Rebuilds the models after every new sample.
pub trait SurrogateBuilder {
    fn build(&self, samples: &SampleSet) -> Result<BuiltModels>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub n: usize,
    pub strategy: Strategy,
    pub metrics: ErrorMetrics,
    /// Point added at this step; empty for step 0.
    pub x: Vec<f64>,
    pub fallback: Option<String>,
}

#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub models: BuiltModels,
    pub samples: SampleSet,
    pub trace: Vec<TraceRow>,
}

impl AdaptiveRun {
    pub fn history(&self) -> impl Iterator<Item = &[f64]> {
        self.trace.iter().skip(1).map(|r| r.x.as_slice())
    }
}

/// Build, assess, pick a new point, evaluate the oracle there, repeat until
/// the budget is spent. Candidates are the validation grid points.
pub fn run_adaptive(
    oracle: &dyn ResponseSurface,
    plan: &AdaptivePlan,
    builder: &dyn SurrogateBuilder,
    validation: &ValidationGrid,
) -> Result<AdaptiveRun> {
    if plan.budget < plan.initial.len() {
        return Err(Error::InvalidInput(format!(
            "budget {} below initial design size {}",
            plan.budget,
            plan.initial.len()
        )));
    }
    let mut samples = plan.initial.clone();
    let mut models = builder.build(&samples)?;
    let assess = |m: &BuiltModels| {
        let primary = m.primary();
        error_metrics(|x| primary.predict(x), validation)
    };
    let mut trace = vec![TraceRow {
        step: 0,
        n: samples.len(),
        strategy: plan.strategy,
        metrics: assess(&models)?,
        x: Vec::new(),
        fallback: models.fallback.clone(),
    }];
    let mut step = 0;
    while samples.len() < plan.budget {
        step += 1;
        let grid = CandidateGrid::new(validation.points().to_vec(), &samples)?;
        let x = match (plan.strategy, &models.hierarchical) {
            (Strategy::Discrepancy, Some(hk)) => adaptive_discrepancy_step(hk, &models.kriging, &grid)?,
            _ => adaptive_mse_step(&models.primary(), &grid)?,
        };
        samples.push(x.clone(), oracle.value(&x))?;
        models = builder.build(&samples)?;
        trace.push(TraceRow {
            step,
            n: samples.len(),
            strategy: plan.strategy,
            metrics: assess(&models)?,
            x,
            fallback: models.fallback.clone(),
        });
    }
    Ok(AdaptiveRun {
        models,
        samples,
        trace,
    })
}

/// `step,n,strategy,eta_1,eta_inf,x1,...,xd,fallback` rows with a header.
pub fn trace_csv(trace: &[TraceRow], dim: usize) -> String {
    let mut out = String::from("step,n,strategy,eta_1,eta_inf");
    for k in 1..=dim {
        write!(out, ",x{k}").unwrap();
    }
    out.push_str(",fallback\n");
    for r in trace {
        write!(
            out,
            "{},{},{},{:e},{:e}",
            r.step,
            r.n,
            r.strategy.name(),
            r.metrics.eta_1,
            r.metrics.eta_inf
        )
        .unwrap();
        for k in 0..dim {
            match r.x.get(k) {
                Some(v) => write!(out, ",{v:e}").unwrap(),
                None => out.push(','),
            }
        }
        writeln!(out, ",{}", r.fallback.as_deref().unwrap_or("")).unwrap();
    }
    out
}
