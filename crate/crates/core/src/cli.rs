//! Command-line front end.
//!
//! Settings come from built-in defaults, then an optional TOML file
//! (`--config`), then command-line flags, each layer overriding the one
//! before. Every command prints a JSON summary on stdout. Failures print
//! `{"error": <kind>, "message": <text>}` on stderr and exit nonzero.
//! `GENSURR_THREADS` caps the worker pool size.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::alignment::{align_database, AlignmentConfig, JacobianMode, QuadratureRule};
use crate::domain::{ResponseSurface, SampleSet};
use crate::error::{Error, Result};
use crate::experiment::{
    fit_gsm, fit_hierarchical, fit_kriging, run_sweep, ExperimentSetup, Method, ModelConfig,
    Pipeline, PreparedBases, SweepConfig,
};
use crate::persist::{
    load_gsm, load_pod, read_points_csv, read_samples_csv, save_gsm, save_pod, write_atomic,
    write_json, AlignmentRecord, DatabaseDir, PodFile,
};
use crate::pod::{compute_pod, covariance_matrix_with, PodVariant};
use crate::sampling::{latin_hypercube, run_adaptive, trace_csv, AdaptivePlan, Strategy};
use crate::testbed::{build_synthetic_database, FamilyConfig, SyntheticDatabase, ValidationGrid};

pub const THREADS_ENV: &str = "GENSURR_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub database: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            database: "db".into(),
            output: "out".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentSection {
    pub delta: Option<f64>,
    pub quadrature_nodes: usize,
    pub mode: JacobianMode,
}

impl Default for AlignmentSection {
    fn default() -> Self {
        Self {
            delta: None,
            quadrature_nodes: crate::alignment::DEFAULT_QUADRATURE_NODES,
            mode: JacobianMode::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodSection {
    pub threshold: f64,
    pub variant: PodVariant,
}

impl Default for PodSection {
    fn default() -> Self {
        Self {
            threshold: crate::pod::DEFAULT_THRESHOLD,
            variant: PodVariant::Plain,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub methods: Vec<Method>,
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub base_seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        let d = SweepConfig::default();
        Self {
            methods: d.methods,
            sizes: d.sizes,
            repeats: d.repeats,
            base_seed: d.base_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveSection {
    pub strategy: Strategy,
    pub method: Method,
    pub initial: usize,
    pub budget: usize,
    pub seed: u64,
}

impl Default for AdaptiveSection {
    fn default() -> Self {
        Self {
            strategy: Strategy::Discrepancy,
            method: Method::HkGsm,
            initial: 5,
            budget: 20,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSection {
    pub per_axis: usize,
}

impl Default for ValidationSection {
    fn default() -> Self {
        Self { per_axis: 40 }
    }
}

/// Everything the commands can be told, as read from the TOML file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: Paths,
    pub family: FamilyConfig,
    pub alignment: AlignmentSection,
    pub pod: PodSection,
    pub model: ModelConfig,
    pub sweep: SweepSection,
    pub adaptive: AdaptiveSection,
    pub validation: ValidationSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format {
            what: "config".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.family.m < 2 {
            return bad(format!("family.m must be at least 2, got {}", self.family.m));
        }
        if !(self.pod.threshold > 0.0 && self.pod.threshold <= 1.0) {
            return bad(format!("pod.threshold must lie in (0, 1], got {}", self.pod.threshold));
        }
        if self.alignment.quadrature_nodes < 2 || self.validation.per_axis < 2 {
            return bad("quadrature and validation grids need at least 2 nodes per axis".into());
        }
        if self.sweep.sizes.is_empty() || self.sweep.sizes.contains(&0) || self.sweep.repeats == 0 {
            return bad("sweep sizes and repeats must be positive".into());
        }
        if self.adaptive.initial == 0 || self.adaptive.budget < self.adaptive.initial {
            return bad(format!(
                "adaptive budget {} must be at least the initial size {} (> 0)",
                self.adaptive.budget, self.adaptive.initial
            ));
        }
        for d in [self.alignment.delta, self.model.gappy.delta].into_iter().flatten() {
            if !(d >= 0.0 && d.is_finite()) {
                return bad(format!("penalty weights must be finite and nonnegative, got {d}"));
            }
        }
        Ok(())
    }

    fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            methods: self.sweep.methods.clone(),
            sizes: self.sweep.sizes.clone(),
            repeats: self.sweep.repeats,
            base_seed: self.sweep.base_seed,
            model: self.model.clone(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gensurrogate", version, about = "Generic surrogate modeling pipeline")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Database directory.
    #[arg(long, global = true)]
    pub db: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic database from the analytic family.
    GenDb {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_distortions: bool,
        #[arg(long)]
        spread: Option<f64>,
    },
    /// Align the database entries and record the transforms.
    Align {
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Compute the POD basis of the database in its current alignment.
    Pod {
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        mean_centered: bool,
    },
    /// Fit a generic surrogate model to samples (CSV: x1..xd,value).
    FitGsm {
        #[arg(long)]
        samples: PathBuf,
        /// Linear gappy fit without transformation.
        #[arg(long)]
        linear: bool,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Predict at points (CSV: x1..xd) with the fitted model.
    Predict {
        #[arg(long)]
        points: PathBuf,
        /// `hk` (hierarchical on the stored GSM) or `kriging`.
        #[arg(long, default_value = "hk")]
        model: String,
        /// Write predictions here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Latin hypercube sweep comparing the methods.
    Experiment {
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Adaptive sampling run from a small initial design.
    Adaptive {
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        initial: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

impl Cli {
    /// Defaults, then the file, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.db {
            cfg.paths.database = p.clone();
        }
        if let Some(p) = &self.out {
            cfg.paths.output = p.clone();
        }
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        match &self.command {
            Command::GenDb {
                m,
                seed,
                no_distortions,
                spread,
            } => {
                set(&mut cfg.family.m, m);
                set(&mut cfg.family.seed, seed);
                set(&mut cfg.family.spread, spread);
                if *no_distortions {
                    cfg.family.distortions = false;
                }
            }
            Command::Align { delta, nodes } => {
                if delta.is_some() {
                    cfg.alignment.delta = *delta;
                }
                set(&mut cfg.alignment.quadrature_nodes, nodes);
            }
            Command::Pod {
                threshold,
                nodes,
                mean_centered,
            } => {
                set(&mut cfg.pod.threshold, threshold);
                set(&mut cfg.alignment.quadrature_nodes, nodes);
                if *mean_centered {
                    cfg.pod.variant = PodVariant::MeanCentered;
                }
            }
            Command::FitGsm { delta, .. } => {
                if delta.is_some() {
                    cfg.model.gappy.delta = *delta;
                }
            }
            Command::Predict { .. } => {}
            Command::Experiment {
                methods,
                sizes,
                repeats,
                seed,
            } => {
                set(&mut cfg.sweep.methods, methods);
                set(&mut cfg.sweep.sizes, sizes);
                set(&mut cfg.sweep.repeats, repeats);
                set(&mut cfg.sweep.base_seed, seed);
            }
            Command::Adaptive {
                strategy,
                method,
                initial,
                budget,
                seed,
            } => {
                set(&mut cfg.adaptive.strategy, strategy);
                set(&mut cfg.adaptive.method, method);
                set(&mut cfg.adaptive.initial, initial);
                set(&mut cfg.adaptive.budget, budget);
                set(&mut cfg.adaptive.seed, seed);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Applies `GENSURR_THREADS` to the global worker pool.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

fn quadrature(db: &crate::alignment::AlignedDatabase, nodes: usize) -> QuadratureRule {
    QuadratureRule::trapezoid(db.domain(), nodes)
}

fn holdout(dir: &DatabaseDir) -> Result<SyntheticDatabase> {
    dir.family().map_err(|e| match e {
        Error::Io { path, .. } => Error::InvalidInput(format!(
            "no held-out oracle: {path} is missing (generate the database with gen-db)"
        )),
        e => e,
    })
}

fn aligned_bases(dir: &DatabaseDir) -> Result<PreparedBases> {
    let record = dir
        .manifest
        .alignment
        .clone()
        .ok_or_else(|| Error::InvalidInput("database is not aligned; run align first".into()))?;
    let aligned = load_pod(dir)?;
    let pod: PodFile = crate::persist::read_json(&dir.pod_path())?;
    let unaligned_db = aligned.database().unaligned();
    let quad = quadrature(&unaligned_db, pod.quadrature_nodes);
    let unaligned = compute_pod(
        &covariance_matrix_with(&unaligned_db, &quad, pod.variant)?,
        pod.threshold,
    )?;
    Ok(PreparedBases {
        aligned,
        unaligned,
        ssd_before: record.ssd_before,
        ssd_after: record.ssd_after,
    })
}

fn setup_for(dir: &DatabaseDir, cfg: &ExperimentConfig, need_bases: bool) -> Result<ExperimentSetup> {
    let family = holdout(dir)?;
    let oracle: Arc<dyn ResponseSurface> = Arc::new(family.holdout.clone());
    let domain = dir.manifest.domain.clone();
    Ok(ExperimentSetup {
        validation: ValidationGrid::new(&domain, cfg.validation.per_axis, oracle.as_ref())?,
        oracle,
        domain,
        bases: if need_bases { Some(aligned_bases(dir)?) } else { None },
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

/// Runs one parsed command and returns its JSON summary.
pub fn execute(cli: &Cli) -> Result<serde_json::Value> {
    let cfg = cli.resolve()?;
    let db_path = cfg.paths.database.as_path();
    let out = cfg.paths.output.as_path();
    match &cli.command {
        Command::GenDb { .. } => {
            let family = build_synthetic_database(&cfg.family)?;
            let dir = DatabaseDir::create_from_family(db_path, &family)?;
            Ok(json!({
                "database": db_path,
                "m": dir.manifest.m,
                "config_hash": dir.manifest.config_hash,
                "database_hash": dir.hash()?,
            }))
        }
        Command::Align { .. } => {
            let mut dir = DatabaseDir::open(db_path)?;
            let db = dir.database()?.unaligned();
            let quad = quadrature(&db, cfg.alignment.quadrature_nodes);
            let align_cfg = AlignmentConfig {
                delta: cfg.alignment.delta,
                mode: cfg.alignment.mode,
                ..Default::default()
            };
            let outcome = align_database(&db, &quad, &align_cfg)?;
            let record = AlignmentRecord {
                delta: outcome.delta,
                quadrature_nodes: cfg.alignment.quadrature_nodes,
                ssd_before: outcome.ssd_before,
                ssd_after: outcome.ssd_after,
                iterations: outcome.iterations,
            };
            dir.set_alignment(&outcome.database, record.clone())?;
            Ok(json!({
                "alignment": record,
                "transforms": dir.manifest.transforms,
                "database_hash": dir.hash()?,
            }))
        }
        Command::Pod { .. } => {
            let dir = DatabaseDir::open(db_path)?;
            let db = dir.database()?;
            let quad = quadrature(&db, cfg.alignment.quadrature_nodes);
            let cov = covariance_matrix_with(&db, &quad, cfg.pod.variant)?;
            let basis = compute_pod(&cov, cfg.pod.threshold)?;
            let file = save_pod(&dir, &basis, cfg.alignment.quadrature_nodes)?;
            Ok(json!({
                "rank": file.rank,
                "eigenvalues": file.eigenvalues,
                "threshold": file.threshold,
                "aligned": dir.manifest.alignment.is_some(),
            }))
        }
        Command::FitGsm {
            samples, linear, ..
        } => {
            let dir = DatabaseDir::open(db_path)?;
            let basis = load_pod(&dir)?;
            let samples = read_samples_csv(samples)?;
            let gsm = fit_gsm(&basis, &samples, !linear, &cfg.model.gappy)?;
            let file = save_gsm(&dir, &gsm, &samples)?;
            Ok(json!({
                "kind": file.kind,
                "rank": file.a_psi.len(),
                "a_psi": file.a_psi,
                "p": file.p,
                "residual": file.residual,
            }))
        }
        Command::Predict {
            points,
            model,
            output,
        } => {
            let dir = DatabaseDir::open(db_path)?;
            let points = read_points_csv(points)?;
            let (gsm, samples) = load_gsm(&dir)?;
            let domain = dir.manifest.domain.clone();
            let kriging = fit_kriging(&samples, &domain, cfg.model.family)?;
            let predictions: Vec<(f64, f64)> = match model.as_str() {
                "kriging" => points
                    .iter()
                    .map(|x| (kriging.predict(x), kriging.predict_mse(x)))
                    .collect(),
                "hk" => {
                    let hk = fit_hierarchical(&samples, gsm, &domain, &cfg.model, &kriging)?;
                    points
                        .iter()
                        .map(|x| Ok((hk.predict(x)?, hk.predict_mse(x)?)))
                        .collect::<Result<_>>()?
                }
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown model {other:?}; expected hk or kriging"
                    )))
                }
            };
            let d = samples.dim();
            let mut csv: String = (1..=d).map(|k| format!("x{k},")).collect();
            csv.push_str("value,mse\n");
            for (x, (v, mse)) in points.iter().zip(&predictions) {
                if x.len() != d {
                    return Err(Error::InvalidInput(format!("point {x:?} is not {d}-dimensional")));
                }
                for c in x {
                    csv.push_str(&format!("{c:e},"));
                }
                csv.push_str(&format!("{v:e},{mse:e}\n"));
            }
            match output {
                Some(p) => write_text(p, &csv)?,
                None => print!("{csv}"),
            }
            Ok(json!({ "model": model, "points": points.len() }))
        }
        Command::Experiment { .. } => {
            let dir = DatabaseDir::open(db_path)?;
            let sweep = cfg.sweep_config();
            let need = sweep.methods.iter().any(|m| *m != Method::Kriging);
            let setup = setup_for(&dir, &cfg, need)?;
            let start = Instant::now();
            let report = run_sweep(&setup, &sweep)?;
            let wall = start.elapsed().as_secs_f64();
            write_text(&out.join("experiment.csv"), &report.to_csv())?;
            write_text(&out.join("experiment_means.csv"), &report.aggregates_csv())?;
            write_json(&out.join("experiment.json"), &json!({
                "config": cfg,
                "report": report,
                "wall_time_s": wall,
            }))?;
            let failed = report.aggregates.iter().map(|a| a.failed).sum::<usize>();
            Ok(json!({
                "rows": report.rows.len(),
                "failed": failed,
                "means": report.aggregates,
                "output": out,
            }))
        }
        Command::Adaptive { .. } => {
            let dir = DatabaseDir::open(db_path)?;
            let a = &cfg.adaptive;
            let setup = setup_for(&dir, &cfg, a.method != Method::Kriging)?;
            let basis = setup.bases.as_ref().map(|b| match a.method {
                Method::HkGsmNoalign => b.unaligned.clone(),
                _ => b.aligned.clone(),
            });
            let pipeline = Pipeline {
                method: a.method,
                domain: setup.domain.clone(),
                basis,
                config: cfg.model.clone(),
            };
            let initial = SampleSet::from_surface(
                setup.oracle.as_ref(),
                latin_hypercube(a.initial, &setup.domain, a.seed),
            )?;
            let plan = AdaptivePlan {
                strategy: a.strategy,
                initial,
                budget: a.budget,
            };
            let run = run_adaptive(setup.oracle.as_ref(), &plan, &pipeline, &setup.validation)?;
            write_text(
                &out.join("adaptive_trace.csv"),
                &trace_csv(&run.trace, setup.domain.dim()),
            )?;
            write_json(&out.join("adaptive.json"), &json!({ "config": cfg, "trace": run.trace }))?;
            let last = run.trace.last().expect("trace has the initial row");
            Ok(json!({
                "steps": run.trace.len() - 1,
                "n": last.n,
                "eta_1": last.metrics.eta_1,
                "eta_inf": last.metrics.eta_inf,
                "output": out,
            }))
        }
    }
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

/// Entry point of the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match configure_threads().and_then(|()| execute(&cli)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
