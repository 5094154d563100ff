//! A reduced Latin hypercube comparison of ordinary Kriging and
//! hierarchical Kriging with and without database alignment.
//!
//! cargo run --release --example sweep

use std::sync::Arc;

use gensurrogate::alignment::{AlignmentConfig, QuadratureRule};
use gensurrogate::experiment::{prepare_bases, run_sweep, ExperimentSetup, SweepConfig};
use gensurrogate::testbed::{build_synthetic_database, family_domain, FamilyConfig, ValidationGrid};
use gensurrogate::{ResponseSurface, Result};

fn main() -> Result<()> {
    let syn = build_synthetic_database(&FamilyConfig::default())?;
    let db = syn.database()?;
    let quad = QuadratureRule::trapezoid(db.domain(), 33);
    let bases = prepare_bases(&db, &quad, &AlignmentConfig::default(), 0.999)?;
    println!(
        "POD rank {} aligned, {} unaligned",
        bases.aligned.rank(),
        bases.unaligned.rank()
    );

    let oracle: Arc<dyn ResponseSurface> = Arc::new(syn.holdout.clone());
    let domain = family_domain();
    let setup = ExperimentSetup {
        validation: ValidationGrid::new(&domain, 40, oracle.as_ref())?,
        oracle,
        domain,
        bases: Some(bases),
    };
    let cfg = SweepConfig {
        sizes: vec![5, 10, 20],
        repeats: 5,
        ..Default::default()
    };
    let report = run_sweep(&setup, &cfg)?;
    print!("{}", report.aggregates_csv());
    Ok(())
}
