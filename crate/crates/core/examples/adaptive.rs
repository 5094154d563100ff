//! Adaptive sampling from a 5-point design up to 20 samples, once per
//! infill strategy, printing the error trace.
//!
//! cargo run --release --example adaptive

use gensurrogate::alignment::{AlignmentConfig, QuadratureRule};
use gensurrogate::experiment::{prepare_bases, Method, Pipeline};
use gensurrogate::sampling::{latin_hypercube, run_adaptive, trace_csv, AdaptivePlan, Strategy};
use gensurrogate::testbed::{build_synthetic_database, family_domain, FamilyConfig, ValidationGrid};
use gensurrogate::{Result, SampleSet};

fn main() -> Result<()> {
    let syn = build_synthetic_database(&FamilyConfig::default())?;
    let db = syn.database()?;
    let quad = QuadratureRule::trapezoid(db.domain(), 33);
    let bases = prepare_bases(&db, &quad, &AlignmentConfig::default(), 0.999)?;

    let domain = family_domain();
    let validation = ValidationGrid::new(&domain, 40, &syn.holdout)?;
    let pipeline = Pipeline {
        method: Method::HkGsm,
        domain: domain.clone(),
        basis: Some(bases.aligned),
        config: Default::default(),
    };
    let initial = SampleSet::from_surface(&syn.holdout, latin_hypercube(5, &domain, 1))?;

    for strategy in [Strategy::Mse, Strategy::Discrepancy] {
        let plan = AdaptivePlan {
            strategy,
            initial: initial.clone(),
            budget: 20,
        };
        let run = run_adaptive(&syn.holdout, &plan, &pipeline, &validation)?;
        println!("# {}", strategy.name());
        print!("{}", trace_csv(&run.trace, 2));
    }
    Ok(())
}
