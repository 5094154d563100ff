//! Fit the POD modes of an aligned database to 15 samples of a new member,
//! with and without the extra input transformation.
//!
//! cargo run --release --example gappy

use gensurrogate::alignment::{align_database, AlignmentConfig, QuadratureRule};
use gensurrogate::gappy::{fit_linear_model, gappy_fit_transformed, GappyConfig};
use gensurrogate::pod::{compute_pod, covariance_matrix};
use gensurrogate::sampling::latin_hypercube;
use gensurrogate::testbed::{
    build_synthetic_database, error_metrics, family_domain, FamilyConfig, ValidationGrid,
};
use gensurrogate::{Result, SampleSet};

fn main() -> Result<()> {
    let syn = build_synthetic_database(&FamilyConfig::default())?;
    let db = syn.database()?;
    let quad = QuadratureRule::trapezoid(db.domain(), 33);
    let aligned = align_database(&db, &quad, &AlignmentConfig::default())?.database;
    let basis = compute_pod(&covariance_matrix(&aligned, &quad)?, 0.999)?;

    let domain = family_domain();
    let samples = SampleSet::from_surface(&syn.holdout, latin_hypercube(15, &domain, 4))?;
    let validation = ValidationGrid::new(&domain, 40, &syn.holdout)?;

    let linear = fit_linear_model(&basis, &samples)?;
    let transformed = gappy_fit_transformed(&basis, &samples, &GappyConfig::default())?;
    for (label, gsm) in [("linear", &linear), ("transformed", &transformed)] {
        let m = error_metrics(|x| gsm.eval(x), &validation)?;
        println!(
            "{label:>12}: residual {:.3e}, eta_1 {:.4}, eta_inf {:.4}, a = {:?}",
            gsm.residual(),
            m.eta_1,
            m.eta_inf,
            gsm.a_psi()
        );
    }
    println!("transform p = {:?}", transformed.transform().params());
    Ok(())
}
