//! Hierarchical Kriging with a generic surrogate model as trend, against
//! ordinary Kriging on the same 10 samples.
//!
//! cargo run --release --example hierarchical

use std::sync::Arc;

use gensurrogate::alignment::{AlignmentConfig, QuadratureRule};
use gensurrogate::experiment::{fit_gsm, fit_hierarchical, fit_kriging, prepare_bases, ModelConfig};
use gensurrogate::sampling::latin_hypercube;
use gensurrogate::testbed::{
    build_synthetic_database, error_metrics, family_domain, FamilyConfig, ValidationGrid,
};
use gensurrogate::{Result, SampleSet};

fn main() -> Result<()> {
    let syn = build_synthetic_database(&FamilyConfig::default())?;
    let db = syn.database()?;
    let quad = QuadratureRule::trapezoid(db.domain(), 33);
    let bases = prepare_bases(&db, &quad, &AlignmentConfig::default(), 0.999)?;

    let domain = family_domain();
    let oracle = Arc::new(syn.holdout.clone());
    let samples = SampleSet::from_surface(oracle.as_ref(), latin_hypercube(10, &domain, 2))?;
    let validation = ValidationGrid::new(&domain, 40, oracle.as_ref())?;
    let cfg = ModelConfig::default();

    let ok = fit_kriging(&samples, &domain, cfg.family)?;
    let gsm = fit_gsm(&bases.aligned, &samples, true, &cfg.gappy)?;
    let hk = fit_hierarchical(&samples, gsm, &domain, &cfg, &ok)?;

    let m_ok = error_metrics(|x| Ok(ok.predict(x)), &validation)?;
    let m_hk = error_metrics(|x| hk.predict(x), &validation)?;
    println!("ordinary Kriging     eta_1 {:.4}  eta_inf {:.4}", m_ok.eta_1, m_ok.eta_inf);
    println!("hierarchical Kriging eta_1 {:.4}  eta_inf {:.4}", m_hk.eta_1, m_hk.eta_inf);
    println!("trend scale beta = {:.4}, theta = {:?}", hk.beta(), hk.correlation().theta);

    let x = [0.6, 5.0];
    println!(
        "at {x:?}: truth {:.4}, HK {:.4} (mse {:.2e}), OK {:.4} (mse {:.2e})",
        gensurrogate::ResponseSurface::value(oracle.as_ref(), &x),
        hk.predict(&x)?,
        hk.predict_mse(&x)?,
        ok.predict(&x),
        ok.predict_mse(&x)
    );
    Ok(())
}
