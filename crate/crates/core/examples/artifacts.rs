//! The offline pipeline through on-disk artifacts: generate a database
//! directory, align it, store its POD basis and a fitted generic surrogate
//! model, reload them, and watch a stale artifact get refused.
//!
//! cargo run --release --example artifacts

use gensurrogate::alignment::{align_database, AlignmentConfig, QuadratureRule};
use gensurrogate::experiment::fit_gsm;
use gensurrogate::gappy::GappyConfig;
use gensurrogate::persist::{load_gsm, load_pod, save_gsm, save_pod, AlignmentRecord, DatabaseDir};
use gensurrogate::pod::{compute_pod, covariance_matrix};
use gensurrogate::sampling::latin_hypercube;
use gensurrogate::testbed::{build_synthetic_database, family_domain, FamilyConfig};
use gensurrogate::{Error, Result, SampleSet};

fn main() -> Result<()> {
    let root = std::env::temp_dir().join("gensurrogate-artifacts-example");
    let syn = build_synthetic_database(&FamilyConfig { m: 5, ..Default::default() })?;
    let mut dir = DatabaseDir::create_from_family(&root, &syn)?;
    println!("database in {}", root.display());

    let nodes = 33;
    let db = dir.database()?;
    let quad = QuadratureRule::trapezoid(db.domain(), nodes);
    let out = align_database(&db, &quad, &AlignmentConfig::default())?;
    let record = AlignmentRecord {
        delta: out.delta,
        quadrature_nodes: nodes,
        ssd_before: out.ssd_before,
        ssd_after: out.ssd_after,
        iterations: out.iterations,
    };
    dir.set_alignment(&out.database, record)?;

    let basis = compute_pod(&covariance_matrix(&dir.database()?, &quad)?, 0.999)?;
    save_pod(&dir, &basis, nodes)?;
    let samples = SampleSet::from_surface(&syn.holdout, latin_hypercube(12, &family_domain(), 3))?;
    let gsm = fit_gsm(&load_pod(&dir)?, &samples, true, &GappyConfig::default())?;
    save_gsm(&dir, &gsm, &samples)?;

    let (reloaded, _) = load_gsm(&dir)?;
    let x = [0.5, 3.0];
    println!("GSM at {x:?}: fitted {:.6}, reloaded {:.6}", gsm.eval(&x)?, reloaded.eval(&x)?);

    // Touching the alignment invalidates everything derived from it.
    let mut transforms = dir.manifest.transforms.clone();
    transforms[1][1] += 1e-3;
    dir.manifest.transforms = transforms;
    dir.save_manifest()?;
    match load_gsm(&dir) {
        Err(e @ Error::Stale { .. }) => println!("after editing the manifest: {e}"),
        other => println!("unexpected: {:?}", other.map(|_| ())),
    }
    Ok(())
}
