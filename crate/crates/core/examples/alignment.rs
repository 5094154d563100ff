//! Align a database of distorted copies of one analytic response and
//! compare the recovered transforms with the known distortions.
//!
//! cargo run --release --example alignment

use gensurrogate::alignment::{align_database, AlignmentConfig, QuadratureRule};
use gensurrogate::testbed::{build_synthetic_database, FamilyConfig};
use gensurrogate::Result;

fn main() -> Result<()> {
    // Identical members (no parameter spread), each behind its own
    // random affine distortion.
    let syn = build_synthetic_database(&FamilyConfig {
        m: 4,
        spread: 0.0,
        ..Default::default()
    })?;
    let db = syn.database()?;
    let quad = QuadratureRule::trapezoid(db.domain(), 33);
    let out = align_database(&db, &quad, &AlignmentConfig::default())?;

    println!(
        "SSD {:.4e} -> {:.4e} ({} Gauss-Newton iterations, delta {:.2e})",
        out.ssd_before, out.ssd_after, out.iterations, out.delta
    );
    // A member is f seen through its distortion, so the transform that
    // aligns it is the distortion itself. Recovery is approximate: the
    // penalty pulls toward zero and some parameter combinations nearly
    // cancel on this family.
    for (j, (q, truth)) in out.database.transforms().iter().zip(&syn.true_transforms).enumerate() {
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:+.4}")).collect::<Vec<_>>().join(" ");
        println!("entry {j}");
        println!("  recovered      {}", fmt(q.params()));
        println!("  true           {}", fmt(truth.params()));
    }
    Ok(())
}
