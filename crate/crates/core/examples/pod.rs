//! POD spectra of a distorted database before and after alignment.
//!
//! cargo run --release --example pod

use gensurrogate::alignment::{align_database, AlignmentConfig, QuadratureRule};
use gensurrogate::pod::{compute_pod, covariance_matrix, discarded_energy};
use gensurrogate::testbed::{build_synthetic_database, FamilyConfig};
use gensurrogate::Result;

fn main() -> Result<()> {
    let syn = build_synthetic_database(&FamilyConfig::default())?;
    let db = syn.database()?;
    let quad = QuadratureRule::trapezoid(db.domain(), 33);
    let aligned = align_database(&db, &quad, &AlignmentConfig::default())?.database;

    for (label, db) in [("unaligned", &db), ("aligned", &aligned)] {
        let basis = compute_pod(&covariance_matrix(db, &quad)?, 0.999)?;
        let total: f64 = basis.eigenvalues().iter().sum();
        println!("{label}: rank {} at threshold 0.999", basis.rank());
        for (k, lambda) in basis.eigenvalues().iter().enumerate() {
            println!("  lambda_{} = {lambda:.4e}  ({:.5} of total)", k + 1, lambda / total);
        }
        println!("  discarded energy {:.3e}", discarded_energy(&basis));
    }
    Ok(())
}
