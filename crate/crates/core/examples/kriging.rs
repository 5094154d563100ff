//! Ordinary Kriging of a 1-D function from 8 samples, with
//! maximum-likelihood length scale, predictions and error estimates.
//!
//! cargo run --release --example kriging

use gensurrogate::kriging::{
    build_kriging, fit_hyperparameters, CorrelationFamily, RegressionBasis, ThetaBounds,
};
use gensurrogate::sampling::latin_hypercube;
use gensurrogate::{Domain, FnSurface, Result, SampleSet};

fn main() -> Result<()> {
    let f = FnSurface::new(1, |x: &[f64]| (3.0 * x[0]).sin() + 0.5 * x[0]);
    let domain = Domain::new(vec![0.0], vec![4.0])?;
    let samples = SampleSet::from_surface(&f, latin_hypercube(8, &domain, 11))?;

    let family = CorrelationFamily::Gaussian;
    let bounds = ThetaBounds::default_for(&domain, family);
    let corr = fit_hyperparameters(&samples, RegressionBasis::Constant, family, &bounds)?;
    let model = build_kriging(&samples, RegressionBasis::Constant, &corr)?;
    println!("theta = {:.4}, beta = {:.4}, sigma2 = {:.4e}", corr.theta[0], model.beta()[0], model.sigma2());

    println!("{:>6} {:>10} {:>10} {:>10}", "x", "truth", "predicted", "rmse");
    for i in 0..=16 {
        let x = [0.25 * i as f64];
        let truth = (3.0 * x[0]).sin() + 0.5 * x[0];
        println!(
            "{:6.2} {truth:10.4} {:10.4} {:10.2e}",
            x[0],
            model.predict(&x),
            model.predict_mse(&x).sqrt()
        );
    }
    Ok(())
}
