//! A tail given by a row generator rather than fixed increments. Here the
//! up-probability vanishes like 1/i, so the limit law has no positive
//! increments, tau = 0 and alpha0 is the limiting holding probability.

use std::sync::Arc;

use bandchain::analysis::{analyze, AnalysisConfig};
use bandchain::bounds::IncrementLaw;
use bandchain::kernel::{BandKernel, Row};

fn main() -> bandchain::Result<()> {
    let generator = |i: usize| -> Row {
        let up = 0.35 / (i as f64 + 1.0);
        [(i - 1, 0.7 - up), (i, 0.3), (i + 1, up)].into_iter().collect()
    };
    let limit = IncrementLaw::new([(-1, 0.7), (0, 0.3)])?;
    let boundary: Row = [(0, 0.65), (1, 0.35)].into_iter().collect();
    let kernel = BandKernel::varying(1, 1, vec![boundary], Arc::new(generator), limit)?;

    let analysis = analyze(&kernel, &AnalysisConfig::default())?;
    let r = &analysis.report;
    println!("tau = {:?}, alpha0 = {}", r.spectral.tau, r.alpha0_closed);
    println!(
        "empirical alpha0 on {}..={}: {:.6} (the 1/sqrt(i) terms decay slowly)",
        r.spectral.alpha0_empirical.ell, r.spectral.alpha0_empirical.horizon, r.spectral.alpha0_empirical.value
    );
    println!("tau_hat = {}, degenerate = {}", r.stationary.tau_hat, r.stationary.tau_degenerate);
    println!("drift certificate: {:?}", r.spectral.drift);
    for s in &r.sweep {
        println!("k = {:>3}: rho_k = {:?}", s.k, s.rho_k);
    }
    println!("case: {:?}, rho2 = {:.6}", r.case, r.rate.rho2);
    Ok(())
}
