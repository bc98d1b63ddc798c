//! The three independent checks: characteristic polynomial roots against the
//! QR spectrum, power-iteration decay against rho_k, and the sampled
//! inequality ||Pf||_2 <= alpha ||f||_2 + L ||f||_1.

use std::collections::BTreeMap;

use bandchain::kernel::{BandKernel, Row};
use bandchain::oracle::{
    auto_window, charpoly_spectrum, lemma1_check, lemma1_constant, match_spectra,
    power_decay_rate, random_vectors, DEFAULT_SKIP,
};
use bandchain::stationary::gth_fixed_vector;
use bandchain::truncation::{analyze_truncation, spectrum, truncate_augment};

fn main() -> bandchain::Result<()> {
    let incr: BTreeMap<i64, f64> = [(-1, 0.75), (1, 0.25)].into_iter().collect();
    let row: Row = [(0, 0.75), (1, 0.25)].into_iter().collect();
    let e1 = BandKernel::homogeneous_rw(1, 1, &incr, vec![row])?;

    println!("charpoly vs QR:");
    for k in 2..8 {
        let m = truncate_augment(&e1, k)?;
        let gap = match_spectra(&spectrum(&m)?.eigenvalues, &charpoly_spectrum(&m)?)?;
        println!("  k = {k}: max eigenvalue deviation {gap:.1e}");
    }

    let k = 100;
    let m = truncate_augment(&e1, k)?;
    let pi = gth_fixed_vector(&m)?;
    let rho = analyze_truncation(&e1, k, 1e-9)?.rho_k;
    println!("power iteration on P_{k} (rho_k = {rho:.6}):");
    for f in random_vectors(k + 1, 5, 7) {
        let window = auto_window(&m, &pi, &f, DEFAULT_SKIP, 2000)?;
        let fit = power_decay_rate(&m, &pi, &f, window)?;
        println!("  rate {:.6}, C {:.3}, r^2 {:.5}, window {:?}", fit.rate, fit.prefactor, fit.r_squared, fit.window);
    }

    let k = 200;
    let m = truncate_augment(&e1, k)?;
    let pi = gth_fixed_vector(&m)?;
    let alpha = 0.75f64.sqrt() + 0.02;
    let c = lemma1_constant(&m, &pi, alpha)?;
    let report = lemma1_check(&m, &pi, alpha, c.l, 1000, 42)?;
    println!(
        "Lemma 1 at alpha = {alpha:.4}: L = {:.4} (cutoff {}), {} violations in 1000 samples, max margin {:.3}, smallest L for the sample {:.4}",
        c.l, c.cutoff, report.violations, report.max_violation, report.min_feasible_l
    );
    Ok(())
}
