//! Drift certificate PV <= alpha V + L for V(n) = tau^(-n/2).

use std::collections::BTreeMap;

use bandchain::bounds::{drift_constants, drift_ratio, drift_violation, solve_tau};
use bandchain::kernel::{BandKernel, Row};

fn main() -> bandchain::Result<()> {
    let incr: BTreeMap<i64, f64> = [(-1, 0.75), (1, 0.25)].into_iter().collect();
    let row: Row = [(0, 0.75), (1, 0.25)].into_iter().collect();
    let e1 = BandKernel::homogeneous_rw(1, 1, &incr, vec![row])?;
    let tau = solve_tau(e1.limit_law())?;

    for i in [0, 1, 2, 50, 10_000] {
        println!("(PV)({i})/V({i}) = {:.15}", drift_ratio(&e1, tau, i)?);
    }

    for alpha in [0.75f64.sqrt() + 1e-9, 0.9, 0.99] {
        let cert = drift_constants(&e1, tau, alpha, 200)?;
        let worst = drift_violation(&e1, tau, &cert, 2000)?;
        println!(
            "alpha = {:.9}: gamma = {:.6}, L = {:.7}, worst slack on 0..=2000 = {:.2e}",
            cert.alpha, cert.gamma, cert.l, worst
        );
    }

    match drift_constants(&e1, tau, 0.5, 200) {
        Err(e) => println!("alpha = 0.5: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
