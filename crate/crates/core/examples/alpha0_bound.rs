//! psi, its subunit root tau, and the essential-radius bound alpha0 computed
//! two ways: from the increment law, and from the stationary law as the sum
//! of sup beta_m(i) over a finite window.

use std::collections::BTreeMap;

use bandchain::bounds::{alpha0_closed_form, alpha0_empirical, solve_tau, IncrementLaw};
use bandchain::kernel::{BandKernel, Row};
use bandchain::stationary::stationary_prefix;

fn walk(increments: &[(i64, f64)], boundary: &[(usize, f64)]) -> BandKernel {
    let incr: BTreeMap<i64, f64> = increments.iter().copied().collect();
    let g = -increments.iter().map(|p| p.0).min().unwrap() as usize;
    let d = increments.iter().map(|p| p.0).max().unwrap() as usize;
    let row: Row = boundary.iter().copied().collect();
    BandKernel::homogeneous_rw(g, d, &incr, vec![row]).unwrap()
}

fn main() -> bandchain::Result<()> {
    let chains = [
        ("E1", walk(&[(-1, 0.75), (1, 0.25)], &[(0, 0.75), (1, 0.25)])),
        ("E2", walk(&[(-1, 0.7), (1, 0.2), (2, 0.1)], &[(0, 0.7), (1, 0.2), (2, 0.1)])),
    ];
    for (name, kernel) in &chains {
        let law = kernel.limit_law();
        let tau = solve_tau(law)?;
        let a0 = alpha0_closed_form(law, tau);
        let pi = stationary_prefix(kernel, 320)?;
        let emp = alpha0_empirical(kernel, &pi, 20, 300)?;
        println!("{name}: mean increment {:+.3}", law.mean_increment());
        println!("  tau            = {:.10}   psi(tau) - 1 = {:.1e}", tau.value(), law.psi(tau.value()) - 1.0);
        println!("  alpha0 closed  = {a0:.10}");
        println!("  alpha0 window  = {:.10}   (ell = {}, horizon = {})", emp.value, emp.ell, emp.horizon);
    }

    // no positive increments: tau = 0 and alpha0 is the holding probability
    let lazy = IncrementLaw::new([(-1, 0.7), (0, 0.3)])?;
    let tau = solve_tau(&lazy)?;
    println!("downward-only law: tau = {:?}, alpha0 = {}", tau, alpha0_closed_form(&lazy, tau));

    // zero drift: no geometric tail
    let flat = IncrementLaw::new([(-1, 0.5), (1, 0.5)])?;
    println!("zero-mean law: {}", solve_tau(&flat).unwrap_err());
    Ok(())
}
