//! rho_k along a grid of truncation levels, and the resulting
//! classification, for a chain in each case of the dichotomy.

use std::collections::BTreeMap;

use bandchain::bounds::{alpha0_closed_form, IncrementLaw, solve_tau};
use bandchain::kernel::{BandKernel, Row};
use bandchain::truncation::{classify, sweep, write_sweep_csv, ClassifyConfig};

fn e1() -> BandKernel {
    let incr: BTreeMap<i64, f64> = [(-1, 0.75), (1, 0.25)].into_iter().collect();
    let row: Row = [(0, 0.75), (1, 0.25)].into_iter().collect();
    BandKernel::homogeneous_rw(1, 1, &incr, vec![row]).unwrap()
}

// state 0 is a well behind a barrier at 1: the walk rarely gets in or out,
// which puts an isolated eigenvalue near 1 above the essential radius
fn metastable() -> BandKernel {
    let rows: Vec<Row> = vec![
        [(0, 0.99), (1, 0.01)].into_iter().collect(),
        [(0, 0.02), (2, 0.98)].into_iter().collect(),
    ];
    let law = IncrementLaw::new([(-1, 0.75), (1, 0.25)]).unwrap();
    BandKernel::band(2, 1, rows, law).unwrap()
}

fn main() -> bandchain::Result<()> {
    let grid = [25, 50, 100, 200];
    for (name, kernel) in [("E1", e1()), ("metastable", metastable())] {
        let law = kernel.limit_law();
        let alpha0 = alpha0_closed_form(law, solve_tau(law)?);
        let records = sweep(&kernel, &grid, 1e-9);
        let mut csv = Vec::new();
        write_sweep_csv(&mut csv, &records).expect("in-memory write");
        println!("{name} (alpha0 = {alpha0:.7})");
        print!("{}", String::from_utf8_lossy(&csv));
        let rate = classify(&records, alpha0, ClassifyConfig::default())?;
        println!("=> {:?}: rho2 = {:.7}, last Cauchy gap {:.1e}\n", rate.case, rate.rho2, rate.limit_uncertainty);
    }
    Ok(())
}
