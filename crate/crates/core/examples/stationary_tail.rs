//! Stationary law of the augmented truncation and its geometric tail.

use std::collections::BTreeMap;
use std::io;

use bandchain::kernel::{BandKernel, Row};
use bandchain::stationary::{stationary_prefix, tail_ratio, weighted_norms};

fn main() -> bandchain::Result<()> {
    let incr: BTreeMap<i64, f64> = [(-1, 0.7), (1, 0.2), (2, 0.1)].into_iter().collect();
    let row: Row = [(0, 0.7), (1, 0.2), (2, 0.1)].into_iter().collect();
    let e2 = BandKernel::homogeneous_rw(1, 2, &incr, vec![row])?;

    let pi = stationary_prefix(&e2, 120)?;
    println!("k = {}, residual = {:.2e}, tau_hat = {:.10}", pi.k(), pi.residual(), pi.tau_hat());

    let t = tail_ratio(&pi, 30..=50)?;
    let exact = (0.3 + 0.37f64.sqrt()) / 1.4;
    println!("ratio on 30..=50: {:.10} (max deviation {:.1e}); exact {exact:.10}", t.mean, t.max_deviation);

    println!("convergence of pi(i+1)/pi(i):");
    for i in [2, 5, 10, 20, 40] {
        let r = pi.prefix()[i + 1] / pi.prefix()[i];
        println!("  i = {i:>2}: {r:.12}  error {:.1e}", (r - exact).abs());
    }

    let mut indicator = vec![0.0; pi.prefix().len()];
    indicator[0] = 1.0;
    let (l1, l2) = weighted_norms(&indicator, &pi);
    println!("indicator of 0: l1 = {l1:.6}, l2 = {l2:.6}");

    println!("first rows of the CSV:");
    let mut csv = Vec::new();
    pi.write_csv(&mut csv).map_err(|e| bandchain::Error::InvalidArgument(e.to_string()))?;
    for line in String::from_utf8_lossy(&csv).lines().take(4) {
        println!("  {line}");
    }
    let _ = io::Write::flush(&mut io::stdout());
    Ok(())
}
