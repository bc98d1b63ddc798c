//! # bandchain
//!
//! Convergence-rate certificates for irreducible aperiodic Markov chains on
//! `{0, 1, 2, ...}` whose transition matrix is banded past a finite boundary.
//!
//! For such a chain with stationary law `pi`, the crate computes
//!
//! * `tau`, the tail ratio `pi(i+1)/pi(i) -> tau`, as the subunit root of
//!   `psi(t) = sum_m a_m t^(-m) = 1` ([`bounds::solve_tau`]);
//! * `alpha0 = sum_m a_m tau^(-m/2)`, an upper bound on the essential spectral
//!   radius of `P` on `l2(pi)`, both in closed form and as the finite-horizon
//!   sum of `beta_m(i) = sqrt(P(i,i+m) P*(i+m,i))` ([`bounds`]);
//! * a drift certificate `PV <= alpha V + L` for `V(n) = tau^(-n/2)`;
//! * the sequence `rho_k` of largest subunit eigenvalue moduli of the
//!   last-column-augmented truncations `P_k` ([`truncation`]), and from it
//!   the classification: either the `l2(pi)` rate is at most `alpha0`, or it
//!   equals `lim rho_k`.
//!
//! [`oracle`] holds independent cross-checks (characteristic polynomials,
//! power-iteration decay fits, a sampled check of
//! `||Pf||_2 <= alpha ||f||_2 + L ||f||_1`).
//!
//! ```
//! use std::collections::BTreeMap;
//! use bandchain::{bounds, kernel::BandKernel};
//!
//! let incr: BTreeMap<i64, f64> = [(-1, 0.75), (1, 0.25)].into_iter().collect();
//! let boundary = vec![[(0, 0.75), (1, 0.25)].into_iter().collect()];
//! let kernel = BandKernel::homogeneous_rw(1, 1, &incr, boundary).unwrap();
//!
//! let tau = bounds::solve_tau(kernel.limit_law()).unwrap();
//! let alpha0 = bounds::alpha0_closed_form(kernel.limit_law(), tau);
//! assert!((alpha0 - 0.75f64.sqrt()).abs() < 1e-12);
//! ```

pub mod analysis;
pub mod bounds;
pub mod chain_spec;
pub mod cli;
pub mod eigen;
pub mod error;
pub mod format;
pub mod kernel;
pub mod oracle;
pub mod stationary;
pub mod truncation;

pub use error::{Error, Result};
