//! Stationary distribution of the augmented truncation, its tail ratio, and
//! the `pi`-weighted norms.
//!
//! The fixed vector is computed by Grassmann–Taksar–Heyman state reduction.
//! GTH never subtracts, so every entry comes out with small *relative* error,
//! including entries far below machine epsilon. Tail ratios such as
//! `pi(41)/pi(40) = 1/3` with `pi(40) ~ 1e-20` depend on that.

use std::io::{self, Write};
use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::kernel::BandKernel;
use crate::truncation::truncate_augment;

/// Invariance defect accepted for a stationary vector.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Mean ratios below this are treated as `tau = 0`.
pub const DEGENERATE_TAU: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRatio {
    pub mean: f64,
    pub max_deviation: f64,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    prefix: Vec<f64>,
    k: usize,
    i0: usize,
    half_width: usize,
    tau_hat: f64,
    tau_degenerate: bool,
    tail: Option<TailRatio>,
    residual: f64,
}

impl StationaryDistribution {
    /// Wraps an externally known prefix (normalised here). The tail ratio is
    /// estimated on the default window.
    pub fn from_prefix(prefix: Vec<f64>, i0: usize, half_width: usize) -> Result<Self> {
        if prefix.is_empty() {
            return Err(Error::InvalidArgument("empty prefix".into()));
        }
        if let Some(i) = prefix.iter().position(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidArgument(format!("negative mass at {i}")));
        }
        let total: f64 = prefix.iter().sum();
        let prefix = prefix.into_iter().map(|p| p / total).collect::<Vec<_>>();
        let k = prefix.len() - 1;
        let mut pi = StationaryDistribution {
            prefix,
            k,
            i0,
            half_width,
            tau_hat: f64::NAN,
            tau_degenerate: false,
            tail: None,
            residual: 0.0,
        };
        pi.estimate_tail();
        Ok(pi)
    }

    fn estimate_tail(&mut self) {
        let Some(window) = self.default_window() else {
            return;
        };
        match tail_ratio(self, window) {
            Ok(t) => {
                self.tau_degenerate = t.mean < DEGENERATE_TAU;
                self.tau_hat = if self.tau_degenerate { 0.0 } else { t.mean };
                self.tail = Some(t);
            }
            Err(Error::ZeroMass { .. }) => {
                self.tau_degenerate = true;
                self.tau_hat = 0.0;
            }
            Err(_) => {}
        }
    }

    /// Upper half of the admissible window `i0 + N ..= k - 2N`.
    pub fn default_window(&self) -> Option<RangeInclusive<usize>> {
        let (min, max) = self.admissible()?;
        let start = min.max(max / 2);
        (start < max).then_some(start..=max)
    }

    fn admissible(&self) -> Option<(usize, usize)> {
        let min = self.i0 + self.half_width;
        let max = self.k.checked_sub(2 * self.half_width)?;
        Some((min, max))
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau_hat(&self) -> f64 {
        self.tau_hat
    }

    pub fn tau_degenerate(&self) -> bool {
        self.tau_degenerate
    }

    pub fn tail(&self) -> Option<&TailRatio> {
        self.tail.as_ref()
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `pi(f) = sum f(i) pi(i)`.
    pub fn expectation(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.prefix).map(|(a, p)| a * p).sum()
    }

    /// Rows `i, pi(i), pi(i+1)/pi(i)` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "i,pi,ratio")?;
        for (i, &p) in self.prefix.iter().enumerate() {
            let ratio = match self.prefix.get(i + 1) {
                Some(&next) if p > 0.0 => fmt17(next / p),
                _ => String::new(),
            };
            writeln!(w, "{i},{},{ratio}", fmt17(p))?;
        }
        Ok(())
    }
}

/// Stationary vector of the last-column-augmented truncation `P_k`.
pub fn stationary_prefix(kernel: &BandKernel, k: usize) -> Result<StationaryDistribution> {
    let matrix = truncate_augment(kernel, k)?;
    let prefix = gth_fixed_vector(&matrix)?;
    let residual = invariance_residual(&matrix, &prefix);
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::NonConvergence { residual });
    }
    let mut pi = StationaryDistribution::from_prefix(prefix, kernel.i0(), kernel.half_width())?;
    pi.residual = residual;
    Ok(pi)
}

/// Left fixed probability vector of a stochastic matrix by GTH state
/// reduction. Fails with `SingularSystem` when the matrix is not irreducible.
/// Entries below the smallest positive double come out as 0; see
/// [`gth_log_fixed_vector`].
pub fn gth_fixed_vector(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let log_pi = gth_log_fixed_vector(matrix)?;
    Ok(log_pi.iter().map(|l| l.exp()).collect())
}

/// Natural logarithms of the GTH fixed vector (normalised to sum 1). The
/// back-substitution runs in the log domain, so no entry underflows.
pub fn gth_log_fixed_vector(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::InvalidArgument("GTH needs a nonempty square matrix".into()));
    }
    if let Some(index) = first_unreachable(matrix) {
        return Err(Error::SingularSystem { index });
    }
    let mut a = matrix.clone();
    for m in (1..n).rev() {
        let lower: Vec<usize> = (0..m).filter(|&j| a[(m, j)] != 0.0).collect();
        let s: f64 = lower.iter().map(|&j| a[(m, j)]).sum();
        if !(s > 0.0) {
            return Err(Error::SingularSystem { index: m });
        }
        for i in 0..m {
            let f = a[(i, m)];
            if f == 0.0 {
                continue;
            }
            let f = f / s;
            a[(i, m)] = f;
            for &j in &lower {
                a[(i, j)] += f * a[(m, j)];
            }
        }
    }
    let mut log_pi = vec![0.0; n];
    for m in 1..n {
        let terms: Vec<f64> = (0..m)
            .filter(|&i| a[(i, m)] > 0.0)
            .map(|i| log_pi[i] + a[(i, m)].ln())
            .collect();
        log_pi[m] = log_sum_exp(&terms);
    }
    let total = log_sum_exp(&log_pi);
    log_pi.iter_mut().for_each(|l| *l -= total);
    Ok(log_pi)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn first_unreachable(matrix: &DMatrix<f64>) -> Option<usize> {
    let n = matrix.nrows();
    let mut fwd = vec![false; n];
    let mut bwd = vec![false; n];
    for (seen, transpose) in [(&mut fwd, false), (&mut bwd, true)] {
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let w = if transpose { matrix[(v, u)] } else { matrix[(u, v)] };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    (0..n).find(|&i| !(fwd[i] && bwd[i]))
}

/// `|| pi P - pi ||_1`.
pub fn invariance_residual(matrix: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = matrix.nrows();
    (0..n)
        .map(|j| {
            let flow: f64 = (0..n).map(|i| pi[i] * matrix[(i, j)]).sum();
            (flow - pi[j]).abs()
        })
        .sum()
}

/// Mean and spread of `pi(i+1)/pi(i)` over `i` in `start..end` (pairs inside
/// the window). The window must sit in `i0 + N ..= k - 2N`.
pub fn tail_ratio(pi: &StationaryDistribution, window: RangeInclusive<usize>) -> Result<TailRatio> {
    let (start, end) = (*window.start(), *window.end());
    let (min, max) = pi.admissible().unwrap_or((pi.i0 + pi.half_width, 0));
    if start < min || end > max || start >= end {
        return Err(Error::WindowTooWide {
            start,
            end,
            min,
            max,
        });
    }
    let mut ratios = Vec::with_capacity(end - start);
    for i in start..end {
        let p = pi.prefix[i];
        if p <= 0.0 {
            return Err(Error::ZeroMass { index: i });
        }
        ratios.push(pi.prefix[i + 1] / p);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max_deviation = ratios.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max);
    Ok(TailRatio {
        mean,
        max_deviation,
        start,
        end,
    })
}

/// `(||f||_1, ||f||_2)` in `l1(pi)` and `l2(pi)`.
pub fn weighted_norms(f: &[f64], pi: &StationaryDistribution) -> (f64, f64) {
    weighted_norms_raw(f, pi.prefix())
}

pub(crate) fn weighted_norms_raw(f: &[f64], pi: &[f64]) -> (f64, f64) {
    assert_eq!(f.len(), pi.len(), "vector and stationary prefix differ in length");
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for (x, p) in f.iter().zip(pi) {
        l1 += x.abs() * p;
        l2 += x * x * p;
    }
    (l1, l2.sqrt())
}
