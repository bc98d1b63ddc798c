//! Independent checks that share no code path with the QR eigensolver:
//! characteristic polynomials by cofactor expansion, decay rates from plain
//! power iteration, and sampled checks of `||Pf||_2 <= alpha ||f||_2 + L ||f||_1`.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stationary::weighted_norms_raw;

pub const MAX_ORACLE_ORDER: usize = 8;

/// Iterations skipped before fitting (transient of nonnormal matrices).
pub const DEFAULT_SKIP: usize = 5;

/// Norm below which the automatic window stops.
pub const WINDOW_FLOOR: f64 = 1e-250;

// ---------------------------------------------------------------------------
// characteristic polynomial

/// Coefficients `c_0..=c_n` of `det(lambda I - A)` (lowest degree first) by
/// Laplace expansion along rows, memoised on the set of used columns.
pub fn charpoly_coefficients(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::InvalidArgument("charpoly of a non-square matrix".into()));
    }
    if n > MAX_ORACLE_ORDER {
        return Err(Error::OrderTooLarge { order: n });
    }
    let mut memo = HashMap::new();
    Ok(minor(matrix, 0, 0, &mut memo))
}

/// Determinant of rows `row..n` of `lambda I - A` restricted to the columns
/// not in `used`.
fn minor(a: &DMatrix<f64>, row: usize, used: u32, memo: &mut HashMap<u32, Vec<f64>>) -> Vec<f64> {
    let n = a.nrows();
    if row == n {
        return vec![1.0];
    }
    if let Some(p) = memo.get(&used) {
        return p.clone();
    }
    let mut det = vec![0.0; n - row + 1];
    let mut sign = 1.0;
    for col in 0..n {
        if used & (1 << col) != 0 {
            continue;
        }
        // entry (row, col) of lambda I - A
        let entry = if row == col {
            vec![-a[(row, col)], 1.0]
        } else {
            vec![-a[(row, col)]]
        };
        if entry.iter().all(|&c| c == 0.0) {
            sign = -sign;
            continue;
        }
        let sub = minor(a, row + 1, used | (1 << col), memo);
        for (i, &e) in entry.iter().enumerate() {
            for (j, &s) in sub.iter().enumerate() {
                det[i + j] += sign * e * s;
            }
        }
        sign = -sign;
    }
    memo.insert(used, det.clone());
    det
}

fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Roots of a polynomial (lowest degree first, nonzero leading coefficient)
/// by Aberth–Ehrlich iteration followed by Newton polishing.
///
/// Returns the roots and the worst scaled residual
/// `|p(z)| / sum |c_i| |z|^i`.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<(Vec<Complex64>, f64)> {
    let n = coeffs.len().saturating_sub(1);
    let lead = *coeffs.last().unwrap_or(&0.0);
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    if lead == 0.0 {
        return Err(Error::InvalidArgument("leading coefficient is zero".into()));
    }
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let radius = 1.0 + monic[..n].iter().map(|c| c.abs()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4;
            Complex64::from_polar(0.5 * radius, theta)
        })
        .collect();

    for _ in 0..1000 {
        let mut biggest: f64 = 0.0;
        for i in 0..n {
            let (p, dp) = horner(&monic, z[i]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                biggest = biggest.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if biggest < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(&monic, *zi);
            let step = p / dp;
            if !step.is_finite() || step.norm() > 1e-6 * (1.0 + zi.norm()) {
                break;
            }
            *zi -= step;
        }
    }

    let residual = z
        .iter()
        .map(|&zi| {
            let (p, _) = horner(&monic, zi);
            let scale: f64 = monic
                .iter()
                .enumerate()
                .map(|(i, c)| c.abs() * zi.norm().powi(i as i32))
                .sum();
            p.norm() / scale
        })
        .fold(0.0, f64::max);
    Ok((z, residual))
}

/// Eigenvalues of a matrix of order at most 8 from its characteristic
/// polynomial.
pub fn charpoly_spectrum(matrix: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let coeffs = charpoly_coefficients(matrix)?;
    let (roots, residual) = polynomial_roots(&coeffs)?;
    if residual > 1e-10 {
        return Err(Error::RootResidual { residual });
    }
    Ok(roots)
}

/// Smallest achievable `max_i |a_i - b_sigma(i)|` over permutations `sigma`
/// (bottleneck matching by exhaustive search; orders up to 8).
pub fn match_spectra(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "spectra of different sizes {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() > MAX_ORACLE_ORDER {
        return Err(Error::OrderTooLarge { order: a.len() });
    }
    fn search(a: &[Complex64], b: &[Complex64], used: u32, worst: f64, best: &mut f64) {
        let i = used.count_ones() as usize;
        if worst >= *best {
            return;
        }
        if i == a.len() {
            *best = worst;
            return;
        }
        for j in 0..b.len() {
            if used & (1 << j) == 0 {
                search(a, b, used | (1 << j), worst.max((a[i] - b[j]).norm()), best);
            }
        }
    }
    let mut best = f64::INFINITY;
    search(a, b, 0, 0.0, &mut best);
    Ok(if a.is_empty() { 0.0 } else { best })
}

// ---------------------------------------------------------------------------
// power iteration

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    /// `exp(intercept) / ||f||_2`, the fitted prefactor `C`.
    pub prefactor: f64,
    pub window: (usize, usize),
    pub r_squared: f64,
}

impl DecayFit {
    pub fn accepted(&self) -> bool {
        self.rate > 0.0 && self.rate < 1.0 && self.r_squared >= 0.99
    }
}

fn recenter(g: &mut DVector<f64>, pi: &[f64]) {
    let mean: f64 = g.iter().zip(pi).map(|(a, p)| a * p).sum();
    g.add_scalar_mut(-mean);
}

fn centered(f: &[f64], pi: &[f64]) -> Result<DVector<f64>> {
    let mean: f64 = f.iter().zip(pi).map(|(a, p)| a * p).sum();
    let g = DVector::from_iterator(f.len(), f.iter().map(|x| x - mean));
    let (_, norm_f) = weighted_norms_raw(f, pi);
    let (_, norm_g) = weighted_norms_raw(g.as_slice(), pi);
    if !(norm_g > 1e-12 * norm_f.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateTestVector);
    }
    Ok(g)
}

/// Fits `log ||P^n (f - pi(f))||_2 ~ log C||f||_2 + n log rate` over `window`.
pub fn power_decay_rate(
    matrix: &DMatrix<f64>,
    pi: &[f64],
    f: &[f64],
    window: RangeInclusive<usize>,
) -> Result<DecayFit> {
    let (start, end) = (*window.start(), *window.end());
    if f.len() != matrix.nrows() || pi.len() != matrix.nrows() || end <= start {
        return Err(Error::InvalidArgument("decay fit: size or window mismatch".into()));
    }
    let mut g = centered(f, pi)?;
    let mut points = Vec::with_capacity(end - start + 1);
    for n in 0..=end {
        if n >= start {
            let (_, norm) = weighted_norms_raw(g.as_slice(), pi);
            if !(norm > 1e-300) {
                return Err(Error::UnderflowBeforeWindow { iteration: n });
            }
            points.push((n as f64, norm.ln()));
        }
        if n < end {
            // P fixes constants, so rounding would otherwise leave a floor
            g = matrix * g;
            recenter(&mut g, pi);
        }
    }
    let (slope, intercept, r_squared) = least_squares(&points);
    let (_, norm_f) = weighted_norms_raw(f, pi);
    Ok(DecayFit {
        rate: slope.exp(),
        prefactor: intercept.exp() / norm_f,
        window: (start, end),
        r_squared,
    })
}

/// `skip..=n_end` where `n_end` is the last iteration before the norm of the
/// centred iterate drops below 1e-250, capped at `max_iter`.
pub fn auto_window(
    matrix: &DMatrix<f64>,
    pi: &[f64],
    f: &[f64],
    skip: usize,
    max_iter: usize,
) -> Result<RangeInclusive<usize>> {
    let mut g = centered(f, pi)?;
    let mut last = 0;
    for n in 0..=max_iter {
        let (_, norm) = weighted_norms_raw(g.as_slice(), pi);
        if !(norm >= WINDOW_FLOOR) {
            break;
        }
        last = n;
        g = matrix * g;
        recenter(&mut g, pi);
    }
    if last <= skip + 1 {
        return Err(Error::UnderflowBeforeWindow { iteration: last });
    }
    Ok(skip..=last)
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r_squared)
}

/// `count` standard normal vectors of length `n` from a seeded ChaCha8 stream.
pub fn random_vectors(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Lemma 1 inequality

/// `||P f||_2 - alpha ||f||_2 - L ||f||_1` in `pi`-weighted norms.
pub fn lemma1_margin(matrix: &DMatrix<f64>, pi: &[f64], alpha: f64, l: f64, f: &[f64]) -> f64 {
    let (pf_l2, (f_l1, f_l2)) = lemma1_terms(matrix, pi, f);
    pf_l2 - alpha * f_l2 - l * f_l1
}

fn lemma1_terms(matrix: &DMatrix<f64>, pi: &[f64], f: &[f64]) -> (f64, (f64, f64)) {
    let pf = matrix * DVector::from_column_slice(f);
    let (_, pf_l2) = weighted_norms_raw(pf.as_slice(), pi);
    (pf_l2, weighted_norms_raw(f, pi))
}

/// Smallest `L >= 0` that makes the inequality hold for `f`.
fn feasible_l(matrix: &DMatrix<f64>, pi: &[f64], alpha: f64, f: &[f64]) -> f64 {
    let (pf_l2, (f_l1, f_l2)) = lemma1_terms(matrix, pi, f);
    let excess = pf_l2 - alpha * f_l2;
    if excess <= 0.0 {
        0.0
    } else if f_l1 > 0.0 {
        excess / f_l1
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Report {
    pub alpha: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub sample_count: usize,
    pub seed: u64,
    /// Largest `||Pf|| - alpha||f|| - L||f||_1`; the inequality held on the
    /// whole sample iff this is `<= 0`.
    pub max_violation: f64,
    pub violations: usize,
    /// Smallest `L` that works for every sampled vector.
    pub min_feasible_l: f64,
}

pub fn lemma1_check(
    matrix: &DMatrix<f64>,
    pi: &[f64],
    alpha: f64,
    l: f64,
    sample_count: usize,
    seed: u64,
) -> Result<Lemma1Report> {
    if !(alpha > 0.0 && alpha < 1.0) || !(l > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lemma1_check needs alpha in (0,1) and L > 0, got alpha = {alpha}, L = {l}"
        )));
    }
    let samples = random_vectors(matrix.nrows(), sample_count, seed);
    let mut max_violation = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut min_feasible_l: f64 = 0.0;
    for f in &samples {
        let margin = lemma1_margin(matrix, pi, alpha, l, f);
        if margin > 0.0 {
            violations += 1;
        }
        max_violation = max_violation.max(margin);
        min_feasible_l = min_feasible_l.max(feasible_l(matrix, pi, alpha, f));
    }
    Ok(Lemma1Report {
        alpha,
        l,
        sample_count,
        seed,
        max_violation: if samples.is_empty() { 0.0 } else { max_violation },
        violations,
        min_feasible_l,
    })
}

/// A constant `L` that makes the inequality hold for *every* `f`, not just
/// the sampled ones.
///
/// Split `f = g + h` with `g` supported below a cutoff `ell`. In the
/// orthonormal coordinates `v = diag(sqrt(pi)) f` the operator is
/// `S = D P D^-1`; if the columns `>= ell` of `S` have norm `sigma_tail <= alpha`
/// then `||Ph|| <= alpha ||f||_2`, and
/// `||Pg|| <= sigma_head ||g||_2 <= sigma_head ||f||_1 / sqrt(min_{i<ell} pi(i))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaConstant {
    #[serde(rename = "L")]
    pub l: f64,
    pub cutoff: usize,
    pub sigma_head: f64,
    pub sigma_tail: f64,
}

fn column_block_norm(s: &DMatrix<f64>, from: usize, to: usize) -> f64 {
    if from >= to {
        return 0.0;
    }
    s.columns(from, to - from)
        .into_owned()
        .singular_values()
        .max()
}

/// Smallest cutoff whose tail block is `alpha`-contractive (binary search;
/// the tail norm is nonincreasing in the cutoff), and the resulting `L`.
pub fn lemma1_constant(matrix: &DMatrix<f64>, pi: &[f64], alpha: f64) -> Result<LemmaConstant> {
    let n = matrix.nrows();
    if pi.len() != n || pi.iter().any(|&p| !(p > f64::MIN_POSITIVE)) {
        return Err(Error::InvalidArgument(
            "lemma1_constant needs a strictly positive pi of matching size".into(),
        ));
    }
    let d: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| d[i] * matrix[(i, j)] / d[j]);
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if column_block_norm(&s, mid, n) <= alpha {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let cutoff = lo;
    let sigma_head = column_block_norm(&s, 0, cutoff);
    let sigma_tail = column_block_norm(&s, cutoff, n);
    let min_head = pi[..cutoff].iter().copied().fold(f64::INFINITY, f64::min);
    let l = if cutoff == 0 { 0.0 } else { sigma_head / min_head.sqrt() };
    // one ulp-scale cushion against rounding in the norms
    Ok(LemmaConstant {
        l: l * (1.0 + 1e-12) + f64::MIN_POSITIVE,
        cutoff,
        sigma_head,
        sigma_tail,
    })
}

/// Largest feasible `L` over a set of probes: `count` seeded normal vectors
/// plus every indicator `1_{i}`.
pub fn calibrate_l(matrix: &DMatrix<f64>, pi: &[f64], alpha: f64, count: usize, seed: u64) -> f64 {
    let n = matrix.nrows();
    let mut needed: f64 = 0.0;
    for f in random_vectors(n, count, seed) {
        needed = needed.max(feasible_l(matrix, pi, alpha, &f));
    }
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        needed = needed.max(feasible_l(matrix, pi, alpha, &e));
    }
    needed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.75, 0.25, 0.0, 0.75, 0.0, 0.25, 0.0, 0.75, 0.25])
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        v
    }

    #[test]
    fn charpoly_of_p2() {
        // lambda^3 - lambda^2 - 0.1875 lambda + 0.1875
        let c = charpoly_coefficients(&p2()).unwrap();
        let expected = [0.1875, -0.1875, -1.0, 1.0];
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{c:?}");
        }
        let roots = sorted(charpoly_spectrum(&p2()).unwrap());
        let r = 0.1875f64.sqrt();
        for (z, e) in roots.iter().zip([-r, r, 1.0]) {
            assert!((z - e).norm() < 1e-12);
        }
    }

    #[test]
    fn charpoly_small_cases() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let roots = charpoly_spectrum(&one).unwrap();
        assert!((roots[0] - 1.0).norm() < 1e-14);
        let diag = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.5]);
        let roots = sorted(charpoly_spectrum(&diag).unwrap());
        assert!((roots[0] - 0.2).norm() < 1e-14 && (roots[1] - 0.5).norm() < 1e-14);
        let big = DMatrix::<f64>::identity(9, 9);
        assert_eq!(charpoly_spectrum(&big), Err(Error::OrderTooLarge { order: 9 }));
    }

    #[test]
    fn matching_is_permutation_invariant() {
        let a = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)];
        let b = [a[2], a[0], a[1] + 1e-9];
        assert!(match_spectra(&a, &b).unwrap() < 2e-9);
    }

    #[test]
    fn decay_on_p2() {
        let pi = [9.0 / 13.0, 3.0 / 13.0, 1.0 / 13.0];
        let fit = power_decay_rate(&p2(), &pi, &[1.0, 0.0, 0.0], 5..=40).unwrap();
        assert!((fit.rate - 0.4330127).abs() < 1e-3, "{fit:?}");
        assert!(fit.accepted());
        assert_eq!(
            power_decay_rate(&p2(), &pi, &[1.0, 1.0, 1.0], 5..=40),
            Err(Error::DegenerateTestVector)
        );
        assert!(matches!(
            power_decay_rate(&p2(), &pi, &[1.0, 0.0, 0.0], 5..=1000),
            Err(Error::UnderflowBeforeWindow { .. })
        ));
    }

    #[test]
    fn lemma1_constant_holds_for_all_probes() {
        let pi = [9.0 / 13.0, 3.0 / 13.0, 1.0 / 13.0];
        let c = lemma1_constant(&p2(), &pi, 0.9).unwrap();
        assert!(c.sigma_tail <= 0.9);
        assert!(c.l >= calibrate_l(&p2(), &pi, 0.9, 500, 1));
        let report = lemma1_check(&p2(), &pi, 0.9, c.l.max(1e-3), 2000, 3).unwrap();
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn lemma1_zero_vector_and_seed_reproducibility() {
        let pi = [2.0 / 3.0, 2.0 / 9.0, 1.0 / 9.0];
        assert_eq!(lemma1_margin(&p2(), &pi, 0.9, 1.0, &[0.0; 3]), 0.0);
        let a = lemma1_check(&p2(), &pi, 0.9, 1.0, 50, 7).unwrap();
        let b = lemma1_check(&p2(), &pi, 0.9, 1.0, 50, 7).unwrap();
        assert_eq!(a, b);
        assert!(lemma1_check(&p2(), &pi, 1.5, 1.0, 5, 7).is_err());
    }
}
