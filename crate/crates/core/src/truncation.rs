//! Truncation-augmentation approximations `P_k`, their spectra, the
//! subunit radius `rho_k`, and the dichotomy classifier.
//!
//! `P_k` is the `(k+1) x (k+1)` north-west corner of `P` with each row's lost
//! mass added to the last column.
//!
//! Computing `sigma(P_k)` directly is unreliable for large `k`: a walk with
//! drift towards 0 gives a strongly nonnormal `P_k` whose computed
//! eigenvalues spread over the pseudospectrum (for E1 at `k = 200` plain QR
//! reports `rho_k ~ 0.93` against a true value below `alpha0 = 0.866`).
//! [`stationary_basis_spectrum`] therefore works with `D P_k D^-1`,
//! `D = diag(sqrt(pi_k))`, which is `P_k` written in an orthonormal basis of
//! `l2(pi_k)`, where it is a contraction. The eigenvalues are the same.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::eigen::eigenvalues;
use crate::error::{Error, Result};
use crate::kernel::BandKernel;
use crate::stationary::gth_log_fixed_vector;

pub const DEFAULT_UNIT_TOL: f64 = 1e-9;
pub const DEFAULT_DECISION_MARGIN: f64 = 0.01;
pub const DEFAULT_STALL_TOL: f64 = 1e-3;

/// Name recorded in reports for the augmentation in use.
pub const AUGMENTATION: &str = "last_column";

/// `P_k`: entry `(i, j) = P(i, j)` for `j < k`, and
/// `(i, k) = 1 - sum_{j<k} P(i, j)`.
pub fn truncate_augment(kernel: &BandKernel, k: usize) -> Result<DMatrix<f64>> {
    if k < kernel.i0() + kernel.half_width() {
        return Err(Error::InvalidArgument(format!(
            "truncation level {k} is below i0 + N = {}",
            kernel.i0() + kernel.half_width()
        )));
    }
    // Mass at or beyond k is summed directly rather than taken as
    // 1 - sum(kept): the latter leaks the rounding residue of every row into
    // state k, which the tail recurrence amplifies like tau^(-n).
    let mut m = DMatrix::zeros(k + 1, k + 1);
    for i in 0..=k {
        for (&j, &p) in &kernel.row(i) {
            m[(i, j.min(k))] += p;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub backward_error: f64,
}

fn check_stochastic(matrix: &DMatrix<f64>) -> Result<()> {
    for (i, row) in matrix.row_iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&x| x < 0.0) {
            return Err(Error::NotStochastic { row: i, sum });
        }
    }
    Ok(())
}

/// All eigenvalues of a dense stochastic matrix.
pub fn spectrum(matrix: &DMatrix<f64>) -> Result<Spectrum> {
    if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
        return Err(Error::InvalidArgument("spectrum needs a nonempty square matrix".into()));
    }
    check_stochastic(matrix)?;
    let e = eigenvalues(matrix)?;
    Ok(Spectrum {
        eigenvalues: e.eigenvalues,
        backward_error: e.backward_error,
    })
}

/// Which matrix the eigensolver actually saw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumBasis {
    /// `D P_k D^-1` with `D = diag(sqrt(pi_k))`.
    Stationary,
    /// `log pi_k` was not finite somewhere; plain balanced `P_k`.
    Raw,
}

/// Spectrum of `P_k` computed in the `l2(pi_k)` orthonormal basis, given
/// `log pi_k`. Entry `(i, j)` becomes `P(i, j) sqrt(pi(i) / pi(j))`; only the
/// ratios are formed, so underflowing `pi_k` is harmless.
pub fn stationary_basis_spectrum(
    matrix: &DMatrix<f64>,
    log_pi: &[f64],
) -> Result<(Spectrum, SpectrumBasis)> {
    check_stochastic(matrix)?;
    if log_pi.len() != matrix.nrows() {
        return Err(Error::InvalidArgument("pi and matrix sizes differ".into()));
    }
    if log_pi.iter().any(|l| !l.is_finite()) {
        return Ok((spectrum(matrix)?, SpectrumBasis::Raw));
    }
    let scaled = DMatrix::from_fn(matrix.nrows(), matrix.ncols(), |i, j| {
        let x = matrix[(i, j)];
        if x == 0.0 {
            0.0
        } else {
            x * (0.5 * (log_pi[i] - log_pi[j])).exp()
        }
    });
    let e = eigenvalues(&scaled)?;
    Ok((
        Spectrum {
            eigenvalues: e.eigenvalues,
            backward_error: e.backward_error,
        },
        SpectrumBasis::Stationary,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// More than one eigenvalue on the unit circle.
    PeriodicitySuspected { unit_count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoExtraction {
    pub rho: f64,
    pub unit_count: usize,
    pub warnings: Vec<Warning>,
}

/// `rho_k = max{|lambda| : |lambda| < 1 - unit_tol}`.
pub fn rho_from_spectrum(spectrum: &[Complex64], unit_tol: f64) -> Result<RhoExtraction> {
    let threshold = 1.0 - unit_tol;
    let unit_count = spectrum.iter().filter(|z| z.norm() >= threshold).count();
    let rho = spectrum
        .iter()
        .map(|z| z.norm())
        .filter(|&r| r < threshold)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
        .ok_or(Error::NoSubunitEigenvalue)?;
    let warnings = if unit_count > 1 {
        vec![Warning::PeriodicitySuspected { unit_count }]
    } else {
        Vec::new()
    };
    Ok(RhoExtraction {
        rho,
        unit_count,
        warnings,
    })
}

fn serialize_complex<S: Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
    pairs.serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationResult {
    pub k: usize,
    /// `[re, im]` pairs, `k + 1` of them.
    #[serde(serialize_with = "serialize_complex")]
    pub spectrum: Vec<Complex64>,
    pub rho_k: f64,
    pub unit_count: usize,
    pub backward_error: f64,
    pub basis: SpectrumBasis,
    pub warnings: Vec<Warning>,
    pub wall_ms: f64,
}

/// Full pipeline for one level: `P_k`, `pi_k`, spectrum, `rho_k`.
pub fn analyze_truncation(kernel: &BandKernel, k: usize, unit_tol: f64) -> Result<TruncationResult> {
    let start = Instant::now();
    let matrix = truncate_augment(kernel, k)?;
    let log_pi = gth_log_fixed_vector(&matrix)?;
    let (spec, basis) = stationary_basis_spectrum(&matrix, &log_pi)?;
    let rho = rho_from_spectrum(&spec.eigenvalues, unit_tol)?;
    Ok(TruncationResult {
        k,
        spectrum: spec.eigenvalues,
        rho_k: rho.rho,
        unit_count: rho.unit_count,
        backward_error: spec.backward_error,
        basis,
        warnings: rho.warnings,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// One sweep entry; failures are kept in place.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub k: usize,
    pub outcome: Result<TruncationResult>,
}

impl SweepRecord {
    pub fn ok(&self) -> Option<&TruncationResult> {
        self.outcome.as_ref().ok()
    }
}

/// `rho_k` along `k_grid`. Levels are independent and run on the current
/// rayon pool; the output order follows `k_grid`.
pub fn sweep(kernel: &BandKernel, k_grid: &[usize], unit_tol: f64) -> Vec<SweepRecord> {
    k_grid
        .par_iter()
        .map(|&k| SweepRecord {
            k,
            outcome: analyze_truncation(kernel, k, unit_tol),
        })
        .collect()
}

/// Header of the sweep CSV.
pub const SWEEP_CSV_HEADER: &str = "k,rho_k,unit_count,backward_error,wall_ms";

/// Sweep CSV. Failed levels keep their `k`, leave the numeric columns empty
/// and carry the message in a trailing `error` column, which is present only
/// when some level failed.
pub fn write_sweep_csv<W: std::io::Write>(mut w: W, records: &[SweepRecord]) -> std::io::Result<()> {
    use crate::format::fmt17;
    let any_failed = records.iter().any(|r| r.outcome.is_err());
    if any_failed {
        writeln!(w, "{SWEEP_CSV_HEADER},error")?;
    } else {
        writeln!(w, "{SWEEP_CSV_HEADER}")?;
    }
    for rec in records {
        match &rec.outcome {
            Ok(t) => {
                write!(
                    w,
                    "{},{},{},{},{:.3}",
                    t.k,
                    fmt17(t.rho_k),
                    t.unit_count,
                    fmt17(t.backward_error),
                    t.wall_ms
                )?;
                if any_failed {
                    write!(w, ",")?;
                }
                writeln!(w)?;
            }
            Err(e) => {
                let msg = e.to_string().replace(['"', ','], ";");
                writeln!(w, "{},,,,,{msg}", rec.k)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateCase {
    /// `rho_2 <= alpha0`; only a bound is available.
    #[serde(rename = "CaseA_bound")]
    CaseABound,
    /// `rho_2 = rho_V = lim rho_k > alpha0`.
    #[serde(rename = "CaseB_value")]
    CaseBValue,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RhoV {
    AtMost(f64),
    Equals(f64),
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyConfig {
    pub decision_margin: f64,
    pub stall_tol: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            decision_margin: DEFAULT_DECISION_MARGIN,
            stall_tol: DEFAULT_STALL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub case: RateCase,
    /// `alpha0` in case A (an upper bound), `lim rho_k` in case B, the last
    /// `rho_k` when indeterminate.
    pub rho2: f64,
    #[serde(rename = "rhoV")]
    pub rho_v: RhoV,
    /// Last sweep value, taken as the limit estimate.
    pub rho_limit: f64,
    /// Final Cauchy gap `|rho_last - rho_prev|`.
    pub limit_uncertainty: f64,
    pub alpha0: f64,
    pub tail_levels: Vec<usize>,
    pub config: ClassifyConfig,
    /// Power-iteration prefactor, informational only.
    #[serde(rename = "fitted_C")]
    pub fitted_c: Option<f64>,
}

/// Reads the dichotomy off a sweep.
///
/// The tail is the upper half of the successful levels (at least two).
/// * `CaseB_value` when the last Cauchy gap is below `stall_tol` and the last
///   value exceeds `alpha0 + decision_margin`.
/// * `CaseA_bound` when every tail value is at most `alpha0 + stall_tol`,
///   i.e. indistinguishable from `limsup rho_k <= alpha0` at the resolution
///   the sweep can certify.
/// * `Indeterminate` otherwise, notably for a limit in
///   `(alpha0 + stall_tol, alpha0 + decision_margin]`.
pub fn classify(results: &[SweepRecord], alpha0: f64, config: ClassifyConfig) -> Result<RateEstimate> {
    let ok: Vec<&TruncationResult> = results.iter().filter_map(SweepRecord::ok).collect();
    if ok.len() < 4 {
        return Err(Error::InsufficientSweep {
            reason: format!("{} successful levels, need at least 4", ok.len()),
        });
    }
    if ok.windows(2).any(|w| w[0].k >= w[1].k) {
        return Err(Error::InsufficientSweep {
            reason: "levels must be strictly increasing".into(),
        });
    }
    let last = ok[ok.len() - 1];
    if last.k < 100 {
        return Err(Error::InsufficientSweep {
            reason: format!("largest level {} is below 100", last.k),
        });
    }
    let prev = ok[ok.len() - 2];
    let tail = &ok[ok.len() - (ok.len() / 2).max(2)..];
    let gap = (last.rho_k - prev.rho_k).abs();
    let stabilized = gap < config.stall_tol;

    let (case, rho2, rho_v) = if stabilized && last.rho_k > alpha0 + config.decision_margin {
        (RateCase::CaseBValue, last.rho_k, RhoV::Equals(last.rho_k))
    } else if tail.iter().all(|t| t.rho_k <= alpha0 + config.stall_tol) {
        (RateCase::CaseABound, alpha0, RhoV::AtMost(alpha0))
    } else {
        (RateCase::Indeterminate, last.rho_k, RhoV::Unknown)
    };
    Ok(RateEstimate {
        case,
        rho2,
        rho_v,
        rho_limit: last.rho_k,
        limit_uncertainty: gap,
        alpha0,
        tail_levels: tail.iter().map(|t| t.k).collect(),
        config,
        fitted_c: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Row;
    use std::collections::BTreeMap;

    fn e1() -> BandKernel {
        let incr: BTreeMap<i64, f64> = [(-1, 0.75), (1, 0.25)].into_iter().collect();
        let row: Row = [(0, 0.75), (1, 0.25)].into_iter().collect();
        BandKernel::homogeneous_rw(1, 1, &incr, vec![row]).unwrap()
    }

    fn e2() -> BandKernel {
        let incr: BTreeMap<i64, f64> = [(-1, 0.7), (1, 0.2), (2, 0.1)].into_iter().collect();
        let row: Row = [(0, 0.7), (1, 0.2), (2, 0.1)].into_iter().collect();
        BandKernel::homogeneous_rw(1, 2, &incr, vec![row]).unwrap()
    }

    #[test]
    fn p2_of_e1() {
        let m = truncate_augment(&e1(), 2).unwrap();
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[0.75, 0.25, 0.0, 0.75, 0.0, 0.25, 0.0, 0.75, 0.25],
        );
        assert_eq!(m, expected);
    }

    #[test]
    fn augmentation_keeps_rows_stochastic_and_banded() {
        for (kernel, k) in [(e1(), 5), (e2(), 7), (e2(), 40)] {
            let m = truncate_augment(&kernel, k).unwrap();
            for i in 0..=k {
                assert!((m.row(i).sum() - 1.0).abs() <= 1e-15);
            }
        }
        let m = truncate_augment(&e1(), 5).unwrap();
        for i in 0..=5usize {
            for j in 0..5 {
                if i.abs_diff(j) > 1 {
                    assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
        assert!(truncate_augment(&e2(), 2).is_err());
    }

    #[test]
    fn spectrum_of_p2() {
        let m = truncate_augment(&e1(), 2).unwrap();
        let s = spectrum(&m).unwrap();
        let mut re: Vec<f64> = s.eigenvalues.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let r = 0.1875f64.sqrt();
        assert!((re[0] + r).abs() < 1e-12 && (re[1] - r).abs() < 1e-12 && (re[2] - 1.0).abs() < 1e-12);
        assert!(s.backward_error <= 1e-10);
    }

    #[test]
    fn spectrum_rejects_non_stochastic() {
        let m = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.5]);
        assert!(matches!(spectrum(&m), Err(Error::NotStochastic { row: 0, .. })));
    }

    #[test]
    fn rho_extraction() {
        let c = |re: f64| Complex64::new(re, 0.0);
        let r = 0.1875f64.sqrt();
        let got = rho_from_spectrum(&[c(1.0), c(r), c(-r)], 1e-9).unwrap();
        assert!((got.rho - r).abs() < 1e-15);
        assert_eq!(got.unit_count, 1);
        assert!(got.warnings.is_empty());

        assert_eq!(rho_from_spectrum(&[c(1.0)], 1e-3), Err(Error::NoSubunitEigenvalue));

        let got = rho_from_spectrum(&[c(1.0), c(-1.0), c(0.5)], 1e-9).unwrap();
        assert_eq!(got.rho, 0.5);
        assert_eq!(got.warnings, vec![Warning::PeriodicitySuspected { unit_count: 2 }]);
    }

    #[test]
    fn e1_sweep_stays_below_alpha0() {
        let alpha0 = 2.0 * (0.25f64 * 0.75).sqrt();
        let recs = sweep(&e1(), &[25, 50, 100, 200], DEFAULT_UNIT_TOL);
        let rhos: Vec<f64> = recs.iter().map(|r| r.ok().unwrap().rho_k).collect();
        for (rec, rho) in recs.iter().zip(&rhos) {
            let t = rec.ok().unwrap();
            assert_eq!(t.unit_count, 1);
            assert_eq!(t.basis, SpectrumBasis::Stationary);
            assert_eq!(t.spectrum.len(), t.k + 1);
            assert!(*rho <= alpha0 + 0.01);
        }
        assert!((rhos[2] - rhos[3]).abs() < 1e-2);
        let est = classify(&recs, alpha0, ClassifyConfig::default()).unwrap();
        assert_eq!(est.case, RateCase::CaseABound);
        assert_eq!(est.rho2, alpha0);
    }

    #[test]
    fn spectra_sum_to_trace() {
        for k in [10, 60, 150] {
            let m = truncate_augment(&e2(), k).unwrap();
            let t = analyze_truncation(&e2(), k, DEFAULT_UNIT_TOL).unwrap();
            let sum: Complex64 = t.spectrum.iter().sum();
            assert!((sum.re - m.trace()).abs() < 1e-8 && sum.im.abs() < 1e-8);
            assert!(t.spectrum.iter().all(|z| z.norm() <= 1.0 + 1e-9));
            assert!(t.spectrum.iter().any(|z| (z - 1.0).norm() < 1e-10));
        }
    }

    #[test]
    fn empty_grid_and_failed_levels() {
        assert!(sweep(&e1(), &[], DEFAULT_UNIT_TOL).is_empty());
        let recs = sweep(&e2(), &[1, 10], DEFAULT_UNIT_TOL);
        assert!(recs[0].outcome.is_err());
        assert!(recs[1].outcome.is_ok());
        let mut out = Vec::new();
        write_sweep_csv(&mut out, &recs).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("k,rho_k,unit_count,backward_error,wall_ms,error\n1,,,,,"));
    }

    fn fake(ks: &[usize], rhos: &[f64]) -> Vec<SweepRecord> {
        ks.iter()
            .zip(rhos)
            .map(|(&k, &rho_k)| SweepRecord {
                k,
                outcome: Ok(TruncationResult {
                    k,
                    spectrum: vec![],
                    rho_k,
                    unit_count: 1,
                    backward_error: 0.0,
                    basis: SpectrumBasis::Stationary,
                    warnings: vec![],
                    wall_ms: 0.0,
                }),
            })
            .collect()
    }

    #[test]
    fn decision_rule() {
        let ks = [25, 50, 100, 200];
        let cfg = ClassifyConfig::default();

        let est = classify(&fake(&ks, &[0.90, 0.93, 0.9495, 0.95]), 0.866, cfg).unwrap();
        assert_eq!(est.case, RateCase::CaseBValue);
        assert_eq!(est.rho2, 0.95);
        assert_eq!(est.rho_v, RhoV::Equals(0.95));

        let a0 = 0.8660254;
        let est = classify(&fake(&ks, &[0.84, 0.86, 0.8668, 0.867]), a0, cfg).unwrap();
        assert_eq!(est.case, RateCase::CaseABound);
        assert_eq!(est.rho2, a0);

        let half = cfg.decision_margin / 2.0;
        let est = classify(&fake(&ks, &[0.85, 0.86, a0 + half, a0 + half]), a0, cfg).unwrap();
        assert_eq!(est.case, RateCase::Indeterminate);

        // above the margin but still moving
        let est = classify(&fake(&ks, &[0.85, 0.88, 0.90, 0.95]), a0, cfg).unwrap();
        assert_eq!(est.case, RateCase::Indeterminate);
    }

    #[test]
    fn classify_needs_enough_levels() {
        let cfg = ClassifyConfig::default();
        assert!(matches!(
            classify(&fake(&[25, 50, 100], &[0.5, 0.5, 0.5]), 0.8, cfg),
            Err(Error::InsufficientSweep { .. })
        ));
        assert!(matches!(
            classify(&fake(&[10, 20, 40, 80], &[0.5; 4]), 0.8, cfg),
            Err(Error::InsufficientSweep { .. })
        ));
    }
}
