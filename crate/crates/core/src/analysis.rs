//! End-to-end analysis: structure check, stationary law, explicit bounds,
//! truncation sweep, classification and the oracle cross-checks.

use serde::Serialize;

use crate::bounds::{self, IncrementLaw, SpectralReport, Tau};
use crate::error::{Error, Result};
use crate::kernel::{adjoint, validate_structure, BandKernel, StructureDiagnostics, TailSpec};
use crate::oracle::{self, DecayFit, Lemma1Report};
use crate::stationary::{gth_fixed_vector, stationary_prefix, StationaryDistribution, TailRatio};
use crate::truncation::{
    self, analyze_truncation, classify, ClassifyConfig, RateCase, RateEstimate, SpectrumBasis,
    SweepRecord, Warning,
};

/// Agreement required between the QR spectrum and the charpoly roots.
pub const CHARPOLY_TOL: f64 = 1e-8;
/// Agreement required between `rho_k` and power-iteration decay rates.
pub const DECAY_TOL: f64 = 1e-2;
/// Entrywise tolerance for `P* = P`.
pub const REVERSIBLE_TOL: f64 = 1e-10;

/// Smallest positive mass trusted when choosing the empirical horizon.
const MASS_FLOOR: f64 = 1e-290;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub k_grid: Vec<usize>,
    pub unit_tol: f64,
    pub decision_margin: f64,
    pub stall_tol: f64,
    pub horizon: usize,
    /// Cutoff for the empirical `alpha0`; defaults to `max(10, i0 + N)`.
    pub ell: Option<usize>,
    pub seed: u64,
    pub decay_vectors: usize,
    pub lemma1_samples: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            k_grid: vec![25, 50, 100, 200],
            unit_tol: truncation::DEFAULT_UNIT_TOL,
            decision_margin: truncation::DEFAULT_DECISION_MARGIN,
            stall_tol: truncation::DEFAULT_STALL_TOL,
            horizon: 200,
            ell: None,
            seed: 0,
            decay_vectors: 5,
            lemma1_samples: 1000,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("k grid must be strictly increasing".into()));
        }
        for (name, x) in [
            ("unit tolerance", self.unit_tol),
            ("decision margin", self.decision_margin),
            ("stall tolerance", self.stall_tol),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")));
            }
        }
        Ok(())
    }

    fn classify_config(&self) -> ClassifyConfig {
        ClassifyConfig {
            decision_margin: self.decision_margin,
            stall_tol: self.stall_tol,
        }
    }

    fn ell_for(&self, kernel: &BandKernel) -> usize {
        self.ell
            .unwrap_or_else(|| 10.max(kernel.i0() + kernel.half_width()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    pub i0: usize,
    #[serde(rename = "N")]
    pub half_width: usize,
    pub tail: &'static str,
    pub limit_increments: IncrementLaw,
}

impl ChainSummary {
    pub fn of(kernel: &BandKernel) -> Self {
        ChainSummary {
            i0: kernel.i0(),
            half_width: kernel.half_width(),
            tail: match kernel.tail() {
                TailSpec::Homogeneous(_) => "homogeneous",
                TailSpec::Varying { .. } => "varying",
            },
            limit_increments: kernel.limit_law().clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySummary {
    pub k: usize,
    pub tau_hat: f64,
    pub tau_degenerate: bool,
    pub tail: Option<TailRatio>,
    pub residual: f64,
    /// First entries of the prefix; the whole vector goes to `stationary.csv`.
    pub head: Vec<f64>,
}

impl StationarySummary {
    fn of(pi: &StationaryDistribution) -> Self {
        StationarySummary {
            k: pi.k(),
            tau_hat: pi.tau_hat(),
            tau_degenerate: pi.tau_degenerate(),
            tail: pi.tail().cloned(),
            residual: pi.residual(),
            head: pi.prefix().iter().take(10).copied().collect(),
        }
    }
}

/// Sweep entry without the spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub k: usize,
    pub rho_k: Option<f64>,
    pub unit_count: Option<usize>,
    pub backward_error: Option<f64>,
    pub basis: Option<SpectrumBasis>,
    pub warnings: Vec<Warning>,
    pub wall_ms: Option<f64>,
    pub error: Option<String>,
}

impl SweepSummary {
    pub fn of(record: &SweepRecord) -> Self {
        match &record.outcome {
            Ok(t) => SweepSummary {
                k: t.k,
                rho_k: Some(t.rho_k),
                unit_count: Some(t.unit_count),
                backward_error: Some(t.backward_error),
                basis: Some(t.basis),
                warnings: t.warnings.clone(),
                wall_ms: Some(t.wall_ms),
                error: None,
            },
            Err(e) => SweepSummary {
                k: record.k,
                rho_k: None,
                unit_count: None,
                backward_error: None,
                basis: None,
                warnings: Vec::new(),
                wall_ms: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftCheck {
    /// Drift inequality re-checked on `0..=upto`.
    pub upto: usize,
    /// `max (PV)(i) - alpha V(i) - L`; nonpositive means it holds.
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharpolyCheck {
    pub k: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCheck {
    pub k: usize,
    pub rho_k: f64,
    /// Set when `rho_k` could not be extracted at this level.
    pub error: Option<String>,
    pub fits: Vec<DecayFit>,
    pub all_below: bool,
    pub one_close: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Check {
    pub k: usize,
    pub constant: oracle::LemmaConstant,
    pub report: Lemma1Report,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub charpoly: Vec<CharpolyCheck>,
    pub decay: Vec<DecayCheck>,
    /// `None` when the check could not run; the reason is in `lemma1_skipped`.
    pub lemma1: Option<Lemma1Check>,
    pub lemma1_skipped: Option<String>,
    pub seed: u64,
    pub note: &'static str,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub case: RateCase,
    pub alpha0_closed: f64,
    pub chain: ChainSummary,
    pub config: AnalysisConfig,
    pub structure: StructureDiagnostics,
    pub stationary: StationarySummary,
    pub spectral: SpectralReport,
    pub drift_check: Option<DriftCheck>,
    pub augmentation: &'static str,
    pub sweep: Vec<SweepSummary>,
    pub rate: RateEstimate,
    pub reversible: bool,
    pub reversibility_deviation: f64,
    pub fitted_c_note: &'static str,
    pub oracle: OracleReport,
}

/// Output of [`analyze`]: the report plus the data behind the CSV files.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub stationary: StationaryDistribution,
    pub sweep: Vec<SweepRecord>,
}

/// Level at which `pi` is computed: far enough above the horizon that the
/// truncation edge does not reach the empirical window.
pub fn stationary_level(kernel: &BandKernel, config: &AnalysisConfig) -> usize {
    let n = kernel.half_width();
    let k_max = config.k_grid.last().copied().unwrap_or(0);
    (config.horizon + 20 * n).max(k_max).max(kernel.i0() + 2 * n)
}

/// Horizon actually used: the configured one, pulled in below the point
/// where `pi` underflows.
fn usable_horizon(pi: &StationaryDistribution, n: usize, horizon: usize) -> usize {
    let last = pi
        .prefix()
        .iter()
        .rposition(|&p| p > MASS_FLOOR)
        .unwrap_or(0);
    horizon.min(last.saturating_sub(n))
}

pub fn analyze(kernel: &BandKernel, config: &AnalysisConfig) -> Result<Analysis> {
    config.validate()?;
    let n = kernel.half_width();
    let level = stationary_level(kernel, config);
    let structure = validate_structure(kernel, level);
    if !structure.passed() {
        return Err(Error::StructureCheck {
            k: level,
            reason: structure.failures.join("; "),
        });
    }

    let law = kernel.limit_law();
    let tau = bounds::solve_tau(law)?;
    let pi = stationary_prefix(kernel, level)?;
    let ell = config.ell_for(kernel);
    let horizon = usable_horizon(&pi, n, config.horizon);
    let spectral = bounds::spectral_report(kernel, &pi, ell, horizon, None)?;
    let drift_check = match (&spectral.drift, tau) {
        (Some(cert), Tau::Interior(_)) => {
            let upto = 10 * config.horizon;
            Some(DriftCheck {
                upto,
                max_violation: bounds::drift_violation(kernel, tau, cert, upto)?,
            })
        }
        _ => None,
    };

    let sweep = truncation::sweep(kernel, &config.k_grid, config.unit_tol);
    let mut rate = classify(&sweep, spectral.alpha0_closed, config.classify_config())?;

    let oracle = run_oracles(kernel, config, spectral.alpha0_closed)?;
    rate.fitted_c = oracle
        .decay
        .last()
        .and_then(|d| {
            d.fits
                .iter()
                .filter(|f| f.accepted())
                .map(|f| f.prefactor)
                .reduce(f64::max)
        });

    let k_adj = config.horizon.min(pi.k() / 2).max(kernel.i0() + n);
    let reversibility_deviation = adjoint(kernel, &pi, k_adj)?.max_deviation(kernel, k_adj);
    let reversible = reversibility_deviation <= REVERSIBLE_TOL;

    let report = AnalysisReport {
        case: rate.case,
        alpha0_closed: spectral.alpha0_closed,
        chain: ChainSummary::of(kernel),
        config: config.clone(),
        structure,
        stationary: StationarySummary::of(&pi),
        spectral,
        drift_check,
        augmentation: truncation::AUGMENTATION,
        sweep: sweep.iter().map(SweepSummary::of).collect(),
        rate,
        reversible,
        reversibility_deviation,
        fitted_c_note: if reversible {
            "reversible chain: C = 1 is admissible in theory; the fitted value is informational"
        } else {
            "fitted from power iteration; informational, not certified"
        },
        oracle,
    };
    Ok(Analysis {
        report,
        stationary: pi,
        sweep,
    })
}

/// Levels for the decay check: the two largest grid values up to 100, or the
/// two smallest when fewer than two are that small.
fn decay_levels(grid: &[usize]) -> Vec<usize> {
    let small: Vec<usize> = grid.iter().copied().filter(|&k| k <= 100).collect();
    if small.len() >= 2 {
        small[small.len() - 2..].to_vec()
    } else {
        grid.iter().copied().take(2).collect()
    }
}

fn lemma1_level(grid: &[usize]) -> Option<usize> {
    grid.iter()
        .copied()
        .rfind(|&k| k <= 200)
        .or_else(|| grid.first().copied())
}

pub fn run_oracles(kernel: &BandKernel, config: &AnalysisConfig, alpha0: f64) -> Result<OracleReport> {
    let min_k = kernel.i0() + kernel.half_width();

    let mut charpoly = Vec::new();
    for k in min_k..oracle::MAX_ORACLE_ORDER {
        let m = truncation::truncate_augment(kernel, k)?;
        let qr = truncation::spectrum(&m)?;
        let roots = oracle::charpoly_spectrum(&m)?;
        let max_deviation = oracle::match_spectra(&qr.eigenvalues, &roots)?;
        charpoly.push(CharpolyCheck {
            k,
            max_deviation,
            passed: max_deviation <= CHARPOLY_TOL,
        });
    }

    let mut decay = Vec::new();
    for k in decay_levels(&config.k_grid) {
        let rho_k = match analyze_truncation(kernel, k, config.unit_tol) {
            Ok(t) => t.rho_k,
            Err(e) => {
                decay.push(DecayCheck {
                    k,
                    rho_k: f64::NAN,
                    error: Some(e.to_string()),
                    fits: Vec::new(),
                    all_below: false,
                    one_close: false,
                    passed: false,
                });
                continue;
            }
        };
        let m = truncation::truncate_augment(kernel, k)?;
        let pi = gth_fixed_vector(&m)?;
        let mut fits = Vec::new();
        for (idx, f) in oracle::random_vectors(k + 1, config.decay_vectors, config.seed ^ k as u64)
            .into_iter()
            .enumerate()
        {
            let window = oracle::auto_window(&m, &pi, &f, oracle::DEFAULT_SKIP, 2000)
                .map_err(|e| Error::InvalidArgument(format!("decay vector {idx} at k = {k}: {e}")))?;
            fits.push(oracle::power_decay_rate(&m, &pi, &f, window)?);
        }
        let all_below = fits.iter().all(|f| f.rate <= rho_k + DECAY_TOL);
        let one_close = fits.iter().any(|f| (f.rate - rho_k).abs() <= DECAY_TOL);
        decay.push(DecayCheck {
            k,
            rho_k,
            error: None,
            fits,
            all_below,
            one_close,
            passed: all_below && one_close,
        });
    }

    let alpha = alpha0 + 0.02;
    let mut lemma1_skipped = None;
    let mut lemma1 = None;
    match lemma1_level(&config.k_grid) {
        None => lemma1_skipped = Some("empty k grid".to_string()),
        Some(_) if alpha >= 1.0 => {
            lemma1_skipped = Some(format!("alpha0 + 0.02 = {alpha} is not below 1"))
        }
        Some(k) => {
            let m = truncation::truncate_augment(kernel, k)?;
            let pi = gth_fixed_vector(&m)?;
            if pi.iter().any(|&p| !(p > f64::MIN_POSITIVE)) {
                lemma1_skipped = Some(format!("pi_k underflows at k = {k}"));
            } else {
                let constant = oracle::lemma1_constant(&m, &pi, alpha)?;
                let l = constant.l.max(f64::MIN_POSITIVE);
                let report =
                    oracle::lemma1_check(&m, &pi, alpha, l, config.lemma1_samples, config.seed)?;
                lemma1 = Some(Lemma1Check {
                    k,
                    constant,
                    passed: report.violations == 0,
                    report,
                });
            }
        }
    }

    let passed = charpoly.iter().all(|c| c.passed)
        && decay.iter().all(|d| d.passed)
        && lemma1.as_ref().is_none_or(|l| l.passed);
    Ok(OracleReport {
        charpoly,
        decay,
        lemma1,
        lemma1_skipped,
        seed: config.seed,
        note: "decay test vectors are seeded standard normals; which vector excites the slowest mode is a heuristic",
        passed,
    })
}
