//! `bandchain analyze | sweep | verify`.
//!
//! Exit codes: 0 success (case A or B for `analyze`), 1 operational error,
//! 2 indeterminate classification, 3 oracle disagreement (`verify`).

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{analyze, run_oracles, Analysis, AnalysisConfig};
use crate::bounds::{alpha0_closed_form, solve_tau};
use crate::chain_spec::{load_kernel, SpecError};
use crate::error::Error;
use crate::format::{fmt17, to_json17};
use crate::truncation::{self, write_sweep_csv, RateCase};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_INDETERMINATE: u8 = 2;
pub const EXIT_ORACLE: u8 = 3;

/// Environment variable capping the sweep thread pool.
pub const THREADS_ENV: &str = "BANDCHAIN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bandchain", version, about = "Convergence-rate certificates for band Markov chains on the nonnegative integers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full report: bounds, stationary tail, sweep, classification, oracles.
    Analyze(CommonArgs),
    /// CSV of rho_k over the k grid.
    Sweep(CommonArgs),
    /// Oracle cross-checks only.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Chain specification (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Strictly increasing truncation levels.
    #[arg(long, value_delimiter = ',', default_value = "25,50,100,200")]
    pub k_grid: Vec<usize>,
    #[arg(long, default_value_t = truncation::DEFAULT_UNIT_TOL)]
    pub unit_tol: f64,
    /// Decision margin around alpha0 for the classification.
    #[arg(long, default_value_t = truncation::DEFAULT_DECISION_MARGIN)]
    pub margin: f64,
    /// Last index of the empirical alpha0 window.
    #[arg(long, default_value_t = 200)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            k_grid: self.k_grid.clone(),
            unit_tol: self.unit_tol,
            decision_margin: self.margin,
            horizon: self.horizon,
            seed: self.seed,
            ..AnalysisConfig::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Chain(#[from] Error),
    #[error("writing {}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },
    #[error("bad {THREADS_ENV} value `{0}`")]
    Threads(String),
}

impl CliError {
    /// Variant name of the underlying error, e.g. `NoSubunitRoot`.
    pub fn kind(&self) -> String {
        match self {
            CliError::Chain(e) | CliError::Spec(SpecError::Chain { source: e, .. }) => {
                let debug = format!("{e:?}");
                debug
                    .split(|c: char| !c.is_alphanumeric())
                    .next()
                    .unwrap_or_default()
                    .to_string()
            }
            CliError::Spec(SpecError::Io { .. }) => "FileNotFound".into(),
            CliError::Spec(SpecError::Json { .. }) => "ParseError".into(),
            CliError::Output { .. } => "OutputError".into(),
            CliError::Threads(_) => "BadThreadCount".into(),
        }
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, bytes))
        .map_err(|source| CliError::Output { path, source })
}

fn emit(out: &mut dyn Write, dir: Option<&Path>, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    match dir {
        Some(dir) => write_file(dir, name, bytes),
        None => out.write_all(bytes).map_err(|source| CliError::Output {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn spectra_csv(analysis: &Analysis) -> Vec<u8> {
    let mut s = String::from("k,index,re,im,modulus\n");
    for t in analysis.sweep.iter().filter_map(|r| r.ok()) {
        for (i, z) in t.spectrum.iter().enumerate() {
            s.push_str(&format!("{},{i},{},{},{}\n", t.k, fmt17(z.re), fmt17(z.im), fmt17(z.norm())));
        }
    }
    s.into_bytes()
}

fn cmd_analyze(args: &CommonArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let kernel = load_kernel(&args.spec)?;
    let analysis = analyze(&kernel, &args.config())?;
    let report = &analysis.report;
    let json = to_json17(report).expect("report serialises") + "\n";
    match &args.out {
        Some(dir) => {
            write_file(dir, "report.json", json.as_bytes())?;
            let mut sweep = Vec::new();
            write_sweep_csv(&mut sweep, &analysis.sweep).expect("in-memory write");
            write_file(dir, "sweep.csv", &sweep)?;
            let mut pi = Vec::new();
            analysis.stationary.write_csv(&mut pi).expect("in-memory write");
            write_file(dir, "stationary.csv", &pi)?;
            write_file(dir, "spectra.csv", &spectra_csv(&analysis))?;
            let summary = format!(
                "case={} alpha0={} rho2={} reversible={}\n",
                serde_json::to_value(report.case).expect("case").as_str().unwrap_or_default(),
                fmt17(report.alpha0_closed),
                fmt17(report.rate.rho2),
                report.reversible
            );
            emit(out, None, "", summary.as_bytes())?;
        }
        None => emit(out, None, "", json.as_bytes())?,
    }
    Ok(match report.case {
        RateCase::Indeterminate => EXIT_INDETERMINATE,
        _ => EXIT_OK,
    })
}

fn cmd_sweep(args: &CommonArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let kernel = load_kernel(&args.spec)?;
    let config = args.config();
    config.validate()?;
    let records = truncation::sweep(&kernel, &config.k_grid, config.unit_tol);
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &records).expect("in-memory write");
    emit(out, args.out.as_deref(), "sweep.csv", &csv)?;
    Ok(EXIT_OK)
}

fn cmd_verify(args: &CommonArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let kernel = load_kernel(&args.spec)?;
    let config = args.config();
    config.validate()?;
    let law = kernel.limit_law();
    let alpha0 = alpha0_closed_form(law, solve_tau(law)?);
    let report = run_oracles(&kernel, &config, alpha0)?;
    let json = to_json17(&report).expect("report serialises") + "\n";
    emit(out, args.out.as_deref(), "oracle.json", json.as_bytes())?;
    Ok(if report.passed { EXIT_OK } else { EXIT_ORACLE })
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>, CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw.trim().parse().map_err(|_| CliError::Threads(raw.clone()))?;
    if n == 0 {
        return Err(CliError::Threads(raw));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|_| CliError::Threads(raw))
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<u8, CliError> {
    let run = || {
        let mut buf = Vec::new();
        let code = match &cli.command {
            Command::Analyze(a) => cmd_analyze(a, &mut buf),
            Command::Sweep(a) => cmd_sweep(a, &mut buf),
            Command::Verify(a) => cmd_verify(a, &mut buf),
        }?;
        Ok::<_, CliError>((code, buf))
    };
    let (code, buf) = match thread_pool()? {
        Some(pool) => pool.install(run)?,
        None => run()?,
    };
    emit(out, None, "", &buf)?;
    Ok(code)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}\nkind: {}", e.kind());
            EXIT_ERROR
        }
    }
}
