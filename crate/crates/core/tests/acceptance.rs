//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bandchain::bounds::{
    alpha0_closed_form, alpha0_empirical, drift_constants, drift_ratio, solve_tau, IncrementLaw,
    Tau,
};
use bandchain::kernel::{validate_structure, BandKernel, Row};
use bandchain::oracle::{
    charpoly_spectrum, lemma1_check, lemma1_constant, lemma1_margin, match_spectra,
    power_decay_rate, random_vectors, auto_window, DEFAULT_SKIP,
};
use bandchain::stationary::{gth_fixed_vector, stationary_prefix, tail_ratio};
use bandchain::truncation::{
    classify, rho_from_spectrum, spectrum, sweep, truncate_augment, ClassifyConfig, RateCase,
    Warning,
};
use bandchain::Error;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn walk(increments: &[(i64, f64)], boundary: &[(usize, f64)]) -> BandKernel {
    let incr: BTreeMap<i64, f64> = increments.iter().copied().collect();
    let g = -increments.iter().map(|p| p.0).min().unwrap() as usize;
    let d = increments.iter().map(|p| p.0).max().unwrap() as usize;
    let row: Row = boundary.iter().copied().collect();
    BandKernel::homogeneous_rw(g, d, &incr, vec![row]).unwrap()
}

fn e1() -> BandKernel {
    walk(&[(-1, 0.75), (1, 0.25)], &[(0, 0.75), (1, 0.25)])
}

fn e2() -> BandKernel {
    walk(&[(-1, 0.7), (1, 0.2), (2, 0.1)], &[(0, 0.7), (1, 0.2), (2, 0.1)])
}

const E1_ALPHA0: f64 = 0.8660254037844386; // 2 sqrt(0.25 * 0.75)

fn e2_tau() -> f64 {
    (0.3 + 0.37f64.sqrt()) / 1.4
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    ensure(spent < limit, || format!("took {spent:?}, limit {limit:?}"))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let kernel = e1();
    let law = kernel.limit_law();
    let a0 = alpha0_closed_form(law, solve_tau(law).map_err(|e| e.to_string())?);
    ensure((a0 - E1_ALPHA0).abs() <= 1e-9, || format!("closed form {a0}"))?;
    let pi = stationary_prefix(&kernel, 220).map_err(|e| e.to_string())?;
    let emp = alpha0_empirical(&kernel, &pi, 10, 200).map_err(|e| e.to_string())?;
    ensure((emp.value - a0).abs() <= 1e-4, || format!("empirical {}", emp.value))?;
    within_time(start, Duration::from_secs(1))?;
    Ok(format!(
        "alpha0 closed {a0:.10}, empirical {:.10}, {:?}",
        emp.value,
        start.elapsed()
    ))
}

fn criterion_2() -> Outcome {
    let mut detail = Vec::new();
    for (name, law, oracle) in [
        ("E1", e1().limit_law().clone(), 1.0 / 3.0),
        ("E2", e2().limit_law().clone(), e2_tau()),
    ] {
        let tau = solve_tau(&law).map_err(|e| e.to_string())?.value();
        let residual = (law.psi(tau) - 1.0).abs();
        ensure(residual <= 1e-12, || format!("{name}: |psi(tau) - 1| = {residual:e}"))?;
        ensure((tau - oracle).abs() <= 1e-12, || format!("{name}: tau {tau} vs {oracle}"))?;
        for j in 1..=100 {
            let s = j as f64 / 101.0;
            let inside = tau + s * (1.0 - tau);
            let below = s * tau;
            let above = 1.0 + 9.0 * s;
            ensure(law.psi(inside) < 1.0, || format!("{name}: psi({inside}) >= 1"))?;
            ensure(law.psi(below) > 1.0, || format!("{name}: psi({below}) <= 1"))?;
            ensure(law.psi(above) > 1.0, || format!("{name}: psi({above}) <= 1"))?;
        }
        detail.push(format!("{name} tau {tau:.10} residual {residual:.1e}"));
    }
    Ok(detail.join("; "))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let pi = stationary_prefix(&e1(), 60).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for n in 0..=40 {
        let exact = (2.0 / 3.0) * (1.0f64 / 3.0).powi(n as i32);
        worst = worst.max((pi.prefix()[n] - exact).abs());
    }
    ensure(worst <= 1e-9, || format!("entrywise error {worst:e}"))?;
    let t = tail_ratio(&pi, 20..=40).map_err(|e| e.to_string())?;
    ensure((t.mean - 1.0 / 3.0).abs() <= 1e-8, || format!("tail ratio {}", t.mean))?;
    within_time(start, Duration::from_secs(1))?;
    Ok(format!(
        "max entry error {worst:.1e}, tail ratio {:.12}, {:?}",
        t.mean,
        start.elapsed()
    ))
}

fn spectra_agree(m: &DMatrix<f64>) -> Result<f64, String> {
    let qr = spectrum(m).map_err(|e| e.to_string())?.eigenvalues;
    let roots = charpoly_spectrum(m).map_err(|e| e.to_string())?;
    let gap = match_spectra(&qr, &roots).map_err(|e| e.to_string())?;
    ensure(gap <= 1e-8, || format!("order {}: deviation {gap:e}", m.nrows()))?;
    Ok(gap)
}

fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

fn criterion_4() -> Outcome {
    let p2 = truncate_augment(&e1(), 2).map_err(|e| e.to_string())?;
    let r = 0.1875f64.sqrt();
    let expected = [
        Complex64::new(1.0, 0.0),
        Complex64::new(r, 0.0),
        Complex64::new(-r, 0.0),
    ];
    let qr = spectrum(&p2).map_err(|e| e.to_string())?.eigenvalues;
    let gap = match_spectra(&qr, &expected).map_err(|e| e.to_string())?;
    ensure(gap <= 1e-8, || format!("P_2 spectrum off by {gap:e}"))?;
    let mut worst = spectra_agree(&p2)?;
    let mut count = 1;
    for kernel in [e1(), e2()] {
        for k in kernel.i0() + kernel.half_width()..=7 {
            let m = truncate_augment(&kernel, k).map_err(|e| e.to_string())?;
            worst = worst.max(spectra_agree(&m)?);
            count += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..20 {
        let m = random_stochastic(&mut rng, 2 + i % 7);
        worst = worst.max(spectra_agree(&m)?);
        count += 1;
    }
    Ok(format!("P_2 deviation {gap:.1e}; {count} matrices, worst QR/charpoly gap {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let records = sweep(&e1(), &[25, 50, 100, 200], 1e-9);
    let rho: Vec<f64> = records
        .iter()
        .map(|r| r.ok().map(|t| t.rho_k).ok_or_else(|| format!("level {} failed", r.k)))
        .collect::<Result<_, _>>()?;
    for (r, k) in rho.iter().zip([25, 50, 100, 200]) {
        ensure(*r <= E1_ALPHA0 + 0.01, || format!("rho_{k} = {r}"))?;
    }
    let rate = classify(&records, E1_ALPHA0, ClassifyConfig::default()).map_err(|e| e.to_string())?;
    ensure(rate.case == RateCase::CaseABound, || format!("classified {:?}", rate.case))?;
    let gap = (rho[2] - rho[3]).abs();
    ensure(gap <= 1e-2, || format!("|rho_100 - rho_200| = {gap}"))?;
    within_time(start, Duration::from_secs(60))?;
    Ok(format!(
        "rho_k = {:.6?}, CaseA_bound, gap {gap:.1e}, {:?}",
        rho,
        start.elapsed()
    ))
}

fn criterion_6() -> Outcome {
    let kernel = e1();
    let m = truncate_augment(&kernel, 100).map_err(|e| e.to_string())?;
    let pi = gth_fixed_vector(&m).map_err(|e| e.to_string())?;
    let rho = sweep(&kernel, &[100], 1e-9)[0]
        .ok()
        .map(|t| t.rho_k)
        .ok_or("P_100 spectrum failed")?;
    let mut rates = Vec::new();
    for f in random_vectors(101, 5, 11) {
        let window = auto_window(&m, &pi, &f, DEFAULT_SKIP, 2000).map_err(|e| e.to_string())?;
        rates.push(power_decay_rate(&m, &pi, &f, window).map_err(|e| e.to_string())?.rate);
    }
    ensure(rates.iter().all(|r| *r <= rho + 1e-2), || format!("rates {rates:?} vs rho {rho}"))?;
    ensure(rates.iter().any(|r| (r - rho).abs() <= 1e-2), || {
        format!("no rate within 1e-2 of {rho}: {rates:?}")
    })?;

    let p2 = truncate_augment(&kernel, 2).map_err(|e| e.to_string())?;
    let pi2 = gth_fixed_vector(&p2).map_err(|e| e.to_string())?;
    let fit = power_decay_rate(&p2, &pi2, &[1.0, 0.0, 0.0], 5..=40).map_err(|e| e.to_string())?;
    ensure((fit.rate - 0.4330127).abs() <= 1e-3, || format!("P_2 rate {}", fit.rate))?;
    Ok(format!("rho_100 {rho:.6}, rates {rates:.6?}; P_2 rate {:.7}", fit.rate))
}

fn criterion_7() -> Outcome {
    let mut detail = Vec::new();
    for (name, kernel) in [("E1", e1()), ("E2", e2())] {
        let law = kernel.limit_law();
        let alpha = alpha0_closed_form(law, solve_tau(law).map_err(|e| e.to_string())?) + 0.02;
        let m = truncate_augment(&kernel, 200).map_err(|e| e.to_string())?;
        let pi = gth_fixed_vector(&m).map_err(|e| e.to_string())?;
        let c = lemma1_constant(&m, &pi, alpha).map_err(|e| e.to_string())?;
        let report = lemma1_check(&m, &pi, alpha, c.l, 1000, 7).map_err(|e| e.to_string())?;
        ensure(report.violations == 0, || {
            format!("{name}: {} violations, max {}", report.violations, report.max_violation)
        })?;
        detail.push(format!("{name} L {:.4} max margin {:.3}", c.l, report.max_violation));
    }

    // below alpha0: a far tail indicator violates the inequality for a fixed L
    let m = truncate_augment(&e1(), 200).map_err(|e| e.to_string())?;
    let pi = gth_fixed_vector(&m).map_err(|e| e.to_string())?;
    let mut f = vec![0.0; 201];
    f[150] = 1e40;
    let margin = lemma1_margin(&m, &pi, 0.2, 1.0, &f);
    ensure(margin > 0.0, || format!("no violation at alpha = 0.2 (margin {margin:e})"))?;
    detail.push(format!("alpha 0.2 tail-indicator margin {margin:.3e} > 0"));
    Ok(detail.join("; "))
}

fn criterion_8() -> Outcome {
    let kernel = e1();
    let tau = solve_tau(kernel.limit_law()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 1..=10_000 {
        let r = drift_ratio(&kernel, tau, i).map_err(|e| e.to_string())?;
        worst = worst.max((r - E1_ALPHA0).abs());
    }
    ensure(worst <= 1e-12, || format!("tail ratio off by {worst:e}"))?;
    let cert = drift_constants(&kernel, tau, E1_ALPHA0 + 1e-9, 200).map_err(|e| e.to_string())?;
    ensure((cert.l - 0.3169873).abs() <= 1e-6, || format!("L = {}", cert.l))?;
    Ok(format!("tail ratio deviation {worst:.1e} on 1..=10000, L {:.7}", cert.l))
}

fn criterion_9() -> Outcome {
    let flat = IncrementLaw::new([(-1, 0.5), (1, 0.5)]).map_err(|e| e.to_string())?;
    ensure(matches!(solve_tau(&flat), Err(Error::NoSubunitRoot { .. })), || {
        "zero-mean law did not give NoSubunitRoot".into()
    })?;

    // the period-2 walk; its reflecting truncation is bipartite
    let periodic = walk(&[(-1, 0.5), (1, 0.5)], &[(1, 1.0)]);
    let diag = validate_structure(&periodic, 20);
    ensure(!diag.aperiodic, || "period-2 walk reported aperiodic".into())?;
    let reflecting = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 1.0, 0.0, 0.0, //
            0.5, 0.0, 0.5, 0.0, //
            0.0, 0.5, 0.0, 0.5, //
            0.0, 0.0, 1.0, 0.0,
        ],
    );
    let eig = spectrum(&reflecting).map_err(|e| e.to_string())?.eigenvalues;
    let rho = rho_from_spectrum(&eig, 1e-9).map_err(|e| e.to_string())?;
    ensure(
        rho.warnings.contains(&Warning::PeriodicitySuspected { unit_count: 2 }),
        || format!("warnings {:?}", rho.warnings),
    )?;

    let lazy = IncrementLaw::new([(-1, 0.7), (0, 0.3)]).map_err(|e| e.to_string())?;
    let tau = solve_tau(&lazy).map_err(|e| e.to_string())?;
    ensure(tau == Tau::Zero, || format!("tau {tau:?}"))?;
    let a0 = alpha0_closed_form(&lazy, tau);
    ensure(a0 == 0.3, || format!("alpha0 {a0}"))?;
    Ok(format!(
        "NoSubunitRoot; period {:?} flagged, PeriodicitySuspected (rho {:.3}); tau = 0 gives alpha0 = a0 = {a0}",
        diag.period, rho.rho
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("alpha0 two-route agreement", criterion_1),
        ("psi-root certification", criterion_2),
        ("stationary tail", criterion_3),
        ("eigen-oracle equivalence", criterion_4),
        ("truncation dichotomy", criterion_5),
        ("decay consistency", criterion_6),
        ("Lemma 1 inequality", criterion_7),
        ("drift certificate", criterion_8),
        ("degenerate handling", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
