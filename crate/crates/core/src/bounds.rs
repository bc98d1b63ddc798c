//! Explicit rate bounds: the increment generating function `psi`, its subunit
//! root `tau`, the essential-spectral-radius bound `alpha0` (closed form and
//! finite-horizon surrogate), and the drift certificate for `V(n) = gamma^n`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{BandKernel, TailSpec, ROW_SUM_TOL};
use crate::stationary::StationaryDistribution;

/// Limit increments `a_m = lim_i P(i, i + m)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct IncrementLaw {
    weights: BTreeMap<i64, f64>,
}

impl IncrementLaw {
    pub fn new(weights: impl IntoIterator<Item = (i64, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (m, a) in weights {
            if !(a >= 0.0) {
                return Err(Error::NegativeEntry {
                    row: None,
                    column: m,
                    value: a,
                });
            }
            *map.entry(m).or_insert(0.0) += a;
        }
        let sum: f64 = map.values().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NonStochasticRow { row: None, sum });
        }
        Ok(IncrementLaw { weights: map })
    }

    /// Largest downward jump with positive weight.
    pub fn g(&self) -> usize {
        self.support().next().map_or(0, |m| (-m).max(0) as usize)
    }

    /// Largest upward jump with positive weight.
    pub fn d(&self) -> usize {
        self.support().last().map_or(0, |m| m.max(0) as usize)
    }

    fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.weights.iter().filter(|&(_, &a)| a > 0.0).map(|(&m, _)| m)
    }

    pub fn weight(&self, m: i64) -> f64 {
        self.weights.get(&m).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.weights.iter().map(|(&m, &a)| (m, a))
    }

    /// `sum_k k a_k`; the chain drifts towards 0 when this is negative.
    pub fn mean_increment(&self) -> f64 {
        self.iter().map(|(m, a)| m as f64 * a).sum()
    }

    /// `psi(t) = sum_k a_k t^(-k)`.
    pub fn psi(&self, t: f64) -> f64 {
        self.iter().map(|(m, a)| a * t.powi(-m as i32)).sum()
    }

    pub fn psi_derivative(&self, t: f64) -> f64 {
        self.iter()
            .map(|(m, a)| -(m as f64) * a * t.powi(-m as i32 - 1))
            .sum()
    }
}

/// Limit of `pi(i+1)/pi(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tau {
    /// Super-geometric decay: every positive limit increment vanishes.
    Zero,
    Interior(f64),
}

impl Tau {
    pub fn value(self) -> f64 {
        match self {
            Tau::Zero => 0.0,
            Tau::Interior(t) => t,
        }
    }
}

const BRACKET_EPS: f64 = 1e-12;

/// Root of `psi(t) = 1` in `(0, 1)`.
///
/// `psi` is convex with `psi(1) = 1` and `psi'(1) = -mean > 0`, so it dips
/// below 1 on `(tau, 1)`. The minimiser is located first so the root is
/// bracketed on a branch where `psi` is decreasing; bisection to width 1e-8
/// is then polished with Newton steps.
pub fn solve_tau(law: &IncrementLaw) -> Result<Tau> {
    let mean = law.mean_increment();
    if !(mean < 0.0) {
        return Err(Error::NoSubunitRoot {
            mean_increment: mean,
        });
    }
    if law.d() == 0 {
        return Ok(Tau::Zero);
    }

    // minimiser of psi on (0, 1): psi' < 0 near 0, psi'(1) > 0
    let (mut lo, mut hi) = (BRACKET_EPS, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if law.psi_derivative(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let t_min = 0.5 * (lo + hi);
    if !(law.psi(t_min) < 1.0) {
        return Err(Error::NoSubunitRoot {
            mean_increment: mean,
        });
    }

    let (mut lo, mut hi) = (BRACKET_EPS, t_min);
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if law.psi(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let step = (law.psi(t) - 1.0) / law.psi_derivative(t);
        let next = t - step;
        if !(next > lo && next < hi) {
            break;
        }
        t = next;
        if step.abs() <= 4.0 * f64::EPSILON * t {
            break;
        }
    }
    Ok(Tau::Interior(t))
}

/// `alpha0 = sum_m a_m tau^(-m/2) = psi(sqrt(tau))`, or `a_0` when `tau = 0`.
pub fn alpha0_closed_form(law: &IncrementLaw, tau: Tau) -> f64 {
    match tau {
        Tau::Zero => law.weight(0),
        Tau::Interior(t) => law.psi(t.sqrt()),
    }
}

pub fn mean_increment(law: &IncrementLaw) -> f64 {
    law.mean_increment()
}

/// `beta_m(i) = sqrt(P(i, i+m) P*(i+m, i)) = P(i, i+m) sqrt(pi(i) / pi(i+m))`.
pub fn beta(kernel: &BandKernel, pi: &StationaryDistribution, i: usize, m: i64) -> Result<f64> {
    if i < kernel.i0() || m.unsigned_abs() as usize > kernel.half_width() {
        return Err(Error::InvalidArgument(format!(
            "beta needs i >= i0 = {} and |m| <= N = {}",
            kernel.i0(),
            kernel.half_width()
        )));
    }
    let target = i as i64 + m;
    if target < 0 {
        return Ok(0.0);
    }
    let j = target as usize;
    let p = kernel.entry(i, j);
    if p == 0.0 {
        return Ok(0.0);
    }
    let prefix = pi.prefix();
    let len = prefix.len();
    let (pi_i, pi_j) = match (prefix.get(i), prefix.get(j)) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::IndexOutOfPrefix { index: i.max(j), len }),
    };
    if pi_i <= 0.0 {
        return Err(Error::ZeroMass { index: i });
    }
    if pi_j <= 0.0 {
        return Err(Error::ZeroMass { index: j });
    }
    Ok(p * (pi_i / pi_j).sqrt())
}

/// Finite-horizon surrogate of the limsup sum: `sum_m sup_{ell <= i <= horizon} beta_m(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalAlpha0 {
    pub value: f64,
    pub ell: usize,
    pub horizon: usize,
}

pub fn alpha0_empirical(
    kernel: &BandKernel,
    pi: &StationaryDistribution,
    ell: usize,
    horizon: usize,
) -> Result<EmpiricalAlpha0> {
    let n = kernel.half_width();
    if ell < kernel.i0() || horizon < ell + 10 * n {
        return Err(Error::InvalidArgument(format!(
            "need ell >= i0 = {} and horizon >= ell + 10N = {}",
            kernel.i0(),
            ell + 10 * n
        )));
    }
    let n = n as i64;
    let mut value = 0.0;
    for m in -n..=n {
        let mut sup: f64 = 0.0;
        for i in ell..=horizon {
            sup = sup.max(beta(kernel, pi, i, m)?);
        }
        value += sup;
    }
    Ok(EmpiricalAlpha0 {
        value,
        ell,
        horizon,
    })
}

/// Constants of `PV <= alpha V + L` for `V(n) = gamma^n`, `gamma = tau^(-1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftCertificate {
    pub gamma: f64,
    pub alpha: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// Contraction factor of the general drift condition; equal to `alpha`.
    pub delta: f64,
    pub alpha0: f64,
    pub horizon: usize,
    /// `sup (PV)(i)/V(i)` over tail rows `i0..=horizon`; for a homogeneous
    /// tail this is `psi(sqrt(tau))` for every tail row.
    pub tail_ratio: f64,
}

/// `(PV)(i) / V(i) = sum_j P(i, j) gamma^(j - i)`, evaluated without forming `V(i)`.
pub fn drift_ratio(kernel: &BandKernel, tau: Tau, i: usize) -> Result<f64> {
    let gamma = gamma_of(tau)?;
    Ok(kernel
        .row(i)
        .iter()
        .map(|(&j, &p)| p * gamma.powi((j as i64 - i as i64) as i32))
        .sum())
}

fn gamma_of(tau: Tau) -> Result<f64> {
    match tau {
        Tau::Zero => Err(Error::DegenerateTail),
        Tau::Interior(t) => Ok(t.sqrt().recip()),
    }
}

/// Drift certificate for a chosen `alpha` in `(alpha0, 1)`.
///
/// On a homogeneous tail `(PV)(i)/V(i) = psi(sqrt(tau)) = alpha0 < alpha`, so
/// only boundary rows can contribute to `L`. Varying tails are scanned up to
/// `horizon`.
pub fn drift_constants(
    kernel: &BandKernel,
    tau: Tau,
    alpha: f64,
    horizon: usize,
) -> Result<DriftCertificate> {
    let gamma = gamma_of(tau)?;
    let alpha0 = alpha0_closed_form(kernel.limit_law(), tau);
    if !(alpha > alpha0) {
        return Err(Error::AlphaTooSmall { alpha, alpha0 });
    }
    if !(alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be < 1")));
    }
    let ln_gamma = gamma.ln();
    let scan_end = match kernel.tail() {
        TailSpec::Homogeneous(_) => kernel.i0(),
        TailSpec::Varying { .. } => horizon.max(kernel.i0()) + 1,
    };
    let mut l: f64 = 0.0;
    for i in 0..scan_end {
        let excess = drift_ratio(kernel, tau, i)? - alpha;
        if excess > 0.0 {
            l = l.max((i as f64 * ln_gamma).exp() * excess);
        }
    }
    let tail_ratio = match kernel.tail() {
        TailSpec::Homogeneous(law) => law.psi(tau.value().sqrt()),
        TailSpec::Varying { .. } => {
            let mut sup = f64::NEG_INFINITY;
            for i in kernel.i0()..=horizon.max(kernel.i0()) {
                sup = sup.max(drift_ratio(kernel, tau, i)?);
            }
            sup
        }
    };
    Ok(DriftCertificate {
        gamma,
        alpha,
        l,
        delta: alpha,
        alpha0,
        horizon,
        tail_ratio,
    })
}

/// Largest `(PV)(i) - alpha V(i) - L` over `0..=upto`; the drift inequality
/// holds on that range when the result is `<= 0`.
pub fn drift_violation(
    kernel: &BandKernel,
    tau: Tau,
    cert: &DriftCertificate,
    upto: usize,
) -> Result<f64> {
    let ln_gamma = gamma_of(tau)?.ln();
    let mut worst = -cert.l;
    for i in 0..=upto {
        let excess = drift_ratio(kernel, tau, i)? - cert.alpha;
        if excess > 0.0 {
            worst = worst.max((i as f64 * ln_gamma).exp() * excess - cert.l);
        }
    }
    Ok(worst)
}

/// Everything the explicit formulas say about a chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub tau: Tau,
    pub alpha0_closed: f64,
    pub alpha0_empirical: EmpiricalAlpha0,
    pub mean_increment: f64,
    /// `None` when `tau = 0` (no geometric Lyapunov function).
    pub drift: Option<DriftCertificate>,
    /// Upper bound on the essential spectral radius on `l2(pi)`.
    pub ess_radius_bound: f64,
}

/// Default drift contraction: one percent of the way from `alpha0` to 1.
pub fn default_drift_alpha(alpha0: f64) -> f64 {
    alpha0 + (1.0 - alpha0) / 100.0
}

pub fn spectral_report(
    kernel: &BandKernel,
    pi: &StationaryDistribution,
    ell: usize,
    horizon: usize,
    alpha: Option<f64>,
) -> Result<SpectralReport> {
    let law = kernel.limit_law();
    let tau = solve_tau(law)?;
    let alpha0_closed = alpha0_closed_form(law, tau);
    let alpha0_empirical = alpha0_empirical(kernel, pi, ell, horizon)?;
    let drift = match tau {
        Tau::Zero => None,
        Tau::Interior(_) => Some(drift_constants(
            kernel,
            tau,
            alpha.unwrap_or_else(|| default_drift_alpha(alpha0_closed)),
            horizon,
        )?),
    };
    Ok(SpectralReport {
        tau,
        alpha0_closed,
        alpha0_empirical,
        mean_increment: law.mean_increment(),
        drift,
        ess_radius_bound: alpha0_closed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e1_law() -> IncrementLaw {
        IncrementLaw::new([(-1, 0.75), (1, 0.25)]).unwrap()
    }

    fn e2_law() -> IncrementLaw {
        IncrementLaw::new([(-1, 0.7), (1, 0.2), (2, 0.1)]).unwrap()
    }

    // E2: psi(t) = 1  <=>  (t - 1)(0.7 t^2 - 0.3 t - 0.1) = 0
    fn e2_tau_oracle() -> f64 {
        (0.3 + 0.37f64.sqrt()) / 1.4
    }

    #[test]
    fn psi_values() {
        let law = e1_law();
        assert_eq!(law.psi(1.0), 1.0);
        assert!((law.psi(1.0 / 3.0) - 1.0).abs() < 1e-15);
        let expected = 2.0 * 0.1875f64.sqrt();
        assert!((law.psi((1.0f64 / 3.0).sqrt()) - expected).abs() < 1e-15);
        assert!((expected - 0.8660254).abs() < 1e-7);
    }

    #[test]
    fn tau_for_e1_and_e2() {
        let t = solve_tau(&e1_law()).unwrap().value();
        assert!((t - 1.0 / 3.0).abs() < 1e-12);
        let t = solve_tau(&e2_law()).unwrap().value();
        assert!((t - e2_tau_oracle()).abs() < 1e-12);
        assert!((t - 0.6487688).abs() < 1e-7);
    }

    #[test]
    fn zero_mean_has_no_subunit_root() {
        let law = IncrementLaw::new([(-1, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(law.mean_increment(), 0.0);
        assert!(matches!(solve_tau(&law), Err(Error::NoSubunitRoot { .. })));
        let up = IncrementLaw::new([(-1, 0.4), (1, 0.6)]).unwrap();
        assert!(matches!(solve_tau(&up), Err(Error::NoSubunitRoot { .. })));
    }

    #[test]
    fn alpha0_closed_values() {
        let a = alpha0_closed_form(&e1_law(), Tau::Interior(1.0 / 3.0));
        assert!((a - 2.0 * (0.25f64 * 0.75).sqrt()).abs() < 1e-15);

        let tau = e2_tau_oracle();
        let direct = 0.7 * tau.sqrt() + 0.2 / tau.sqrt() + 0.1 / tau;
        let a = alpha0_closed_form(&e2_law(), Tau::Interior(tau));
        assert!((a - direct).abs() < 1e-15);
        assert!((a - 0.9662659).abs() < 1e-6);

        let down = IncrementLaw::new([(-1, 0.7), (0, 0.3)]).unwrap();
        assert_eq!(solve_tau(&down).unwrap(), Tau::Zero);
        assert_eq!(alpha0_closed_form(&down, Tau::Zero), 0.3);
    }

    #[test]
    fn mean_increments() {
        assert_eq!(e1_law().mean_increment(), -0.5);
        assert!((e2_law().mean_increment() + 0.3).abs() < 1e-15);
    }

    #[test]
    fn law_rejects_bad_weights() {
        assert!(IncrementLaw::new([(-1, 0.6), (1, 0.5)]).is_err());
        assert!(IncrementLaw::new([(-1, 1.1), (1, -0.1)]).is_err());
        let law = IncrementLaw::new([(-2, 0.5), (0, 0.0), (3, 0.5)]).unwrap();
        assert_eq!((law.g(), law.d()), (2, 3));
    }

    fn arb_law() -> impl Strategy<Value = IncrementLaw> {
        (1usize..4, 1usize..4)
            .prop_flat_map(|(g, d)| {
                (
                    Just(g),
                    prop::collection::vec(0.05f64..1.0, g + d + 1),
                )
            })
            .prop_filter_map("needs negative drift", |(g, raw)| {
                let total: f64 = raw.iter().sum();
                let law = IncrementLaw::new(
                    raw.iter()
                        .enumerate()
                        .map(|(idx, w)| (idx as i64 - g as i64, w / total)),
                )
                .ok()?;
                (law.mean_increment() < -0.05).then_some(law)
            })
    }

    proptest! {
        #[test]
        fn psi_trichotomy_and_alpha0_below_one(law in arb_law()) {
            prop_assert!((law.psi(1.0) - 1.0).abs() < 1e-12);
            let tau = solve_tau(&law).unwrap().value();
            prop_assert!(tau > 0.0 && tau < 1.0);
            prop_assert!((law.psi(tau) - 1.0).abs() <= 1e-12);
            for s in 1..50 {
                let x = s as f64 / 50.0;
                let inside = tau + (1.0 - tau) * x;
                prop_assert!(law.psi(inside) < 1.0);
                prop_assert!(law.psi(tau * x) > 1.0);
                prop_assert!(law.psi(1.0 + 3.0 * x) > 1.0);
            }
            let a0 = alpha0_closed_form(&law, Tau::Interior(tau));
            prop_assert!(a0 > 0.0 && a0 < 1.0);
        }

        #[test]
        fn psi_is_convex(law in arb_law(), t1 in 0.05f64..3.0, t2 in 0.05f64..3.0, lam in 0.0f64..1.0) {
            let mid = law.psi(lam * t1 + (1.0 - lam) * t2);
            let chord = lam * law.psi(t1) + (1.0 - lam) * law.psi(t2);
            prop_assert!(mid <= chord + 1e-12 * chord.max(1.0));
        }
    }
}
