//! Band-structured transition kernels on the nonnegative integers.
//!
//! A [`BandKernel`] is a finite list of boundary rows `0..i0` followed by a
//! tail rule that produces row `i` for every `i >= i0`. Past `i0` the support
//! of each row is confined to `[i - N, i + N]`. The tail is either a
//! homogeneous increment law (row `i` puts mass `a_m` on `i + m`) or an
//! arbitrary deterministic generator that must also declare its limit law.
//!
//! Only finitely many rows are ever materialised; everything downstream works
//! on truncations `{0..k}`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::bounds::IncrementLaw;
use crate::error::{Error, Result};
use crate::stationary::StationaryDistribution;
use crate::truncation::truncate_augment;

/// Sparse probability row: column index to probability.
pub type Row = BTreeMap<usize, f64>;

/// Tolerance on row sums for every constructed row.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Deterministic rule producing row `i` of a kernel for `i >= i0`.
///
/// Implementations must be pure: calling `row(i)` twice returns the same row.
pub trait RowGenerator: Send + Sync {
    fn row(&self, i: usize) -> Row;
}

impl<F> RowGenerator for F
where
    F: Fn(usize) -> Row + Send + Sync,
{
    fn row(&self, i: usize) -> Row {
        self(i)
    }
}

#[derive(Clone)]
pub enum TailSpec {
    Homogeneous(IncrementLaw),
    Varying {
        generator: Arc<dyn RowGenerator>,
        limit: IncrementLaw,
    },
}

impl fmt::Debug for TailSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailSpec::Homogeneous(law) => f.debug_tuple("Homogeneous").field(law).finish(),
            TailSpec::Varying { limit, .. } => f
                .debug_struct("Varying")
                .field("limit", limit)
                .finish_non_exhaustive(),
        }
    }
}

impl TailSpec {
    /// The limit increments `a_m` of the tail.
    pub fn limit_law(&self) -> &IncrementLaw {
        match self {
            TailSpec::Homogeneous(law) => law,
            TailSpec::Varying { limit, .. } => limit,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandKernel {
    i0: usize,
    half_width: usize,
    boundary: Vec<Row>,
    tail: TailSpec,
}

impl BandKernel {
    /// Random walk with identically distributed bounded increments: rows
    /// `0..g` are given explicitly, row `i >= g` puts mass `a_m` on `i + m`
    /// for `m` in `-g..=d`.
    pub fn homogeneous_rw(
        g: usize,
        d: usize,
        increments: &BTreeMap<i64, f64>,
        boundary_rows: Vec<Row>,
    ) -> Result<Self> {
        let law = checked_rw_law(g, d, increments)?;
        if boundary_rows.len() < g {
            return Err(Error::MissingBoundaryRow {
                index: boundary_rows.len(),
            });
        }
        if boundary_rows.len() > g {
            return Err(Error::UnexpectedBoundaryRows {
                expected: g,
                found: boundary_rows.len(),
            });
        }
        Self::band(g, g.max(d), boundary_rows, law)
    }

    /// General band kernel with a homogeneous tail starting at `i0`.
    ///
    /// Requires `i0 >= g` so that no tail row reaches a negative column, and
    /// `half_width >= max(g, d)`.
    pub fn band(
        i0: usize,
        half_width: usize,
        boundary_rows: Vec<Row>,
        law: IncrementLaw,
    ) -> Result<Self> {
        if i0 < law.g() {
            return Err(Error::MissingBoundaryRow { index: i0 });
        }
        if half_width < law.g().max(law.d()) || half_width == 0 {
            return Err(Error::InvalidArgument(format!(
                "half-width {half_width} does not cover increments -{}..={}",
                law.g(),
                law.d()
            )));
        }
        let kernel = BandKernel {
            i0,
            half_width,
            boundary: boundary_rows,
            tail: TailSpec::Homogeneous(law),
        };
        kernel.check_boundary()?;
        Ok(kernel)
    }

    /// Band kernel whose tail rows come from `generator`; `limit` holds the
    /// limit increments `a_m = lim P(i, i + m)`.
    ///
    /// Generated rows are validated on `i0..i0 + 4 * half_width` here; larger
    /// indices are only checked by [`validate_structure`].
    pub fn varying(
        i0: usize,
        half_width: usize,
        boundary_rows: Vec<Row>,
        generator: Arc<dyn RowGenerator>,
        limit: IncrementLaw,
    ) -> Result<Self> {
        if half_width == 0 || half_width < limit.g().max(limit.d()) {
            return Err(Error::InvalidArgument(format!(
                "half-width {half_width} does not cover the limit increments"
            )));
        }
        let kernel = BandKernel {
            i0,
            half_width,
            boundary: boundary_rows,
            tail: TailSpec::Varying { generator, limit },
        };
        kernel.check_boundary()?;
        for i in i0..i0 + 4 * half_width {
            let row = kernel.row(i);
            check_row(Some(i), &row)?;
            if let Some(j) = row.keys().find(|&&j| j.abs_diff(i) > half_width) {
                return Err(Error::InvalidArgument(format!(
                    "generated row {i} has mass at column {j}, outside the band"
                )));
            }
        }
        Ok(kernel)
    }

    fn check_boundary(&self) -> Result<()> {
        if self.boundary.len() != self.i0 {
            return Err(if self.boundary.len() < self.i0 {
                Error::MissingBoundaryRow {
                    index: self.boundary.len(),
                }
            } else {
                Error::UnexpectedBoundaryRows {
                    expected: self.i0,
                    found: self.boundary.len(),
                }
            });
        }
        for (i, row) in self.boundary.iter().enumerate() {
            check_row(Some(i), row)?;
        }
        Ok(())
    }

    pub fn i0(&self) -> usize {
        self.i0
    }

    /// Half-bandwidth `N`.
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn tail(&self) -> &TailSpec {
        &self.tail
    }

    pub fn boundary_rows(&self) -> &[Row] {
        &self.boundary
    }

    pub fn limit_law(&self) -> &IncrementLaw {
        self.tail.limit_law()
    }

    /// Row `i` of the kernel, exactly as defined (no truncation).
    pub fn row(&self, i: usize) -> Row {
        if i < self.i0 {
            return self.boundary[i].clone();
        }
        match &self.tail {
            TailSpec::Homogeneous(law) => law
                .iter()
                .filter(|&(_, a)| a > 0.0)
                .map(|(m, a)| ((i as i64 + m) as usize, a))
                .collect(),
            TailSpec::Varying { generator, .. } => generator.row(i),
        }
    }

    /// Single entry `P(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i >= self.i0 {
            if let TailSpec::Homogeneous(law) = &self.tail {
                return law.weight(j as i64 - i as i64);
            }
        }
        self.row(i).get(&j).copied().unwrap_or(0.0)
    }

    /// Largest column touched by any boundary row.
    pub fn boundary_reach(&self) -> usize {
        self.boundary
            .iter()
            .filter_map(|r| r.keys().next_back().copied())
            .max()
            .unwrap_or(0)
    }
}

fn check_row(index: Option<usize>, row: &Row) -> Result<()> {
    for (&j, &p) in row {
        if !(p >= 0.0) {
            return Err(Error::NegativeEntry {
                row: index,
                column: j as i64,
                value: p,
            });
        }
    }
    let sum: f64 = row.values().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::NonStochasticRow { row: index, sum });
    }
    Ok(())
}

fn checked_rw_law(g: usize, d: usize, increments: &BTreeMap<i64, f64>) -> Result<IncrementLaw> {
    for (&m, &a) in increments {
        if !(a >= 0.0) {
            return Err(Error::NegativeEntry {
                row: None,
                column: m,
                value: a,
            });
        }
    }
    let sum: f64 = increments.values().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::NonStochasticRow { row: None, sum });
    }
    let in_range = increments
        .iter()
        .all(|(&m, &a)| a == 0.0 || (-(g as i64)..=d as i64).contains(&m));
    let weight = |m: i64| increments.get(&m).copied().unwrap_or(0.0);
    if g == 0 || d == 0 || !in_range || weight(-(g as i64)) <= 0.0 || weight(d as i64) <= 0.0 {
        return Err(Error::DegenerateIncrements { g, d });
    }
    IncrementLaw::new(increments.iter().map(|(&m, &a)| (m, a)))
}

/// Time reversal of a kernel on a finite index range `{0..k}`:
/// `P*(i, j) = pi(j) P(j, i) / pi(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointKernel {
    rows: Vec<Row>,
    half_width: usize,
}

impl AdjointKernel {
    pub fn k(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows
            .get(i)
            .and_then(|r| r.get(&j))
            .copied()
            .unwrap_or(0.0)
    }

    /// Adjoint of this finite kernel with respect to the same `pi`.
    pub fn adjoint(&self, pi: &StationaryDistribution) -> Result<AdjointKernel> {
        Ok(AdjointKernel {
            rows: reverse_rows(&self.rows, pi.prefix())?,
            half_width: self.half_width,
        })
    }

    /// Largest entrywise gap to `kernel` over rows `0..=upto`.
    pub fn max_deviation(&self, kernel: &BandKernel, upto: usize) -> f64 {
        let k = self.k();
        let mut worst: f64 = 0.0;
        for i in 0..=upto.min(k) {
            let orig = kernel.row(i);
            let adj = &self.rows[i];
            for j in orig.keys().chain(adj.keys()).filter(|&&j| j <= k) {
                let a = orig.get(j).copied().unwrap_or(0.0);
                let b = adj.get(j).copied().unwrap_or(0.0);
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

/// `P*` on `{0..k}`. `pi` must cover `0..=k + N`.
pub fn adjoint(kernel: &BandKernel, pi: &StationaryDistribution, k: usize) -> Result<AdjointKernel> {
    let need = k + kernel.half_width();
    if pi.prefix().len() <= need {
        return Err(Error::IndexOutOfPrefix {
            index: need,
            len: pi.prefix().len(),
        });
    }
    let rows: Vec<Row> = (0..=k)
        .map(|j| {
            let mut r = kernel.row(j);
            r.retain(|&col, _| col <= k);
            r
        })
        .collect();
    Ok(AdjointKernel {
        rows: reverse_rows(&rows, pi.prefix())?,
        half_width: kernel.half_width(),
    })
}

fn reverse_rows(rows: &[Row], pi: &[f64]) -> Result<Vec<Row>> {
    let mut out = vec![Row::new(); rows.len()];
    for (j, row) in rows.iter().enumerate() {
        for (&i, &p) in row {
            if i >= rows.len() || p == 0.0 {
                continue;
            }
            if pi[i] <= 0.0 {
                return Err(Error::ZeroMass { index: i });
            }
            out[i].insert(j, pi[j] * p / pi[i]);
        }
    }
    Ok(out)
}

/// Graph diagnostics of a truncation. Irreducibility and aperiodicity of the
/// infinite chain are undecidable from finitely many rows; these flags only
/// describe the truncation at level `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureDiagnostics {
    pub k: usize,
    /// Strong connectivity of the augmented truncation `P_k`.
    pub irreducible: bool,
    /// Period of the unaugmented corner `{0..k}` around state 0 is 1.
    pub aperiodic: bool,
    /// Period measured on the unaugmented corner; `None` when state 0 lies on
    /// no cycle inside the corner.
    pub period: Option<usize>,
    /// Period of the augmented truncation (the folded last column can add a
    /// self-loop that the infinite chain does not have).
    pub augmented_period: Option<usize>,
    /// `(row, column)` pairs with mass outside the band, rows `i0..=k`.
    pub band_violations: Vec<(usize, usize)>,
    /// Rows `0..=k` whose sum is off by more than 1e-12, or with entries
    /// outside [0, 1].
    pub bad_rows: Vec<usize>,
    /// States of `P_k` not reachable from 0.
    pub unreachable: Vec<usize>,
    pub failures: Vec<String>,
    pub note: &'static str,
}

impl StructureDiagnostics {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const STRUCTURE_NOTE: &str =
    "checked on the truncation only; properties of the infinite chain are not decidable here";

/// Irreducibility, aperiodicity and band checks on the level-`k` truncation.
pub fn validate_structure(kernel: &BandKernel, k: usize) -> StructureDiagnostics {
    let n = kernel.half_width();
    let mut failures = Vec::new();
    if k < kernel.i0() + 2 * n {
        failures.push(format!(
            "truncation level {k} is below i0 + 2N = {}",
            kernel.i0() + 2 * n
        ));
    }

    let rows: Vec<Row> = (0..=k).map(|i| kernel.row(i)).collect();
    let mut band_violations = Vec::new();
    let mut bad_rows = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if i >= kernel.i0() {
            band_violations.extend(row.keys().filter(|&&j| j.abs_diff(i) > n).map(|&j| (i, j)));
        }
        let sum: f64 = row.values().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL || row.values().any(|&p| !(0.0..=1.0).contains(&p)) {
            bad_rows.push(i);
        }
    }
    if !band_violations.is_empty() {
        failures.push(format!("{} entries outside the band", band_violations.len()));
    }
    if !bad_rows.is_empty() {
        failures.push(format!("{} rows are not probability rows", bad_rows.len()));
    }

    // corner graph: genuine transitions inside {0..k}
    let corner: Vec<Vec<usize>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .filter(|&(&j, &p)| j <= k && p > 0.0)
                .map(|(&j, _)| j)
                .collect()
        })
        .collect();
    let matrix = truncate_augment_unchecked(kernel, k);
    let augmented: Vec<Vec<usize>> = (0..=k)
        .map(|i| (0..=k).filter(|&j| matrix[(i, j)] > 0.0).collect())
        .collect();

    let forward = reachable(&augmented, 0);
    let backward = reachable(&transpose(&augmented), 0);
    let unreachable: Vec<usize> = (0..=k).filter(|&i| !forward[i]).collect();
    let irreducible = forward.iter().zip(&backward).all(|(&a, &b)| a && b);
    if !irreducible {
        failures.push("augmented truncation is not strongly connected".to_string());
    }

    let period = period_around_zero(&corner);
    let augmented_period = period_around_zero(&augmented);
    let aperiodic = period == Some(1);
    if !aperiodic {
        failures.push(match period {
            Some(p) => format!("corner graph has period {p}"),
            None => "state 0 lies on no cycle of the corner graph".to_string(),
        });
    }

    StructureDiagnostics {
        k,
        irreducible,
        aperiodic,
        period,
        augmented_period,
        band_violations,
        bad_rows,
        unreachable,
        failures,
        note: STRUCTURE_NOTE,
    }
}

fn truncate_augment_unchecked(kernel: &BandKernel, k: usize) -> nalgebra::DMatrix<f64> {
    truncate_augment(kernel, k).unwrap_or_else(|_| {
        // below the usual precondition; fold the same way anyway
        let mut m = nalgebra::DMatrix::zeros(k + 1, k + 1);
        for i in 0..=k {
            for (&j, &p) in &kernel.row(i) {
                m[(i, j.min(k))] += p;
            }
        }
        m
    })
}

fn transpose(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut t = vec![Vec::new(); adj.len()];
    for (u, succ) in adj.iter().enumerate() {
        for &v in succ {
            t[v].push(u);
        }
    }
    t
}

fn reachable(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of the strongly connected component containing state 0:
/// gcd of `level(u) + 1 - level(v)` over edges inside the component.
fn period_around_zero(adj: &[Vec<usize>]) -> Option<usize> {
    let fwd = reachable(adj, 0);
    let bwd = reachable(&transpose(adj), 0);
    let in_scc: Vec<bool> = fwd.iter().zip(&bwd).map(|(&a, &b)| a && b).collect();

    let mut level = vec![usize::MAX; adj.len()];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    let mut period = 0;
    while let Some(u) = queue.pop_front() {
        for &v in adj[u].iter().filter(|&&v| in_scc[v]) {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                period = gcd(period, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    (period > 0).then_some(period)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(entries: &[(usize, f64)]) -> Row {
        entries.iter().copied().collect()
    }

    fn incr(entries: &[(i64, f64)]) -> BTreeMap<i64, f64> {
        entries.iter().copied().collect()
    }

    fn e1() -> BandKernel {
        BandKernel::homogeneous_rw(
            1,
            1,
            &incr(&[(-1, 0.75), (1, 0.25)]),
            vec![row(&[(0, 0.75), (1, 0.25)])],
        )
        .unwrap()
    }

    fn e2() -> BandKernel {
        BandKernel::homogeneous_rw(
            1,
            2,
            &incr(&[(-1, 0.7), (1, 0.2), (2, 0.1)]),
            vec![row(&[(0, 0.7), (1, 0.2), (2, 0.1)])],
        )
        .unwrap()
    }

    #[test]
    fn builds_e1_and_e2() {
        let k = e1();
        assert_eq!((k.i0(), k.half_width()), (1, 1));
        let k = e2();
        assert_eq!((k.i0(), k.half_width()), (1, 2));
    }

    #[test]
    fn rows_follow_boundary_then_tail() {
        assert_eq!(e1().row(0), row(&[(0, 0.75), (1, 0.25)]));
        assert_eq!(e1().row(7), row(&[(6, 0.75), (8, 0.25)]));
        assert_eq!(e2().row(3), row(&[(2, 0.7), (4, 0.2), (5, 0.1)]));
        assert_eq!(e2().entry(3, 5), 0.1);
        assert_eq!(e2().entry(3, 3), 0.0);
    }

    #[test]
    fn rejects_bad_increments() {
        let err = BandKernel::homogeneous_rw(
            1,
            1,
            &incr(&[(-1, 0.6), (1, 0.5)]),
            vec![row(&[(0, 0.6), (1, 0.4)])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonStochasticRow { row: None, .. }));

        let err = BandKernel::homogeneous_rw(
            2,
            1,
            &incr(&[(-1, 0.75), (1, 0.25)]),
            vec![row(&[(0, 1.0)]), row(&[(0, 1.0)])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateIncrements { g: 2, d: 1 }));

        let err = BandKernel::homogeneous_rw(
            1,
            1,
            &incr(&[(-1, 1.2), (1, -0.2)]),
            vec![row(&[(0, 1.0)])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { .. }));
    }

    #[test]
    fn rejects_bad_boundary() {
        let law = incr(&[(-2, 0.5), (1, 0.5)]);
        let err = BandKernel::homogeneous_rw(2, 1, &law, vec![row(&[(0, 1.0)])]).unwrap_err();
        assert_eq!(err, Error::MissingBoundaryRow { index: 1 });

        let err = BandKernel::homogeneous_rw(
            1,
            1,
            &incr(&[(-1, 0.75), (1, 0.25)]),
            vec![row(&[(0, 0.5), (1, 0.25)])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonStochasticRow { row: Some(0), .. }));

        let err = BandKernel::homogeneous_rw(
            1,
            1,
            &incr(&[(-1, 0.75), (1, 0.25)]),
            vec![row(&[(0, 1.5), (1, -0.5)])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { row: Some(0), .. }));
    }

    #[test]
    fn structure_of_e1() {
        let diag = validate_structure(&e1(), 50);
        assert!(diag.irreducible && diag.aperiodic && diag.passed(), "{diag:?}");
        assert_eq!(diag.period, Some(1));
    }

    #[test]
    fn period_two_walk_is_flagged() {
        let k = BandKernel::homogeneous_rw(
            1,
            1,
            &incr(&[(-1, 0.5), (1, 0.5)]),
            vec![row(&[(1, 1.0)])],
        )
        .unwrap();
        let diag = validate_structure(&k, 20);
        assert!(diag.irreducible);
        assert!(!diag.aperiodic);
        assert_eq!(diag.period, Some(2));
        // the folded last column adds a self-loop at k
        assert_eq!(diag.augmented_period, Some(1));
        assert!(!diag.passed());
    }

    #[test]
    fn absorbing_state_is_not_irreducible() {
        let k = BandKernel::homogeneous_rw(
            1,
            1,
            &incr(&[(-1, 0.75), (1, 0.25)]),
            vec![row(&[(0, 1.0)])],
        )
        .unwrap();
        let diag = validate_structure(&k, 20);
        assert!(!diag.irreducible);
        assert_eq!(diag.unreachable, (1..=20).collect::<Vec<_>>());
    }

    #[test]
    fn short_truncation_never_passes_silently() {
        let diag = validate_structure(&e2(), 3);
        assert!(!diag.passed());
    }

    #[test]
    fn varying_tail_rows_and_band_check() {
        let limit = IncrementLaw::new([(-1, 0.7), (0, 0.3)]).unwrap();
        let gen = Arc::new(|i: usize| -> Row {
            let up = 0.35 / (i as f64 + 1.0);
            row(&[(i - 1, 0.7 - up), (i, 0.3), (i + 1, up)])
        });
        let k = BandKernel::varying(1, 1, vec![row(&[(0, 0.8), (1, 0.2)])], gen, limit).unwrap();
        assert!((k.entry(4, 5) - 0.07).abs() < 1e-15);
        assert!(validate_structure(&k, 30).passed());

        let wide = Arc::new(|i: usize| -> Row { row(&[(i + 3, 1.0)]) });
        let limit = IncrementLaw::new([(1, 1.0)]).unwrap();
        assert!(BandKernel::varying(0, 1, vec![], wide, limit).is_err());
    }
}
