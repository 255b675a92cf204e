//! Parameter-grid scans producing flat result records.
//!
//! A scan expands its grid in lexicographic `(r, R, j, h)` order, drops
//! points whose work estimate exceeds the per-point budget, evaluates the
//! longest prefix that fits the total budget in parallel, and appends a
//! truncation marker (when the budget ran out) and a summary row naming the
//! point of largest ratio.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{self, factorize};
use crate::charsum::energy_theorem_check;
use crate::energy::{self, point_cost, EnergyKind, JSample, Method, RangeRule};
use crate::error::{Error, Result};
use crate::expsum::{esum_bound, esum_jh, EsumForm};
use crate::par;
use crate::record::{Format, ResultRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanOperation {
    H1,
    H2,
    H3,
    /// Prime-modulus energies against the proven `E₂`/`E₄` bounds.
    Kssz,
    /// `ℰ_{j,h}(l, n)` against `r^{4/5}(h,r)(l,r)^{1/5}` at seeded `(l, n)`.
    Esum,
    /// `E₂` against `R⁴/r + R² + r^{3/2}` for odd primes.
    Theorem,
}

impl ScanOperation {
    pub const ALL: [ScanOperation; 6] = [
        ScanOperation::H1,
        ScanOperation::H2,
        ScanOperation::H3,
        ScanOperation::Kssz,
        ScanOperation::Esum,
        ScanOperation::Theorem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScanOperation::H1 => "h1",
            ScanOperation::H2 => "h2",
            ScanOperation::H3 => "h3",
            ScanOperation::Kssz => "kssz",
            ScanOperation::Esum => "esum",
            ScanOperation::Theorem => "theorem",
        }
    }

    fn uses_shift(self) -> bool {
        matches!(self, ScanOperation::H3 | ScanOperation::Esum)
    }

    fn accepts_modulus(self, r: u64) -> bool {
        match self {
            ScanOperation::Kssz => arith::is_prime(r),
            ScanOperation::Theorem => r > 2 && arith::is_prime(r),
            _ => true,
        }
    }
}

impl FromStr for ScanOperation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScanOperation::ALL
            .into_iter()
            .find(|op| op.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown scan operation {s:?}")))
    }
}

impl fmt::Display for ScanOperation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub r_min: u64,
    pub r_max: u64,
    pub primes_only: bool,
    pub odd_only: bool,
    pub rule: RangeRule,
    pub j_sample: JSample,
    /// Shifts for `h3` and `esum`; other operations use `h = 0`.
    pub h_values: Vec<i64>,
}

impl Default for ScanGrid {
    fn default() -> Self {
        ScanGrid {
            r_min: 1,
            r_max: 1,
            primes_only: false,
            odd_only: false,
            rule: RangeRule::Power { num: 1, den: 3 },
            j_sample: JSample::Values(vec![1]),
            h_values: vec![1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub operation: String,
    pub grid: ScanGrid,
    pub seed: u64,
    /// Total work units across the scan.
    pub budget: u128,
    /// Points estimated above this are skipped rather than evaluated.
    pub point_budget: u128,
    /// Record wall-clock time per point; off by default so output is
    /// reproducible byte for byte.
    pub timing: bool,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl ScanSpec {
    pub fn new(operation: impl Into<String>, grid: ScanGrid) -> Self {
        ScanSpec {
            operation: operation.into(),
            grid,
            seed: 0,
            budget: crate::DEFAULT_BUDGET,
            point_budget: crate::DEFAULT_BUDGET,
            timing: false,
            output: None,
            format: Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub modulus: u64,
    pub range: u64,
    pub j: i64,
    pub h: i64,
    pub l: i64,
    pub n: i64,
}

fn point_seed(seed: u64, r: u64, j: i64, h: i64) -> u64 {
    seed ^ r.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (h as u64).wrapping_mul(0x1656_67B1_9E37_79F9)
}

/// Expands the grid of `spec` for `op`, in lexicographic order.
pub fn grid_points(op: ScanOperation, spec: &ScanSpec) -> Result<Vec<GridPoint>> {
    let g = &spec.grid;
    let shifts = if op.uses_shift() {
        g.h_values.clone()
    } else {
        vec![0]
    };
    let mut points = Vec::new();
    for r in g.r_min.max(1)..=g.r_max {
        if (g.primes_only && !arith::is_prime(r))
            || (g.odd_only && r % 2 == 0)
            || !op.accepts_modulus(r)
        {
            continue;
        }
        let range = g.rule.apply(r);
        let js = match &g.j_sample {
            JSample::Values(v) => v.clone(),
            JSample::Random { count } => energy::sample_units(r, *count, spec.seed),
        };
        for &j in &js {
            if arith::gcd_signed(j, r) != 1 {
                log::info!("skipping r = {r}, j = {j}: not a unit");
                continue;
            }
            for &h in &shifts {
                let (l, n) = if op == ScanOperation::Esum {
                    let mut rng = ChaCha8Rng::seed_from_u64(point_seed(spec.seed, r, j, h));
                    (rng.gen_range(0..r) as i64, rng.gen_range(0..r) as i64)
                } else {
                    (0, 0)
                };
                points.push(GridPoint {
                    modulus: r,
                    range,
                    j,
                    h,
                    l,
                    n,
                });
            }
        }
    }
    if points.is_empty() {
        return Err(Error::invalid("scan grid is empty"));
    }
    Ok(points)
}

/// Work estimate for one point.
pub fn cost(op: ScanOperation, p: &GridPoint) -> u128 {
    match op {
        ScanOperation::H1 | ScanOperation::Theorem => {
            point_cost(EnergyKind::E2, p.modulus, p.range)
        }
        ScanOperation::H2 | ScanOperation::Kssz => point_cost(EnergyKind::E4, p.modulus, p.range),
        ScanOperation::H3 => point_cost(EnergyKind::F2, p.modulus, p.range),
        ScanOperation::Esum => 4 * p.modulus as u128,
    }
}

fn base_record(op: ScanOperation, p: &GridPoint) -> ResultRecord {
    let rec = ResultRecord::new(op.name())
        .param("r", p.modulus)
        .param("j", p.j);
    match op {
        ScanOperation::Esum => rec.param("h", p.h).param("l", p.l).param("n", p.n),
        ScanOperation::H3 => rec.param("R", p.range).param("h", p.h),
        _ => rec.param("R", p.range),
    }
}

/// Evaluates one point into a record carrying a `ratio` output.
pub fn evaluate(op: ScanOperation, p: &GridPoint) -> Result<ResultRecord> {
    let rec = base_record(op, p);
    Ok(match op {
        ScanOperation::H1 | ScanOperation::H2 | ScanOperation::H3 => {
            let kind = match op {
                ScanOperation::H1 => EnergyKind::E2,
                ScanOperation::H2 => EnergyKind::E4,
                _ => EnergyKind::F2,
            };
            let f = factorize(p.modulus)?;
            let rep = energy::energy(kind, p.range, p.j, p.h, &f, Method::Convolution)?;
            rec.output("energy", rep.energy)
                .output("bound", rep.hyp_bound)
                .output("ratio", rep.ratio)
                .output("zero_class", rep.includes_zero_class)
        }
        ScanOperation::Kssz => {
            let m = energy::kssz_check(p.modulus, p.j, p.range, true)?;
            let e4_ratio = m.e4_ratio.unwrap_or(0.0);
            rec.output("e2", m.e2)
                .output("e2_bound", m.e2_bound)
                .output("e2_ratio", m.e2_ratio)
                .maybe_output("e4", m.e4)
                .maybe_output("e4_bound", m.e4_bound)
                .output("e4_ratio", e4_ratio)
                .output("ratio", m.e2_ratio.max(e4_ratio))
        }
        ScanOperation::Esum => {
            let v = esum_jh(p.l, p.n, p.j, p.h, p.modulus, EsumForm::Paired)?;
            let margin = v.margin.unwrap_or(0.0);
            rec.complex("value", v.value)
                .output("abs", v.abs())
                .output("bound", esum_bound(p.l, p.h, p.modulus))
                .output("terms", v.terms)
                .output("margin", margin)
                .output("ratio", margin)
        }
        ScanOperation::Theorem => {
            let c = energy_theorem_check(p.range, p.j, p.modulus)?;
            rec.output("e2", c.e2)
                .output("bound", c.bound)
                .output("ratio", c.constant)
        }
    })
}

/// Runs a scan: point records in grid order, then an optional truncation
/// marker, then the summary row.
pub fn run_scan(spec: &ScanSpec) -> Result<Vec<ResultRecord>> {
    let op: ScanOperation = spec.operation.parse()?;
    let all = grid_points(op, spec)?;

    let mut runnable = Vec::new();
    let mut skipped = 0u64;
    let mut spent = 0u128;
    let mut remaining = 0usize;
    for (i, p) in all.iter().enumerate() {
        let c = cost(op, p);
        if c > spec.point_budget {
            log::info!(
                "skipping r = {}, j = {}, h = {}: work {c} over per-point budget",
                p.modulus,
                p.j,
                p.h
            );
            skipped += 1;
            continue;
        }
        if spent.saturating_add(c) > spec.budget {
            remaining = all.len() - i;
            break;
        }
        spent += c;
        runnable.push(*p);
    }

    let results = par::map(&runnable, |p| {
        let start = Instant::now();
        let res = evaluate(op, p);
        let ms = if spec.timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        res.map(|r| r.with_elapsed(ms))
    });

    let mut records = Vec::with_capacity(results.len() + 2);
    let mut failed = 0u64;
    for (p, res) in runnable.iter().zip(results) {
        match res {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::warn!("r = {}, j = {}, h = {} failed: {e}", p.modulus, p.j, p.h);
                failed += 1;
            }
        }
    }

    let best = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.ratio().map(|x| (x, i)))
        .fold(None, |best: Option<(f64, usize)>, (x, i)| match best {
            Some((b, _)) if b >= x => best,
            _ => Some((x, i)),
        });
    let evaluated = records.len();

    if remaining > 0 {
        log::warn!(
            "budget {} exhausted; {remaining} grid points not evaluated",
            spec.budget
        );
        records.push(
            ResultRecord::new(format!("{op}.truncated"))
                .output("budget", spec.budget)
                .output("spent", spent)
                .output("remaining", remaining),
        );
    }

    let mut summary = ResultRecord::new(format!("{op}.summary"))
        .output("evaluated", evaluated)
        .output("skipped", skipped)
        .output("failed", failed)
        .output("truncated", remaining > 0);
    if let Some((x, i)) = best {
        summary.params = records[i].params.clone();
        summary = summary.output("max_ratio", x);
    }
    records.push(summary);
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::encode;

    fn h1_spec() -> ScanSpec {
        let grid = ScanGrid {
            r_min: 100,
            r_max: 300,
            primes_only: true,
            j_sample: JSample::Random { count: 2 },
            ..ScanGrid::default()
        };
        ScanSpec {
            seed: 7,
            ..ScanSpec::new("h1", grid)
        }
    }

    #[test]
    fn empty_grid_and_unknown_operation_are_rejected() {
        let grid = ScanGrid {
            r_min: 24,
            r_max: 28,
            primes_only: true,
            ..ScanGrid::default()
        };
        assert!(run_scan(&ScanSpec::new("h1", grid.clone())).is_err());
        let grid = ScanGrid {
            r_min: 10,
            r_max: 5,
            ..ScanGrid::default()
        };
        assert!(run_scan(&ScanSpec::new("h1", grid)).is_err());
        let grid = ScanGrid {
            r_max: 50,
            ..ScanGrid::default()
        };
        assert!(run_scan(&ScanSpec::new("h9", grid)).is_err());
    }

    #[test]
    fn one_point_grid() {
        let grid = ScanGrid {
            r_min: 101,
            r_max: 101,
            ..ScanGrid::default()
        };
        let recs = run_scan(&ScanSpec::new("h1", grid)).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].operation, "h1");
        assert_eq!(recs[1].operation, "h1.summary");
        assert_eq!(recs[1].params, recs[0].params);
        assert_eq!(recs[1].outputs["max_ratio"], recs[0].outputs["ratio"]);
    }

    #[test]
    fn h1_scan_is_byte_identical_across_runs() {
        let spec = h1_spec();
        let a = run_scan(&spec).unwrap();
        let b = par::install(Some(3), || run_scan(&spec).unwrap());
        for format in [Format::Csv, Format::Json] {
            assert_eq!(encode(&a, format).unwrap(), encode(&b, format).unwrap());
        }
        let primes = (100..=300).filter(|&r| arith::is_prime(r)).count();
        assert_eq!(a.len(), 2 * primes + 1);
        let keys: Vec<(i128, i128)> = a[..a.len() - 1]
            .iter()
            .map(|r| match (&r.params["r"], &r.params["j"]) {
                (crate::record::Value::Int(r), crate::record::Value::Int(j)) => (*r, *j),
                _ => panic!(),
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn budget_truncates_with_marker() {
        let mut spec = h1_spec();
        let points = grid_points(ScanOperation::H1, &spec).unwrap();
        spec.budget = points[..5].iter().map(|p| cost(ScanOperation::H1, p)).sum();
        let recs = run_scan(&spec).unwrap();
        assert_eq!(recs.len(), 7);
        assert_eq!(recs[5].operation, "h1.truncated");
        assert_eq!(recs[5].outputs["remaining"], (points.len() - 5).into());
        assert_eq!(recs[6].outputs["truncated"], true.into());

        let mut spec = h1_spec();
        spec.point_budget = 0;
        let recs = run_scan(&spec).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].outputs["skipped"], (points.len()).into());
    }

    #[test]
    fn every_operation_runs() {
        for op in ScanOperation::ALL {
            let grid = ScanGrid {
                r_min: 20,
                r_max: 40,
                odd_only: true,
                j_sample: JSample::Random { count: 1 },
                h_values: vec![0, 2],
                ..ScanGrid::default()
            };
            let recs = run_scan(&ScanSpec::new(op.name(), grid)).unwrap();
            let summary = recs.last().unwrap();
            assert_eq!(summary.outputs["failed"], 0u64.into(), "{op}");
            assert!(
                recs[..recs.len() - 1].iter().all(|r| r.ratio().is_some()),
                "{op}"
            );
        }
    }
}
