//! Additive energies of modular square roots and of their differences.
//!
//! Two independent evaluation paths are provided:
//!
//! * **convolution**: the exact cyclic self-convolution of the residue
//!   multiset from [`crate::sqrt::build_root_multiset`], squared and summed
//!   in checked `u128` arithmetic;
//! * **brute**: every `t`-tuple of roots read off an exhaustive squaring
//!   table, bucketed by its sum mod `r`.
//!
//! Floating-point Fourier sums only appear in [`parseval_check`], which is a
//! validator and never feeds an energy value.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{self, factorize, gcd, FactoredModulus};
use crate::error::{Error, Result};
use crate::par;
use crate::sqrt::{build_root_multiset, MultisetKind, RootMultiset, SquareTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyKind {
    /// Additive energy of the roots: `k₁+k₂ ≡ k₃+k₄`.
    E2,
    /// Four-fold energy of the roots: `k₁+…+k₄ ≡ k₅+…+k₈`.
    E4,
    /// Additive energy of the root differences `√(j(m+h)) − √(jm)`.
    F2,
}

impl EnergyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnergyKind::E2 => "e2",
            EnergyKind::E4 => "e4",
            EnergyKind::F2 => "f2",
        }
    }

    fn order(self) -> u32 {
        match self {
            EnergyKind::E4 => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for EnergyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnergyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e2" => Ok(EnergyKind::E2),
            "e4" => Ok(EnergyKind::E4),
            "f2" => Ok(EnergyKind::F2),
            other => Err(Error::invalid(format!("unknown energy kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Auto,
    Brute,
    Convolution,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::Brute => "brute",
            Method::Convolution => "convolution",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Method::Auto),
            "brute" => Ok(Method::Brute),
            "conv" | "convolution" => Ok(Method::Convolution),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// One exact energy evaluation with its hypothesis ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub kind: EnergyKind,
    pub range: u64,
    pub j: i64,
    pub h: Option<i64>,
    pub modulus: u64,
    pub energy: u128,
    /// Main term of the expected bound with `ε = 0`.
    pub hyp_bound: f64,
    pub ratio: f64,
    pub method: Method,
    /// True when `R = r > 1`, so the class `m = r ≡ 0` takes part.
    pub includes_zero_class: bool,
}

/// Expected-bound main terms: `R⁴/r + R²`, `R⁸/r + R⁴`, `(h,r)R⁴/r + R²`.
///
/// `h` is reduced mod `r` first, and `(0, r) = r`.
pub fn hypothesis_bound(kind: EnergyKind, range: u64, h: Option<i64>, r: u64) -> f64 {
    let big_r = range as f64;
    let r_f = r as f64;
    match kind {
        EnergyKind::E2 => big_r.powi(4) / r_f + big_r.powi(2),
        EnergyKind::E4 => big_r.powi(8) / r_f + big_r.powi(4),
        EnergyKind::F2 => {
            let g = gcd(arith::reduce(h.unwrap_or(0), r), r) as f64;
            g * big_r.powi(4) / r_f + big_r.powi(2)
        }
    }
}

// dense[(x + y) mod r] += c_x·c_y over the support.
fn cyclic_self_convolution(support: &[(u64, u128)], r: u64) -> Result<Vec<u128>> {
    let mut out = vec![0u128; r as usize];
    for &(x, cx) in support {
        for &(y, cy) in support {
            let idx = arith::add_mod(x, y, r) as usize;
            let term = cx.checked_mul(cy).ok_or(Error::Overflow("convolution"))?;
            out[idx] = out[idx]
                .checked_add(term)
                .ok_or(Error::Overflow("convolution"))?;
        }
    }
    Ok(out)
}

fn sparse(dense: &[u128]) -> Vec<(u64, u128)> {
    dense
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i as u64, c))
        .collect()
}

fn sum_of_squares(dense: &[u128]) -> Result<u128> {
    dense.iter().try_fold(0u128, |acc, &c| {
        c.checked_mul(c)
            .and_then(|sq| acc.checked_add(sq))
            .ok_or(Error::Overflow("energy"))
    })
}

/// `Σ_λ ((a⊛a)(λ))²` for `order = 2`, `Σ_λ ((a⊛a⊛a⊛a)(λ))²` for `order = 4`.
pub fn convolution_energy(a: &RootMultiset, order: u32) -> Result<u128> {
    let r = a.modulus();
    let support: Vec<(u64, u128)> = a
        .support()
        .into_iter()
        .map(|(x, c)| (x, c as u128))
        .collect();
    let pair = cyclic_self_convolution(&support, r)?;
    match order {
        2 => sum_of_squares(&pair),
        4 => {
            let quad = cyclic_self_convolution(&sparse(&pair), r)?;
            sum_of_squares(&quad)
        }
        _ => Err(Error::invalid(format!("unsupported energy order {order}"))),
    }
}

/// Root (or root-difference) values with multiplicity, one entry per
/// contributing configuration, read off the squaring table.
pub fn enumerate_tuple_values(
    kind: EnergyKind,
    range: u64,
    j: i64,
    h: i64,
    table: &SquareTable,
) -> Vec<u64> {
    let r = table.modulus();
    let jr = arith::reduce(j, r);
    let hr = arith::reduce(h, r);
    let mut out = Vec::new();
    for m in 1..=range {
        let jm = arith::mul_mod(jr, m % r, r);
        match kind {
            EnergyKind::E2 | EnergyKind::E4 => {
                out.extend(table.roots(jm).iter().map(|&k| k as u64));
            }
            EnergyKind::F2 => {
                let up = arith::mul_mod(jr, arith::add_mod(m % r, hr, r), r);
                for &k in table.roots(jm) {
                    for &kt in table.roots(up) {
                        out.push(arith::sub_mod(kt as u64, k as u64, r));
                    }
                }
            }
        }
    }
    out
}

/// Counts solutions of `x₁+…+x_t ≡ y₁+…+y_t (mod r)` over `values` by
/// enumerating every `t`-tuple explicitly.
pub fn brute_energy(values: &[u64], r: u64, order: u32) -> Result<u128> {
    let mut sums = vec![0u128; r as usize];
    match order {
        2 => {
            for &x in values {
                for &y in values {
                    sums[arith::add_mod(x, y, r) as usize] += 1;
                }
            }
        }
        4 => {
            for &x1 in values {
                for &x2 in values {
                    let s2 = arith::add_mod(x1, x2, r);
                    for &x3 in values {
                        let s3 = arith::add_mod(s2, x3, r);
                        for &x4 in values {
                            sums[arith::add_mod(s3, x4, r) as usize] += 1;
                        }
                    }
                }
            }
        }
        _ => return Err(Error::invalid(format!("unsupported energy order {order}"))),
    }
    sum_of_squares(&sums)
}

fn multiset_kind(kind: EnergyKind, h: i64) -> MultisetKind {
    match kind {
        EnergyKind::F2 => MultisetKind::Difference { h },
        _ => MultisetKind::Plain,
    }
}

/// Work estimate for the brute path: `(2R)^t` tuples for `E₂`/`E₄` with
/// `t = 2, 4`, and `(4R)²` for `F₂` (typical root counts, not worst case).
pub fn brute_cost(kind: EnergyKind, range: u64) -> u128 {
    let r = range as u128;
    match kind {
        EnergyKind::E2 => (2 * r).saturating_pow(2),
        EnergyKind::E4 => (2 * r).saturating_pow(4),
        EnergyKind::F2 => (4 * r).saturating_pow(2),
    }
}

/// Evaluates one energy. `h` is ignored for `E2` and `E4`.
pub fn energy(
    kind: EnergyKind,
    range: u64,
    j: i64,
    h: i64,
    r: &FactoredModulus,
    method: Method,
) -> Result<EnergyReport> {
    let n = r.n();
    // Validates R, j and r for both paths.
    let multiset = build_root_multiset(range, j, r, multiset_kind(kind, h))?;
    let resolved = match method {
        Method::Auto => Method::Convolution,
        m => m,
    };
    let value = match resolved {
        Method::Brute => {
            let table = SquareTable::new(n)?;
            let values = enumerate_tuple_values(kind, range, j, h, &table);
            brute_energy(&values, n, kind.order())?
        }
        _ => convolution_energy(&multiset, kind.order())?,
    };
    let h_field = (kind == EnergyKind::F2).then_some(h);
    let hyp_bound = hypothesis_bound(kind, range, h_field, n);
    Ok(EnergyReport {
        kind,
        range,
        j,
        h: h_field,
        modulus: n,
        energy: value,
        hyp_bound,
        ratio: value as f64 / hyp_bound,
        method: resolved,
        includes_zero_class: range == n && n > 1,
    })
}

pub fn energy_e2(range: u64, j: i64, r: &FactoredModulus, method: Method) -> Result<EnergyReport> {
    energy(EnergyKind::E2, range, j, 0, r, method)
}

pub fn energy_e4(range: u64, j: i64, r: &FactoredModulus, method: Method) -> Result<EnergyReport> {
    energy(EnergyKind::E4, range, j, 0, r, method)
}

pub fn energy_f2(
    range: u64,
    j: i64,
    h: i64,
    r: &FactoredModulus,
    method: Method,
) -> Result<EnergyReport> {
    energy(EnergyKind::F2, range, j, h, r, method)
}

/// Parseval cross-check of a convolution energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCheck {
    pub modulus: u64,
    pub fourier_energy: f64,
    pub exact_energy: u128,
    pub abs_error: f64,
}

/// Compares `(1/r) Σ_t |â(t)|^{2·order}` against the exact energy.
pub fn parseval_check(a: &RootMultiset, order: u32) -> Result<SpectrumCheck> {
    let r = a.modulus();
    let exact = convolution_energy(a, order)?;
    let support = a.support();
    let angle = std::f64::consts::TAU / r as f64;
    let twiddles: Vec<(f64, f64)> = (0..r).map(|k| (angle * k as f64).sin_cos()).collect();
    let power = 2 * order as i32;
    let total: f64 = (0..r)
        .map(|t| {
            let (mut re, mut im) = (0.0, 0.0);
            for &(lambda, c) in &support {
                let (s, co) = twiddles[arith::mul_mod(lambda, t, r) as usize];
                re += c as f64 * co;
                im -= c as f64 * s;
            }
            (re * re + im * im).sqrt().powi(power)
        })
        .sum();
    let fourier = total / r as f64;
    Ok(SpectrumCheck {
        modulus: r,
        fourier_energy: fourier,
        exact_energy: exact,
        abs_error: (fourier - exact as f64).abs(),
    })
}

/// How `R` is derived from `r` in a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeRule {
    /// `R = ⌊r^{num/den}⌋`, clamped to `[1, r]`.
    Power { num: u32, den: u32 },
    /// A fixed `R`, clamped to `r`.
    Constant(u64),
}

impl RangeRule {
    pub fn apply(self, r: u64) -> u64 {
        match self {
            RangeRule::Constant(c) => c.min(r).max(1),
            RangeRule::Power { num, den } => integer_root_power(r, num, den).clamp(1, r.max(1)),
        }
    }
}

// Largest x with x^den ≤ r^num; exact unless the powers overflow u128.
fn integer_root_power(r: u64, num: u32, den: u32) -> u64 {
    let g = num_integer::gcd(num, den).max(1);
    let (num, den) = (num / g, den / g);
    let fits = |x: u64| -> bool {
        match ((x as u128).checked_pow(den), (r as u128).checked_pow(num)) {
            (Some(l), Some(rr)) => l <= rr,
            _ => den as f64 * (x as f64).ln() <= num as f64 * (r as f64).ln() + 1e-12,
        }
    };
    let mut x = (r as f64).powf(num as f64 / den as f64).floor().max(0.0) as u64;
    while x > 0 && !fits(x) {
        x -= 1;
    }
    while fits(x + 1) {
        x += 1;
    }
    x
}

impl FromStr for RangeRule {
    type Err = Error;

    /// Accepts `cbrt`, `sqrt`, `r^a/b`, `r^x` (decimal), `const:n` or `n`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("cannot parse R rule {s:?}"));
        match s {
            "cbrt" => return Ok(RangeRule::Power { num: 1, den: 3 }),
            "sqrt" => return Ok(RangeRule::Power { num: 1, den: 2 }),
            _ => {}
        }
        if let Some(c) = s.strip_prefix("const:") {
            return c.parse().map(RangeRule::Constant).map_err(|_| bad());
        }
        if let Some(exp) = s.strip_prefix("r^") {
            let exp = exp.trim_start_matches('(').trim_end_matches(')');
            if let Some((a, b)) = exp.split_once('/') {
                let num = a.trim().parse().map_err(|_| bad())?;
                let den: u32 = b.trim().parse().map_err(|_| bad())?;
                if den == 0 {
                    return Err(bad());
                }
                return Ok(RangeRule::Power { num, den });
            }
            let x: f64 = exp.parse().map_err(|_| bad())?;
            let den = 1000u32;
            return Ok(RangeRule::Power {
                num: (x * den as f64).round() as u32,
                den,
            });
        }
        s.parse().map(RangeRule::Constant).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    H1,
    H2,
    H3,
}

impl Hypothesis {
    pub fn kind(self) -> EnergyKind {
        match self {
            Hypothesis::H1 => EnergyKind::E2,
            Hypothesis::H2 => EnergyKind::E4,
            Hypothesis::H3 => EnergyKind::F2,
        }
    }
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h1" => Ok(Hypothesis::H1),
            "h2" => Ok(Hypothesis::H2),
            "h3" => Ok(Hypothesis::H3),
            other => Err(Error::invalid(format!("unknown hypothesis {other:?}"))),
        }
    }
}

/// Which multipliers `j` a scan visits for each `r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum JSample {
    Values(Vec<i64>),
    /// `count` distinct units drawn from a generator seeded by `(seed, r)`.
    Random {
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisScanSpec {
    pub hypothesis: Hypothesis,
    pub r_min: u64,
    pub r_max: u64,
    pub primes_only: bool,
    pub rule: RangeRule,
    pub j_sample: JSample,
    /// Shifts visited for H3; ignored otherwise.
    pub h_values: Vec<i64>,
    pub seed: u64,
    /// Points whose work estimate exceeds this are skipped.
    pub point_budget: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScanPoint {
    pub modulus: u64,
    pub range: u64,
    pub j: i64,
    pub h: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub modulus: u64,
    pub j: i64,
    pub h: i64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisScanOutcome {
    pub reports: Vec<EnergyReport>,
    pub skipped: Vec<SkippedPoint>,
    /// Largest ratio and the index of its report.
    pub max_ratio: Option<(f64, usize)>,
}

/// Work estimate for one energy evaluation: `r·R²`, or `r·R⁴` for `E4`.
pub fn point_cost(kind: EnergyKind, modulus: u64, range: u64) -> u128 {
    let r2 = (range as u128).saturating_mul(range as u128);
    let per = match kind {
        EnergyKind::E4 => r2.saturating_mul(r2),
        _ => r2,
    };
    (modulus as u128).saturating_mul(per)
}

pub(crate) fn sample_units(r: u64, count: usize, seed: u64) -> Vec<i64> {
    if r <= 2 {
        return vec![1];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ r.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let available = factorize(r).map(|f| f.totient()).unwrap_or(1) as usize;
    let want = count.min(available);
    let mut out: Vec<i64> = Vec::with_capacity(want);
    while out.len() < want {
        let j = rng.gen_range(1..r) as i64;
        if arith::gcd_signed(j, r) == 1 && !out.contains(&j) {
            out.push(j);
        }
    }
    out.sort_unstable();
    out
}

/// Expands a scan spec into its grid, in lexicographic `(r, R, j, h)` order.
pub fn hypothesis_points(spec: &HypothesisScanSpec) -> (Vec<ScanPoint>, Vec<SkippedPoint>) {
    let kind = spec.hypothesis.kind();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    let h_values: Vec<i64> = if kind == EnergyKind::F2 {
        spec.h_values.clone()
    } else {
        vec![0]
    };
    for r in spec.r_min.max(1)..=spec.r_max {
        if spec.primes_only && !arith::is_prime(r) {
            continue;
        }
        let range = spec.rule.apply(r);
        let js = match &spec.j_sample {
            JSample::Values(v) => v.clone(),
            JSample::Random { count } => sample_units(r, *count, spec.seed),
        };
        for &j in &js {
            for &h in &h_values {
                if arith::gcd_signed(j, r) != 1 {
                    skipped.push(SkippedPoint {
                        modulus: r,
                        j,
                        h,
                        reason: format!("gcd(j, r) = {}", arith::gcd_signed(j, r)),
                    });
                    continue;
                }
                let cost = point_cost(kind, r, range);
                if cost > spec.point_budget {
                    skipped.push(SkippedPoint {
                        modulus: r,
                        j,
                        h,
                        reason: format!("work {cost} over per-point budget {}", spec.point_budget),
                    });
                    continue;
                }
                points.push(ScanPoint {
                    modulus: r,
                    range,
                    j,
                    h,
                });
            }
        }
    }
    (points, skipped)
}

/// Evaluates one grid point on the convolution path.
pub fn evaluate_point(kind: EnergyKind, point: &ScanPoint) -> Result<EnergyReport> {
    let f = factorize(point.modulus)?;
    energy(kind, point.range, point.j, point.h, &f, Method::Convolution)
}

/// Runs a hypothesis scan; points are evaluated in parallel and returned in
/// grid order.
pub fn hypothesis_scan(spec: &HypothesisScanSpec) -> HypothesisScanOutcome {
    let kind = spec.hypothesis.kind();
    let (points, mut skipped) = hypothesis_points(spec);
    for s in &skipped {
        log::info!(
            "skipping r = {}, j = {}, h = {}: {}",
            s.modulus,
            s.j,
            s.h,
            s.reason
        );
    }
    let results = par::map(&points, |p| evaluate_point(kind, p));
    let mut reports = Vec::with_capacity(results.len());
    for (p, res) in points.iter().zip(results) {
        match res {
            Ok(rep) => reports.push(rep),
            Err(e) => {
                log::info!("skipping r = {}, j = {}: {e}", p.modulus, p.j);
                skipped.push(SkippedPoint {
                    modulus: p.modulus,
                    j: p.j,
                    h: p.h,
                    reason: e.to_string(),
                });
            }
        }
    }
    let max_ratio = argmax_ratio(&reports);
    HypothesisScanOutcome {
        reports,
        skipped,
        max_ratio,
    }
}

/// First index attaining the maximal ratio.
pub fn argmax_ratio(reports: &[EnergyReport]) -> Option<(f64, usize)> {
    reports
        .iter()
        .enumerate()
        .fold(None, |best: Option<(f64, usize)>, (i, rep)| match best {
            Some((b, _)) if b >= rep.ratio => best,
            _ => Some((rep.ratio, i)),
        })
}

/// Energies measured against the proven prime-modulus bounds at `ε = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsszMargin {
    pub modulus: u64,
    pub j: i64,
    pub range: u64,
    pub e2: u128,
    /// `(R^{3/2}/r^{1/2} + 1)·R²`.
    pub e2_bound: f64,
    pub e2_ratio: f64,
    pub e4: Option<u128>,
    /// `(R^{5/8}/r^{1/8} + R^{11/2}/r^{1/2} + R³/r^{1/4})·R⁶ + R⁵`.
    pub e4_bound: Option<f64>,
    pub e4_ratio: Option<f64>,
}

pub fn kssz_e2_bound(range: u64, r: u64) -> f64 {
    let (big_r, r) = (range as f64, r as f64);
    (big_r.powf(1.5) / r.sqrt() + 1.0) * big_r.powi(2)
}

pub fn kssz_e4_bound(range: u64, r: u64) -> f64 {
    let (big_r, r) = (range as f64, r as f64);
    (big_r.powf(0.625) / r.powf(0.125) + big_r.powf(5.5) / r.sqrt() + big_r.powi(3) / r.powf(0.25))
        * big_r.powi(6)
        + big_r.powi(5)
}

/// Constant-tracking monitor for the prime-modulus energy theorems.
pub fn kssz_check(r: u64, j: i64, range: u64, with_e4: bool) -> Result<KsszMargin> {
    if !arith::is_prime(r) {
        return Err(Error::NotPrime(r));
    }
    let f = factorize(r)?;
    let e2 = energy_e2(range, j, &f, Method::Convolution)?.energy;
    let e2_bound = kssz_e2_bound(range, r);
    let (e4, e4_bound, e4_ratio) = if with_e4 {
        let e4 = energy_e4(range, j, &f, Method::Convolution)?.energy;
        let b = kssz_e4_bound(range, r);
        (Some(e4), Some(b), Some(e4 as f64 / b))
    } else {
        (None, None, None)
    };
    Ok(KsszMargin {
        modulus: r,
        j,
        range,
        e2,
        e2_bound,
        e2_ratio: e2 as f64 / e2_bound,
        e4,
        e4_bound,
        e4_ratio,
    })
}
