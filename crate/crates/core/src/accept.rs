//! The acceptance suites.
//!
//! Criteria 1 to 9 are pass/fail checks of exact identities and explicit
//! constants; criterion 10 gathers constant-tracking monitors, which report
//! ratios and never fail.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{self, factorize, gcd, FactoredModulus};
use crate::charsum::{s4_closed, s4_direct, weighted_energy, S4Input, TrigWeight};
use crate::energy::{self, EnergyKind, JSample, Method, RangeRule};
use crate::error::{Error, Result};
use crate::expsum::{
    esum_jh, esum_trivial_claim, gauss_sum_closed, gauss_sum_direct_with, gcal, rational_expsum,
    EsumForm, GcalParams, PhaseTable, RationalFunctionModP,
};
use crate::par;
use crate::record::{format_float, ResultRecord};
use crate::scan::{run_scan, ScanGrid, ScanSpec};
use crate::sieve::{
    self, double_sieve_check, ls_lhs, px_monitor, Moduli, NumeratorRange, Rational, SieveInstance,
};
use crate::sqrt::{sqrt_mod_all, sqrt_mod_prime_power, SquareTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Oracles,
    Identities,
    Constants,
    Monitors,
    All,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Oracles => &[1, 2, 3],
            Suite::Identities => &[4, 5, 8],
            Suite::Constants => &[6, 7, 9],
            Suite::Monitors => &[10],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oracles" => Ok(Suite::Oracles),
            "identities" => Ok(Suite::Identities),
            "constants" => Ok(Suite::Constants),
            "monitors" => Ok(Suite::Monitors),
            "all" => Ok(Suite::All),
            other => Err(Error::invalid(format!("unknown suite {other:?}"))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Oracles => "oracles",
            Suite::Identities => "identities",
            Suite::Constants => "constants",
            Suite::Monitors => "monitors",
            Suite::All => "all",
        })
    }
}

/// `Full` runs the stated grids; `Quick` shrinks every grid for smoke tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Full,
    Quick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptConfig {
    pub seed: u64,
    pub scale: Scale,
}

impl Default for AcceptConfig {
    fn default() -> Self {
        AcceptConfig {
            seed: 1,
            scale: Scale::Full,
        }
    }
}

impl AcceptConfig {
    pub fn quick() -> Self {
        AcceptConfig {
            scale: Scale::Quick,
            ..Self::default()
        }
    }

    fn pick<T>(&self, full: T, quick: T) -> T {
        match self.scale {
            Scale::Full => full,
            Scale::Quick => quick,
        }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    PassFail,
    Monitor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub kind: CriterionKind,
    /// Always true for monitors.
    pub passed: bool,
    pub detail: String,
    pub metrics: Vec<(String, f64)>,
    pub elapsed_ms: u64,
}

impl CriterionOutcome {
    fn new(id: u8, name: &str, kind: CriterionKind) -> Self {
        CriterionOutcome {
            id,
            name: name.to_string(),
            kind,
            passed: true,
            detail: String::new(),
            metrics: Vec::new(),
            elapsed_ms: 0,
        }
    }

    fn fail(&mut self, detail: String) {
        if self.passed {
            self.passed = false;
            self.detail = detail;
        }
    }

    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.push((key.to_string(), value));
    }

    fn within(&mut self, start: Instant, limit: Option<Duration>) {
        let elapsed = start.elapsed();
        self.elapsed_ms = elapsed.as_millis() as u64;
        if let Some(limit) = limit {
            if elapsed > limit {
                self.fail(format!(
                    "took {:.1} s, limit {} s",
                    elapsed.as_secs_f64(),
                    limit.as_secs()
                ));
            }
        }
    }

    /// One report line: `criterion N [PASS|FAIL|MONITOR] name: detail`.
    pub fn line(&self) -> String {
        let tag = match (self.kind, self.passed) {
            (CriterionKind::Monitor, _) => "MONITOR",
            (_, true) => "PASS",
            (_, false) => "FAIL",
        };
        let mut s = format!("criterion {:>2} [{tag}] {}", self.id, self.name);
        if !self.detail.is_empty() {
            s.push_str(": ");
            s.push_str(&self.detail);
        }
        for (k, v) in &self.metrics {
            s.push_str(&format!(" {k}={}", short(*v)));
        }
        s.push_str(&format!(" ({} ms)", self.elapsed_ms));
        s
    }

    pub fn to_record(&self) -> ResultRecord {
        let mut rec = ResultRecord::new("accept")
            .param("criterion", self.id)
            .param("name", self.name.as_str())
            .output("passed", self.passed)
            .output("monitor", self.kind == CriterionKind::Monitor)
            .output("detail", self.detail.as_str())
            .with_elapsed(self.elapsed_ms);
        for (k, v) in &self.metrics {
            rec = rec.output(k, *v);
        }
        rec
    }
}

fn short(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{x}")
    } else {
        format!("{x:.6e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub suite: Suite,
    pub outcomes: Vec<CriterionOutcome>,
}

impl AcceptanceReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    /// `0` when every pass/fail criterion holds, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn records(&self) -> Vec<ResultRecord> {
        self.outcomes
            .iter()
            .map(CriterionOutcome::to_record)
            .collect()
    }
}

pub fn run_acceptance(suite: Suite, cfg: &AcceptConfig) -> AcceptanceReport {
    let outcomes = suite
        .criteria()
        .iter()
        .map(|&id| {
            let out = run_criterion(id, cfg).expect("criterion ids come from the suite table");
            log::info!("{}", out.line());
            out
        })
        .collect();
    AcceptanceReport { suite, outcomes }
}

pub fn run_criterion(id: u8, cfg: &AcceptConfig) -> Result<CriterionOutcome> {
    Ok(match id {
        1 => sqrt_oracle(cfg.pick(10_000, 1_500), |m, f| sqrt_mod_all(m, f).roots),
        2 => root_count_formula(cfg.pick(10_000, 2_000)),
        3 => energy_oracle(cfg.pick(8, 5), cfg.pick(60, 30)),
        4 => gauss_identity(cfg),
        5 => appendix_algebra(cfg),
        6 => explicit_sieves(cfg),
        7 => bombieri_margin(cfg.pick(2_000, 300)),
        8 => s4_identity(cfg),
        9 => gcd_sums(cfg.pick(1_000, 200), cfg.pick(10_000, 1_000)),
        10 => monitors(cfg),
        _ => return Err(Error::invalid(format!("no criterion {id}"))),
    })
}

/// Criterion 1 for an arbitrary root finder, so a deliberately broken one
/// can be checked to fail. The detail names the first mismatching `(m, r)`,
/// ordered by `r` and then `m`.
pub fn sqrt_oracle<F>(r_max: u64, roots: F) -> CriterionOutcome
where
    F: Fn(u64, &FactoredModulus) -> Vec<u64> + Sync + Send,
{
    let start = Instant::now();
    let mut out = CriterionOutcome::new(1, "square-root oracle", CriterionKind::PassFail);
    let first_bad = par::map_range(1, r_max + 1, |r| -> Option<(u64, String)> {
        let f = factorize(r).ok()?;
        let table = SquareTable::new(r).ok()?;
        (0..r).find_map(|m| {
            let mut got = roots(m, &f);
            got.sort_unstable();
            let want: Vec<u64> = table.roots(m).iter().map(|&k| k as u64).collect();
            (got != want).then(|| (m, format!("got {got:?}, expected {want:?}")))
        })
    });
    let residues: u64 = (1..=r_max).sum();
    match first_bad
        .into_iter()
        .enumerate()
        .find_map(|(i, b)| b.map(|b| (i as u64 + 1, b)))
    {
        Some((r, (m, why))) => out.fail(format!("first mismatch at (m, r) = ({m}, {r}): {why}")),
        None => out.detail = format!("all {residues} residues for r ≤ {r_max} match"),
    }
    out.metric("residues", residues as f64);
    out.within(start, Some(Duration::from_secs(60)));
    out
}

pub fn root_count_formula(limit: u64) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(
        2,
        "root count of 0 mod prime powers",
        CriterionKind::PassFail,
    );
    let mut checked = 0u64;
    'outer: for p in (2..=limit).filter(|&p| arith::is_prime(p)) {
        let mut pe = p;
        let mut alpha = 1u32;
        while pe <= limit {
            let expected = p.pow(alpha / 2);
            let local = sqrt_mod_prime_power(0, p, alpha).map(|s| s.len() as u64);
            let global = factorize(pe).map(|f| sqrt_mod_all(0, &f).len() as u64);
            if local.as_ref().ok() != Some(&expected) || global.as_ref().ok() != Some(&expected) {
                out.fail(format!(
                    "{p}^{alpha}: counted {local:?} and {global:?}, expected {expected}"
                ));
                break 'outer;
            }
            checked += 1;
            pe *= p;
            alpha += 1;
        }
    }
    if out.passed {
        out.detail = format!("{checked} prime powers ≤ {limit}");
    }
    out.within(start, None);
    out
}

pub fn energy_oracle(range_max: u64, r_max: u64) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(3, "energy oracle", CriterionKind::PassFail);
    let results = par::map_range(1, r_max + 1, |r| -> std::result::Result<u64, String> {
        let f = factorize(r).map_err(|e| e.to_string())?;
        let mut checked = 0u64;
        for j in (1..=r as i64).filter(|&j| arith::gcd_signed(j, r) == 1) {
            for range in 1..=range_max.min(r) {
                for (kind, shifts) in [
                    (EnergyKind::E2, &[0i64][..]),
                    (EnergyKind::E4, &[0][..]),
                    (EnergyKind::F2, &[0, 1, 2][..]),
                ] {
                    for &h in shifts {
                        let fast = energy::energy(kind, range, j, h, &f, Method::Convolution);
                        let slow = energy::energy(kind, range, j, h, &f, Method::Brute);
                        match (fast, slow) {
                            (Ok(a), Ok(b)) if a.energy == b.energy => checked += 1,
                            (a, b) => {
                                return Err(format!(
                                    "{kind} r = {r}, j = {j}, h = {h}, R = {range}: convolution {:?}, brute {:?}",
                                    a.map(|x| x.energy),
                                    b.map(|x| x.energy)
                                ))
                            }
                        }
                    }
                }
            }
        }
        Ok(checked)
    });
    let mut checked = 0;
    for res in results {
        match res {
            Ok(n) => checked += n,
            Err(e) => {
                out.fail(e);
                break;
            }
        }
    }
    if out.passed {
        out.detail = format!(
            "{checked} (kind, r, j, h, R) points with R ≤ min({range_max}, r), r ≤ {r_max}"
        );
    }
    out.within(start, Some(Duration::from_secs(120)));
    out
}

pub fn gauss_identity(cfg: &AcceptConfig) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(4, "Gauss sum closed form", CriterionKind::PassFail);
    let q_max: u64 = cfg.pick(3_000, 301);
    let mut rng = cfg.rng(4);
    let samples: Vec<(i64, i64)> = (0..cfg.pick(1_000, 100))
        .map(|_| {
            (
                rng.gen_range(-1_000_000..=1_000_000),
                rng.gen_range(-1_000_000..=1_000_000),
            )
        })
        .collect();
    let odd: Vec<u64> = (1..=q_max).step_by(2).collect();
    let per_q = par::map(&odd, |&q| -> std::result::Result<(f64, f64), String> {
        let table = PhaseTable::new(q).map_err(|e| e.to_string())?;
        let (mut worst_diff, mut worst_abs) = (0.0f64, 0.0f64);
        for &(a, b) in &samples {
            let direct = gauss_sum_direct_with(&table, a, b).value;
            let closed = gauss_sum_closed(q, a, b).map_err(|e| e.to_string())?.value;
            let diff = (direct - closed).norm();
            worst_diff = worst_diff.max(diff);
            if diff > 1e-6 {
                return Err(format!(
                    "q = {q}, a = {a}, b = {b}: |closed − direct| = {diff:e}"
                ));
            }
            if arith::gcd_signed(a, q) == 1 {
                let dev = (direct.norm() - (q as f64).sqrt()).abs();
                worst_abs = worst_abs.max(dev / q as f64);
                if dev > 1e-9 * q as f64 {
                    return Err(format!("q = {q}, a = {a}: ||G| − √q| = {dev:e}"));
                }
            }
        }
        Ok((worst_diff, worst_abs))
    });
    let (mut worst_diff, mut worst_abs) = (0.0f64, 0.0f64);
    for res in per_q {
        match res {
            Ok((d, a)) => {
                worst_diff = worst_diff.max(d);
                worst_abs = worst_abs.max(a);
            }
            Err(e) => {
                out.fail(e);
                break;
            }
        }
    }
    if out.passed {
        out.detail = format!("odd q ≤ {q_max}, {} (a, b) samples", samples.len());
    }
    out.metric("max_diff", worst_diff);
    out.metric("max_abs_dev_over_q", worst_abs);
    out.within(start, None);
    out
}

fn random_gcal_params(rng: &mut ChaCha8Rng, q: u64) -> GcalParams {
    loop {
        let p = GcalParams {
            a: rng.gen_range(-1_000..1_000),
            b: rng.gen_range(-1_000..1_000),
            j: rng.gen_range(1..1_000),
            k: rng.gen_range(-1_000..1_000),
            u: rng.gen_range(-1_000..1_000),
            s: rng.gen_range(1..1_000),
        };
        if arith::gcd_signed(p.j, q) == 1 && arith::gcd_signed(p.s, q) == 1 {
            return p;
        }
    }
}

pub fn appendix_algebra(cfg: &AcceptConfig) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(
        5,
        "𝒢 multiplicativity, 𝒢 bound, ℰ forms",
        CriterionKind::PassFail,
    );

    let mut rng = cfg.rng(5);
    let pair_count = cfg.pick(1_000, 100);
    let mut cases = Vec::with_capacity(pair_count);
    while cases.len() < pair_count {
        let q1 = 2 * rng.gen_range(1..100u64) + 1;
        let q2 = 2 * rng.gen_range(1..100u64) + 1;
        if gcd(q1, q2) == 1 {
            cases.push((q1, q2, random_gcal_params(&mut rng, q1 * q2)));
        }
    }
    let diffs = par::map(&cases, |(q1, q2, p)| -> Result<f64> {
        let whole = gcal(q1 * q2, p)?.value;
        let left = gcal(
            *q1,
            &GcalParams {
                s: p.s * *q2 as i64,
                ..*p
            },
        )?
        .value;
        let right = gcal(
            *q2,
            &GcalParams {
                s: p.s * *q1 as i64,
                ..*p
            },
        )?
        .value;
        Ok((whole - left * right).norm())
    });
    let mut worst_multi = 0.0f64;
    for ((q1, q2, p), d) in cases.iter().zip(diffs) {
        match d {
            Ok(d) if d <= 1e-6 => worst_multi = worst_multi.max(d),
            Ok(d) => {
                out.fail(format!(
                    "multiplicativity at q₁ = {q1}, q₂ = {q2}, {p:?}: deviation {d:e}"
                ));
                break;
            }
            Err(e) => {
                out.fail(format!("multiplicativity at q₁ = {q1}, q₂ = {q2}: {e}"));
                break;
            }
        }
    }
    out.metric("multi_max_dev", worst_multi);

    let limit: u64 = cfg.pick(10_000, 1_000);
    let per_modulus = cfg.pick(8, 4);
    let mut prime_powers = Vec::new();
    for p in (3..=limit).step_by(2).filter(|&p| arith::is_prime(p)) {
        let mut pe = p;
        while pe <= limit {
            prime_powers.push(pe);
            pe *= p;
        }
    }
    prime_powers.sort_unstable();
    let seed = cfg.seed;
    let margins = par::map(&prime_powers, |&q| -> Result<(f64, GcalParams)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ q.wrapping_mul(0xD1B5_4A32_D192_ED03));
        let mut worst = (
            0.0f64,
            GcalParams {
                a: 0,
                b: 0,
                j: 1,
                k: 0,
                u: 0,
                s: 1,
            },
        );
        for _ in 0..per_modulus {
            let p = random_gcal_params(&mut rng, q);
            let m = gcal(q, &p)?.margin.unwrap_or(0.0);
            if m > worst.0 {
                worst = (m, p);
            }
        }
        Ok(worst)
    });
    let mut worst_goal = 0.0f64;
    for (q, m) in prime_powers.iter().zip(margins) {
        match m {
            Ok((m, p)) => {
                worst_goal = worst_goal.max(m);
                if m > 1.0 {
                    out.fail(format!(
                        "𝒢 bound with constant 12 fails at q = {q}, {p:?}: margin {m}"
                    ));
                }
            }
            Err(e) => out.fail(format!("𝒢 at q = {q}: {e}")),
        }
    }
    out.metric("estigoal_max_margin", worst_goal);

    let r_max: u64 = cfg.pick(500, 120);
    let esum_cases: Vec<(u64, i64, i64, i64, i64)> = (1..=r_max)
        .flat_map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ r.wrapping_mul(0x94D0_49BB_1331_11EB));
            let js = energy::sample_units(r, 2, seed);
            js.into_iter()
                .map(|j| {
                    let l = rng.gen_range(0..r) as i64;
                    let n = rng.gen_range(0..r) as i64;
                    let h = rng.gen_range(0..r) as i64;
                    (r, j, h, l, n)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let gaps = par::map(&esum_cases, |&(r, j, h, l, n)| -> Result<f64> {
        let a = esum_jh(l, n, j, h, r, EsumForm::Paired)?.value;
        let b = esum_jh(l, n, j, h, r, EsumForm::Bare)?.value;
        Ok((a - b).norm())
    });
    let mut worst_gap = 0.0f64;
    for (&(r, j, h, l, n), gap) in esum_cases.iter().zip(gaps) {
        match gap {
            Ok(g) if g <= 1e-9 * r as f64 => worst_gap = worst_gap.max(g / r as f64),
            Ok(g) => {
                out.fail(format!(
                    "ℰ forms differ at r = {r}, j = {j}, h = {h}, l = {l}, n = {n}: {g:e}"
                ));
                break;
            }
            Err(e) => {
                out.fail(format!("ℰ at r = {r}: {e}"));
                break;
            }
        }
    }
    out.metric("esum_max_gap_over_r", worst_gap);
    if out.passed {
        out.detail = format!(
            "{} pairs, {} prime powers × {per_modulus} samples, {} ℰ points",
            cases.len(),
            prime_powers.len(),
            esum_cases.len()
        );
    }
    out.within(start, None);
    out
}

pub fn explicit_sieves(cfg: &AcceptConfig) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(
        6,
        "classical and double large sieve",
        CriterionKind::PassFail,
    );
    let count = cfg.pick(1_000, 100);
    let mut rng = cfg.rng(6);
    let instances: Vec<(i64, usize, u64, u64)> = (0..count)
        .map(|_| {
            (
                rng.gen_range(-1_000..=1_000),
                rng.gen_range(1..=256),
                rng.gen_range(1..=32),
                rng.gen(),
            )
        })
        .collect();
    let ratios = par::map(&instances, |&(offset, n, q, seed)| -> Result<f64> {
        let inst = SieveInstance::seeded(offset, n, seed)?;
        let lhs = ls_lhs(&inst, q, Moduli::Classical, u128::MAX)?;
        Ok(lhs.lhs / ((q * q + n as u64 - 1) as f64 * inst.z()))
    });
    let mut worst_ls = 0.0f64;
    for (&(offset, n, q, seed), ratio) in instances.iter().zip(ratios) {
        match ratio {
            Ok(x) if x <= 1.0 + 1e-9 => worst_ls = worst_ls.max(x),
            Ok(x) => {
                out.fail(format!("large sieve exceeded at N = {n}, Q = {q}, M = {offset}, seed {seed}: ratio {x}"));
                break;
            }
            Err(e) => {
                out.fail(format!("large sieve at N = {n}, Q = {q}: {e}"));
                break;
            }
        }
    }
    out.metric("ls_max_ratio", worst_ls);

    let mut min_slack = f64::INFINITY;
    let mut worst_ratio = 0.0f64;
    for i in 0..count {
        let big_a: f64 = rng.gen_range(0.5..50.0);
        let big_b: f64 = rng.gen_range(0.5..50.0);
        let k = rng.gen_range(1..=40);
        let l = rng.gen_range(1..=40);
        let alphas: Vec<f64> = (0..k).map(|_| rng.gen_range(-big_a..=big_a)).collect();
        let betas: Vec<f64> = (0..l).map(|_| rng.gen_range(-big_b..=big_b)).collect();
        let mut coeff = |n: usize| -> Vec<Complex64> {
            (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
                .collect()
        };
        let a = coeff(k);
        let b = coeff(l);
        match double_sieve_check(&alphas, &a, &betas, &b, big_a, big_b) {
            Ok(rep) => {
                min_slack = min_slack.min(rep.slack);
                if rep.rhs > 0.0 {
                    worst_ratio = worst_ratio.max(rep.lhs / rep.rhs);
                }
                if !rep.passed {
                    out.fail(format!(
                        "double large sieve fails on instance {i}: lhs {} rhs {}",
                        rep.lhs, rep.rhs
                    ));
                }
            }
            Err(e) => out.fail(format!("double large sieve instance {i}: {e}")),
        }
    }
    out.metric("double_min_slack", min_slack);
    out.metric("double_max_ratio", worst_ratio);
    if out.passed {
        out.detail = format!("{count} classical instances, {count} bilinear instances");
    }
    out.within(start, None);
    out
}

/// Fixed corpus of rational functions `(numerator, denominator)`, constant
/// term first, each of total degree at most 6.
pub const BOMBIERI_CORPUS: [(&[i64], &[i64]); 20] = [
    (&[0, 0, 1], &[1]),
    (&[0, 2, 0, 1], &[1]),
    (&[1, 1, 0, 0, 1], &[1]),
    (&[0, 0, 3, 0, 0, 1], &[1]),
    (&[0, 1, 0, 0, 0, 0, 1], &[1]),
    (&[0, 0, 0, 1], &[1]),
    (&[5, -3, 2, 0, 0, 0, 7], &[1]),
    (&[1], &[0, 1]),
    (&[1, 0, 1], &[0, 1]),
    (&[1, 0, 1], &[-1, 1]),
    (&[0, 1], &[1, 0, 1]),
    (&[2, 0, 0, 1], &[0, 0, 1]),
    (&[1, 1], &[1, 0, 0, 1]),
    (&[3], &[1, 0, 1]),
    (&[0, 0, 0, 0, 1], &[1, 1]),
    (&[1, -1, 1], &[0, 0, 0, 1]),
    (&[0, 1, 0, 1], &[1, 0, 0, 1]),
    (&[4, 0, 1], &[2, 3, 1]),
    (&[1, 2, 3], &[3, 2, 0, 1]),
    (&[0, 0, 1, 0, 1], &[0, 1]),
];

pub fn bombieri_margin(p_max: u64) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(7, "Bombieri–Weil margin", CriterionKind::PassFail);
    let primes: Vec<u64> = (2..=p_max).filter(|&p| arith::is_prime(p)).collect();
    let rows = par::map(&primes, |&p| {
        let mut worst = (0.0f64, usize::MAX);
        let mut skipped = 0u64;
        for (i, (num, den)) in BOMBIERI_CORPUS.iter().enumerate() {
            let Ok(f) = RationalFunctionModP::new(num, den, p) else {
                skipped += 1;
                continue;
            };
            if f.is_constant() {
                skipped += 1;
                continue;
            }
            match rational_expsum(&f) {
                Ok(v) => {
                    let m = v.margin.unwrap_or(0.0);
                    if m > worst.0 {
                        worst = (m, i);
                    }
                }
                Err(_) => skipped += 1,
            }
        }
        (worst, skipped)
    });
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for (&p, ((m, i), s)) in primes.iter().zip(rows) {
        skipped += s;
        worst = worst.max(m);
        if m > 1.0 {
            out.fail(format!("p = {p}, corpus entry {i}: margin {m}"));
        }
    }
    if out.passed {
        out.detail = format!(
            "{} primes × {} functions",
            primes.len(),
            BOMBIERI_CORPUS.len()
        );
    }
    out.metric("max_margin", worst);
    out.metric("skipped_constant", skipped as f64);
    out.within(start, None);
    out
}

fn first_non_residue(r: u64) -> i64 {
    (2..r)
        .find(|&a| arith::jacobi_unchecked(a, r) == -1)
        .unwrap_or(1) as i64
}

pub fn s4_identity(cfg: &AcceptConfig) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(
        8,
        "S₄ closed form and weighted-energy paths",
        CriterionKind::PassFail,
    );
    let sweep_primes: &[u64] = cfg.pick(&[3, 5, 7, 11, 13], &[3, 5, 7]);
    let mut sweep_cases = Vec::new();
    for &r in sweep_primes {
        let ri = r as i64;
        for j in [1, first_non_residue(r)] {
            for code in 0..ri.pow(4) {
                let h = [
                    code % ri,
                    code / ri % ri,
                    code / ri.pow(2) % ri,
                    code / ri.pow(3),
                ];
                sweep_cases.push((r, j, h));
            }
        }
    }
    let mut rng = cfg.rng(8);
    let sample_primes: Vec<u64> = (3..=31).filter(|&p| arith::is_prime(p)).collect();
    let mut sample_cases = Vec::new();
    for _ in 0..cfg.pick(1_000, 100) {
        let r = sample_primes[rng.gen_range(0..sample_primes.len())];
        let j = loop {
            let j = rng.gen_range(1..r as i64);
            if arith::gcd_signed(j, r) == 1 {
                break j;
            }
        };
        let h = [0; 4].map(|_| rng.gen_range(-(r as i64)..r as i64));
        sample_cases.push((r, j, h));
    }
    let all: Vec<(u64, i64, [i64; 4])> = sweep_cases.iter().chain(&sample_cases).copied().collect();
    let gaps = par::map(&all, |&(r, j, h)| -> Result<f64> {
        let input = S4Input::new(j, h, r)?;
        let d = s4_direct(&input, u128::MAX)?.value;
        let c = s4_closed(&input)?.value;
        Ok((d - c).norm() / (r as f64).powi(3))
    });
    let mut worst = 0.0f64;
    for (&(r, j, h), g) in all.iter().zip(gaps) {
        match g {
            Ok(g) if g <= 1e-9 => worst = worst.max(g),
            Ok(g) => {
                out.fail(format!(
                    "S₄ mismatch at r = {r}, j = {j}, h = {h:?}: gap/r³ = {g:e}"
                ));
                break;
            }
            Err(e) => {
                out.fail(format!("S₄ at r = {r}: {e}"));
                break;
            }
        }
    }
    out.metric("s4_max_gap_over_r3", worst);

    let widths = [1.0, 2.5, 4.0];
    let mut weighted_cases = Vec::new();
    for r in (3..=cfg.pick(61u64, 23)).filter(|&p| arith::is_prime(p)) {
        let root = (r as f64).sqrt() as u64;
        let mut ranges = vec![1, root.max(1), r / 2, r];
        ranges.dedup();
        for range in ranges.into_iter().filter(|&x| x >= 1) {
            for j in [1, first_non_residue(r)] {
                for w in widths {
                    weighted_cases.push((r, range, j, w));
                }
            }
        }
    }
    let rel = par::map(&weighted_cases, |&(r, range, j, w)| -> Result<f64> {
        let weight = TrigWeight::fejer(w)?;
        Ok(weighted_energy(range, j, r, &weight, u128::MAX)?.relative_gap)
    });
    let mut worst_rel = 0.0f64;
    for (&(r, range, j, w), g) in weighted_cases.iter().zip(rel) {
        match g {
            Ok(g) if g <= 1e-6 => worst_rel = worst_rel.max(g),
            Ok(g) => {
                out.fail(format!("weighted energy paths differ at r = {r}, R = {range}, j = {j}, width {w}: {g:e}"));
                break;
            }
            Err(e) => {
                out.fail(format!("weighted energy at r = {r}, R = {range}: {e}"));
                break;
            }
        }
    }
    out.metric("weighted_max_relative_gap", worst_rel);
    if out.passed {
        out.detail = format!(
            "{} swept and {} sampled S₄ values, {} weighted energies",
            sweep_cases.len(),
            sample_cases.len(),
            weighted_cases.len()
        );
    }
    out.within(start, None);
    out
}

pub fn gcd_sums(h_max: u64, r_max: u64) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(9, "gcd power sums", CriterionKind::PassFail);
    let sigmas = [0.2f64, 0.5, 1.0];
    let powers: Vec<Vec<f64>> = sigmas
        .iter()
        .map(|&s| (0..=r_max).map(|d| (d as f64).powf(s)).collect())
        .collect();
    let results = par::map_range(1, r_max + 1, |r| -> std::result::Result<f64, String> {
        let tau = factorize(r).map_err(|e| e.to_string())?.divisor_count() as f64;
        let mut worst = 0.0f64;
        for (si, table) in powers.iter().enumerate() {
            let mut sum = 0.0f64;
            for h in 1..=h_max {
                sum += table[gcd(h, r) as usize];
                let bound = h as f64 * tau;
                if sum > bound {
                    return Err(format!(
                        "σ = {}, H = {h}, r = {r}: sum {sum} > {bound}",
                        sigmas[si]
                    ));
                }
                worst = worst.max(sum / bound);
            }
        }
        Ok(worst)
    });
    let mut worst = 0.0f64;
    for res in results {
        match res {
            Ok(w) => worst = worst.max(w),
            Err(e) => {
                out.fail(e);
                break;
            }
        }
    }
    if out.passed {
        out.detail = format!("H ≤ {h_max}, r ≤ {r_max}, σ ∈ {{1/5, 1/2, 1}}");
    }
    out.metric("max_ratio", worst);
    out.within(start, None);
    out
}

fn scan_max(op: &str, grid: ScanGrid, seed: u64) -> Result<(f64, String)> {
    let spec = ScanSpec {
        seed,
        ..ScanSpec::new(op, grid)
    };
    let records = run_scan(&spec)?;
    let summary = records
        .last()
        .ok_or_else(|| Error::invalid("scan produced no summary"))?;
    let max = summary
        .outputs
        .get("max_ratio")
        .and_then(|v| v.as_f64())
        .unwrap_or(0.0);
    let at = summary
        .params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",");
    Ok((max, at))
}

/// Largest `P(x)` and the largest ratios against `1 + Q²rz + Q³Δ` and
/// `1 + Q³Δ` over every `a/q²` with `Q < q ≤ 2Q` and a seeded sample of `x`.
pub fn px_scan(q: u64, n: u64, seed: u64, random_points: usize) -> Result<[f64; 3]> {
    let mut xs: Vec<Rational> = Vec::new();
    for d in q + 1..=2 * q {
        let d2 = (d * d) as i128;
        for a in 0..d2 {
            if gcd(a as u64, d) == 1 {
                xs.push(Rational::new(a, d2));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    xs.extend((0..random_points).map(|_| Rational::new(rng.gen_range(0..1_000_000), 1_000_000)));
    let conj = 1.0 + (q as f64).powi(3) / n as f64;
    let rows = par::map(&xs, |&x| {
        px_monitor(x, q, n, NumeratorRange::UpToQSquared, u128::MAX)
    });
    let mut best = [0.0f64; 3];
    for row in rows {
        let m = row?;
        best[0] = best[0].max(m.count as f64);
        best[1] = best[1].max(m.previous_ratio.unwrap_or(0.0));
        best[2] = best[2].max(m.count as f64 / conj);
    }
    Ok(best)
}

pub fn monitors(cfg: &AcceptConfig) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(10, "constant-tracking monitors", CriterionKind::Monitor);
    let r_max: u64 = cfg.pick(2_000, 300);
    let mut notes = Vec::new();
    let cbrt = RangeRule::Power { num: 1, den: 3 };
    let prime_grid = |rule: RangeRule, h_values: Vec<i64>| ScanGrid {
        r_min: 2,
        r_max,
        primes_only: true,
        odd_only: false,
        rule,
        j_sample: JSample::Random { count: 3 },
        h_values,
    };
    let jobs: Vec<(&str, &str, ScanGrid)> = vec![
        ("h1", "H1", prime_grid(cbrt, vec![0])),
        ("h2", "H2", prime_grid(cbrt, vec![0])),
        ("h3", "H3", prime_grid(cbrt, vec![1, 2, 3])),
        ("kssz", "KSSZ", prime_grid(cbrt, vec![0])),
        (
            "theorem",
            "E2theo",
            prime_grid(RangeRule::Power { num: 3, den: 4 }, vec![0]),
        ),
        (
            "esum",
            "expsumbound",
            ScanGrid {
                r_min: 3,
                r_max: cfg.pick(3_000, 400),
                primes_only: false,
                odd_only: true,
                rule: cbrt,
                j_sample: JSample::Random { count: 1 },
                h_values: vec![0, 1, 2],
            },
        ),
    ];
    for (op, label, grid) in jobs {
        match scan_max(op, grid, cfg.seed) {
            Ok((max, at)) => {
                out.metric(&format!("{op}_max_ratio"), max);
                notes.push(format!("{label} max {} at {at}", format_float(max)));
            }
            Err(e) => notes.push(format!("{label} scan failed: {e}")),
        }
    }

    let trivial_mismatch = (3..=cfg.pick(3_000u64, 400))
        .step_by(2)
        .filter(|&r| {
            let n = (r / 3) as i64;
            esum_jh(0, n, 1, 1, r, EsumForm::Paired)
                .map(|v| {
                    (v.value - Complex64::new(esum_trivial_claim(n, r), 0.0)).norm()
                        > 1e-6 * r as f64
                })
                .unwrap_or(false)
        })
        .count();
    out.metric("esum_l0_claim_mismatches", trivial_mismatch as f64);

    for (q, n) in [(8u64, 512u64), (10, 1_000)] {
        match px_scan(q, n, cfg.seed, cfg.pick(200, 20)) {
            Ok([count, prev, conj]) => {
                out.metric(&format!("px_{q}_{n}_max_count"), count);
                out.metric(&format!("px_{q}_{n}_previous_ratio"), prev);
                out.metric(&format!("px_{q}_{n}_conj_ratio"), conj);
            }
            Err(e) => notes.push(format!("P(x) for Q = {q}, N = {n} failed: {e}")),
        }
    }
    let table = sieve::ls_bound_table(10, 1_000);
    if let Ok(t) = table {
        out.metric("ls_10_1000_main_over_conj", t.main_result / t.conjecture);
    }
    out.detail = notes.join("; ");
    out.within(start, None);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_cover_every_criterion_once() {
        let mut ids: Vec<u8> = [
            Suite::Oracles,
            Suite::Identities,
            Suite::Constants,
            Suite::Monitors,
        ]
        .iter()
        .flat_map(|s| s.criteria().iter().copied())
        .collect();
        ids.sort_unstable();
        assert_eq!(ids, Suite::All.criteria());
        assert!("bogus".parse::<Suite>().is_err());
        assert!(run_criterion(11, &AcceptConfig::quick()).is_err());
    }

    // A root finder whose lift to higher prime powers loses the second
    // residue class: exactly the failure a broken Hensel step produces.
    fn broken_hensel(m: u64, f: &FactoredModulus) -> Vec<u64> {
        let mut roots = sqrt_mod_all(m, f).roots;
        if f.prime_powers().any(|(_, alpha, _)| alpha >= 2) && roots.len() > 1 {
            roots.pop();
        }
        roots
    }

    #[test]
    fn broken_hensel_lift_is_caught_and_located() {
        let out = sqrt_oracle(50, broken_hensel);
        assert!(!out.passed);
        assert!(out.detail.contains("(m, r) = (0, 4)"), "{}", out.detail);
        let report = AcceptanceReport {
            suite: Suite::Oracles,
            outcomes: vec![out],
        };
        assert_eq!(report.exit_code(), 1);
    }

    #[test]
    fn quick_suites_pass() {
        let cfg = AcceptConfig::quick();
        for suite in [Suite::Oracles, Suite::Identities, Suite::Constants] {
            let report = run_acceptance(suite, &cfg);
            for o in &report.outcomes {
                assert!(o.passed, "{}", o.line());
            }
            assert_eq!(report.exit_code(), 0);
        }
    }

    #[test]
    fn monitors_never_fail() {
        let report = run_acceptance(Suite::Monitors, &AcceptConfig::quick());
        assert_eq!(report.exit_code(), 0);
        let o = &report.outcomes[0];
        assert_eq!(o.kind, CriterionKind::Monitor);
        assert!(
            o.metrics.iter().any(|(k, _)| k == "h1_max_ratio"),
            "{}",
            o.line()
        );
        assert_eq!(report.records().len(), 1);
    }
}
