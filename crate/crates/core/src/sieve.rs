//! Large-sieve sums, Farey-window counts and Diophantine approximation.
//!
//! Points on the circle (`x`, `Δ`, `z`, `b/r`, the `αₖ` of
//! [`lsreduce_check`]) are exact rationals; only the trigonometric
//! evaluations are done in `f64`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{self, gcd};
use crate::error::{check_budget, Error, Result};
use crate::expsum::{e_frac, PhaseTable};
use crate::par;

pub type Rational = Ratio<i128>;

/// Parses `p/q`, an integer, or a finite decimal such as `0.618`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::invalid(format!("cannot parse rational {s:?}"));
    if s.contains('/') {
        let r: Rational = s.parse().map_err(|_| bad())?;
        return Ok(r);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || frac.len() > 30 {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let numer: i128 = digits.parse().map_err(|_| bad())?;
    let denom = 10i128.checked_pow(frac.len() as u32).ok_or_else(bad)?;
    let r = Rational::new(numer, denom);
    Ok(if neg { -r } else { r })
}

fn frac_part(x: Rational) -> Rational {
    x - x.floor()
}

fn to_f64(x: Rational) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Coefficients `aₙ` for `M < n ≤ M + N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveInstance {
    offset: i64,
    coeffs: Vec<Complex64>,
    z: f64,
}

impl SieveInstance {
    pub fn new(offset: i64, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("a sieve instance needs N ≥ 1 coefficients"));
        }
        let z = coeffs.iter().map(|c| c.norm_sqr()).sum();
        Ok(SieveInstance { offset, coeffs, z })
    }

    /// Real and imaginary parts drawn uniformly from `[−1, 1]`.
    pub fn seeded(offset: i64, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
            .collect();
        Self::new(offset, coeffs)
    }

    /// One `re im` pair per line; blank lines and `#` comments are skipped.
    pub fn parse_coefficients(text: &str, offset: i64, expected: usize) -> Result<Self> {
        let mut coeffs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |p: Option<&str>| -> Result<f64> {
                p.and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::invalid(format!("line {}: expected `re im`", i + 1)))
            };
            let re = parse(parts.next())?;
            let im = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::invalid(format!("line {}: expected `re im`", i + 1)));
            }
            coeffs.push(Complex64::new(re, im));
        }
        if coeffs.len() != expected {
            return Err(Error::invalid(format!(
                "coefficient file has {} entries, expected N = {expected}",
                coeffs.len()
            )));
        }
        Self::new(offset, coeffs)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `Z = Σ |aₙ|²`.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// `Σₙ aₙ e(n·num/den)` with each phase reduced exactly.
    pub fn eval_rational(&self, num: i128, den: u64) -> Complex64 {
        let start = arith::reduce_i128((self.offset as i128 + 1) * num, den);
        let step = arith::reduce_i128(num, den);
        let mut t = start;
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in &self.coeffs {
            acc += c * e_frac(t as i128, den);
            t = arith::add_mod(t, step, den);
        }
        acc
    }

    fn eval_with_table(&self, a: u64, table: &PhaseTable) -> Complex64 {
        let d = table.modulus();
        let step = a % d;
        let mut t = arith::reduce_i128((self.offset as i128 + 1) * a as i128, d);
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in &self.coeffs {
            acc += c * table.get(t);
            t = arith::add_mod(t, step, d);
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Moduli {
    /// Fractions `a/q` with `a ≤ q`.
    Classical,
    /// Fractions `a/q²` with `a ≤ q²`.
    Squares,
}

impl FromStr for Moduli {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Moduli::Classical),
            "squares" => Ok(Moduli::Squares),
            other => Err(Error::invalid(format!("unknown moduli family {other:?}"))),
        }
    }
}

impl fmt::Display for Moduli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Moduli::Classical => "classical",
            Moduli::Squares => "squares",
        })
    }
}

/// Work estimate `N·Q²` or `N·Q³`.
pub fn ls_cost(n: usize, q_max: u64, moduli: Moduli) -> u128 {
    let q = q_max as u128;
    let fractions = match moduli {
        Moduli::Classical => q * q,
        Moduli::Squares => q * q * q,
    };
    fractions.saturating_mul(n as u128)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsLhs {
    pub lhs: f64,
    pub fractions: u64,
    pub z: f64,
}

/// `Σ_{q≤Q} Σ_{(a,q)=1} |Σₙ aₙ e(na/d)|²` with `d = q` or `d = q²`.
pub fn ls_lhs(inst: &SieveInstance, q_max: u64, moduli: Moduli, budget: u128) -> Result<LsLhs> {
    check_budget(ls_cost(inst.len(), q_max, moduli), budget)?;
    let per_q = par::map_range(1, q_max + 1, |q| {
        let d = match moduli {
            Moduli::Classical => q,
            Moduli::Squares => q * q,
        };
        let table = PhaseTable::new(d).expect("q ≥ 1");
        let mut total = 0.0;
        let mut count = 0u64;
        for a in 1..=d {
            if gcd(a, q) != 1 {
                continue;
            }
            total += inst.eval_with_table(a, &table).norm_sqr();
            count += 1;
        }
        (total, count)
    });
    let (lhs, fractions) = per_q
        .into_iter()
        .fold((0.0, 0), |(s, c), (t, k)| (s + t, c + k));
    Ok(LsLhs {
        lhs,
        fractions,
        z: inst.z(),
    })
}

/// Large-sieve constants at `ε = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsBoundTable {
    pub q: u64,
    pub n: u64,
    /// `Q² + N − 1`.
    pub classical: f64,
    /// `Q³ + Q²√N + √Q·N`.
    pub zhao: f64,
    /// `Q³ + N + min(Q²√N, √Q·N)`.
    pub best_known: f64,
    /// `Q³ + N`.
    pub conjecture: f64,
    /// `Q^{7/2 − 1/135}`.
    pub main_result: f64,
    pub q2_sqrt_n: f64,
    pub sqrt_q_n: f64,
    /// `Q² ≤ N ≤ Q⁴`.
    pub in_regime: bool,
    /// `N = Q³`, where the main-result value is stated.
    pub critical: bool,
}

pub fn ls_bound_table(q: u64, n: u64) -> Result<LsBoundTable> {
    if q == 0 || n == 0 {
        return Err(Error::invalid("Q and N must be at least 1"));
    }
    let (qf, nf) = (q as f64, n as f64);
    let q2_sqrt_n = qf * qf * nf.sqrt();
    let sqrt_q_n = qf.sqrt() * nf;
    let q2 = q as u128 * q as u128;
    let n128 = n as u128;
    Ok(LsBoundTable {
        q,
        n,
        classical: qf * qf + nf - 1.0,
        zhao: qf.powi(3) + q2_sqrt_n + sqrt_q_n,
        best_known: qf.powi(3) + nf + q2_sqrt_n.min(sqrt_q_n),
        conjecture: qf.powi(3) + nf,
        main_result: qf.powf(3.5 - 1.0 / 135.0),
        q2_sqrt_n,
        sqrt_q_n,
        in_regime: q2 <= n128 && n128 <= q2.saturating_mul(q2),
        critical: q2.checked_mul(q as u128) == Some(n128),
    })
}

/// `x = b/r + z` with `1 ≤ r ≤ τ`, `(b, r) = 1`, `|z| ≤ 1/(rτ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Approximation {
    pub b: i128,
    pub r: u64,
    pub z: Rational,
}

/// The last continued-fraction convergent of `x` with denominator `≤ τ`.
pub fn dirichlet_approx(x: Rational, tau: u64) -> Result<Approximation> {
    if tau == 0 {
        return Err(Error::invalid("τ must be at least 1"));
    }
    let (mut p_prev, mut q_prev) = (1i128, 0i128);
    let mut p = x.floor().to_integer();
    let mut q = 1i128;
    let mut rest = x - Rational::from_integer(p);
    while *rest.numer() != 0 {
        let inv = rest.recip();
        let a = inv.floor().to_integer();
        let (p_next, q_next) = (a * p + p_prev, a * q + q_prev);
        if q_next > tau as i128 {
            break;
        }
        (p_prev, q_prev, p, q) = (p, q, p_next, q_next);
        rest = inv - Rational::from_integer(a);
    }
    Ok(Approximation {
        b: p,
        r: q as u64,
        z: x - Rational::new(p, q),
    })
}

/// True when `a` satisfies the approximation constraints for `x` and `τ`.
pub fn satisfies_approximation(x: Rational, tau: u64, a: &Approximation) -> bool {
    a.r >= 1
        && a.r <= tau
        && a.b.gcd(&(a.r as i128)) == 1
        && x - Rational::new(a.b, a.r as i128) == a.z
        && (if a.z < Rational::from_integer(0) {
            -a.z
        } else {
            a.z
        }) * Rational::from_integer(a.r as i128 * tau as i128)
            <= Rational::from_integer(1)
}

/// Approximation data for `P(x)`: `Δ = 1/N`, `τ = ⌊√N⌋` and `j = −b̄ mod r`.
///
/// A negative `z` is handled by reflecting `x ↦ 1 − x`; `reflected` records
/// it and the stored `x`, `b` and `z ≥ 0` refer to the reflected point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxFrame {
    pub x: Rational,
    pub reflected: bool,
    pub n: u64,
    pub delta: Rational,
    pub tau: u64,
    pub b: i128,
    pub r: u64,
    pub z: Rational,
    pub q: u64,
    /// `Q²Δ/z` when `z ≥ Δ`.
    pub delta_param: Option<f64>,
    pub j: u64,
}

fn isqrt(n: u64) -> u64 {
    let mut x = (n as f64).sqrt() as u64;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

impl ApproxFrame {
    pub fn new(x: Rational, q: u64, n: u64) -> Result<Self> {
        if n == 0 || q == 0 {
            return Err(Error::invalid("Q and N must be at least 1"));
        }
        let x = frac_part(x);
        let tau = isqrt(n);
        let mut approx = dirichlet_approx(x, tau)?;
        let mut x_eff = x;
        let reflected = approx.z < Rational::from_integer(0);
        if reflected {
            x_eff = Rational::from_integer(1) - x;
            approx = Approximation {
                b: approx.r as i128 - approx.b,
                r: approx.r,
                z: -approx.z,
            };
        }
        let delta = Rational::new(1, n as i128);
        let r = approx.r;
        let b_mod = arith::reduce_i128(approx.b, r);
        let j = if r == 1 {
            0
        } else {
            arith::sub_mod(0, arith::inv_mod(b_mod, r).expect("(b, r) = 1"), r)
        };
        let delta_param = (approx.z >= delta && approx.z > Rational::from_integer(0))
            .then(|| (q as f64).powi(2) * to_f64(delta) / to_f64(approx.z));
        Ok(ApproxFrame {
            x: x_eff,
            reflected,
            n,
            delta,
            tau,
            b: approx.b,
            r,
            z: approx.z,
            q,
            delta_param,
            j,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NumeratorRange {
    /// `1 ≤ a ≤ q`, as literally written in the definition of `P(x)`.
    UpToQ,
    /// `1 ≤ a ≤ q²`, matching the sieve sum.
    UpToQSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PxQuery {
    pub x: Rational,
    pub q: u64,
    pub delta: Rational,
    pub range: NumeratorRange,
}

/// Rough work estimate for [`px_count`].
pub fn px_cost(query: &PxQuery) -> u128 {
    let q = query.q as u128;
    let width = to_f64(query.delta) * 2.0 * (4 * q * q) as f64 + 1.0;
    let per_q = width.min((4 * q * q) as f64) as u128 + 1;
    q.saturating_mul(per_q)
}

/// `#{a/q² : Q < q ≤ 2Q, (a, q) = 1, ‖a/q² − x‖ ≤ Δ}` with `a` in the
/// selected numerator range.
pub fn px_count(query: &PxQuery, budget: u128) -> Result<u64> {
    if query.q == 0 {
        return Err(Error::invalid("Q must be at least 1"));
    }
    if query.delta <= Rational::from_integer(0) {
        return Err(Error::invalid("Δ must be positive"));
    }
    check_budget(px_cost(query), budget)?;
    let x = frac_part(query.x);
    let counts = par::map_range(query.q + 1, 2 * query.q + 1, |q| {
        let d = q * q;
        let d_r = Rational::from_integer(d as i128);
        let lo = (d_r * (x - query.delta)).ceil().to_integer();
        let hi = (d_r * (x + query.delta)).floor().to_integer();
        if hi < lo {
            return 0u64;
        }
        let a_max = match query.range {
            NumeratorRange::UpToQ => q,
            NumeratorRange::UpToQSquared => d,
        };
        let admissible = |a: u64| a >= 1 && a <= a_max && gcd(a, q) == 1;
        if hi - lo + 1 >= d as i128 {
            (1..=d).filter(|&a| admissible(a)).count() as u64
        } else {
            (lo..=hi)
                .map(|t| {
                    let a = arith::reduce_i128(t, d);
                    if a == 0 {
                        d
                    } else {
                        a
                    }
                })
                .filter(|&a| admissible(a))
                .count() as u64
        }
    });
    Ok(counts.into_iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PxRegime {
    VerySmall,
    Small,
    Medium,
    Large,
}

impl PxRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            PxRegime::VerySmall => "very-small",
            PxRegime::Small => "small",
            PxRegime::Medium => "medium",
            PxRegime::Large => "large",
        }
    }
}

/// Regime thresholds `Q^{45/67}Δ^{10/67} < Q^{29/27}Δ^{1/6} < Q^{−71/33}Δ^{−12/11} ≤ Δ^{−1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    pub very_small: f64,
    pub small: f64,
    pub medium: f64,
    pub top: f64,
}

pub fn regime_thresholds(q: f64, delta: f64) -> RegimeThresholds {
    RegimeThresholds {
        very_small: q.powf(45.0 / 67.0) * delta.powf(10.0 / 67.0),
        small: q.powf(29.0 / 27.0) * delta.powf(1.0 / 6.0),
        medium: q.powf(-71.0 / 33.0) * delta.powf(-12.0 / 11.0),
        top: delta.powf(-0.5),
    }
}

pub fn classify_regime(r: f64, t: &RegimeThresholds) -> PxRegime {
    if r <= t.very_small {
        PxRegime::VerySmall
    } else if r <= t.small {
        PxRegime::Small
    } else if r <= t.medium {
        PxRegime::Medium
    } else {
        PxRegime::Large
    }
}

/// Bracketed bound of the selected regime at `ε = 0`.
pub fn regime_bound(regime: PxRegime, q: f64, delta: f64, r: f64) -> f64 {
    let d = delta;
    match regime {
        PxRegime::Large => {
            1.0 + q.powf(17.0 / 8.0) * d.sqrt() * r.powf(-1.0 / 8.0)
                + q.powf(9.0 / 8.0) * d.powf(0.25)
        }
        PxRegime::Medium => {
            q.powf(1.9) * d.powf(9.0 / 20.0) * r.powf(-0.1)
                + q.powf(1.4) * d.powf(13.0 / 40.0) * r.powf(1.0 / 40.0)
                + q.powi(11) * d.powi(5) * r.powi(4)
                + r.powf(0.25) * q.powf(-0.25)
                + q / r
                + 1.0
                + q.powi(3) * d
        }
        PxRegime::Small => {
            q.powf(1.5) * d.powf(1.0 / 3.0) * r.powf(-1.0 / 30.0)
                + q.sqrt() * r.powf(-0.1)
                + r.powf(13.0 / 5.0) / q
                + q.powi(8) * d.powi(3) * r.powf(0.2)
                + 1.0
                + q.powi(3) * d
        }
        PxRegime::VerySmall => {
            q.powf(9.0 / 7.0) * d.powf(2.0 / 7.0) * r.powf(2.0 / 7.0)
                + q.powf(1.5) * d.powf(3.0 / 8.0) * r.powf(0.25)
                + q.powf(11.0 / 7.0) * d.powf(25.0 / 56.0) * r.powf(9.0 / 28.0)
                + q.powi(5) * d.powf(7.0 / 4.0) * r.powf(-0.5)
                + r.powi(3) / (q * q)
                + 1.0
                + q.powi(3) * d
        }
    }
}

/// Regime selection and bounds on the `N = Q³` row.
pub fn critical_regime(r: f64, q: f64) -> PxRegime {
    if r <= q.powf(15.0 / 67.0) {
        PxRegime::VerySmall
    } else if r <= q.powf(31.0 / 54.0) {
        PxRegime::Small
    } else if r <= q.powf(37.0 / 33.0) {
        PxRegime::Medium
    } else {
        PxRegime::Large
    }
}

pub fn critical_bound(regime: PxRegime, q: f64, r: f64) -> f64 {
    match regime {
        PxRegime::Large => 1.0 + q.powf(5.0 / 8.0) * r.powf(-1.0 / 8.0) + q.powf(3.0 / 8.0),
        PxRegime::Medium => {
            q.powf(11.0 / 20.0) * r.powf(-0.1)
                + q.powf(17.0 / 40.0) * r.powf(1.0 / 40.0)
                + r.powi(4) / q.powi(4)
                + q.powf(-0.25) * r.powf(0.25)
                + q / r
                + 1.0
        }
        PxRegime::Small => q.sqrt() * r.powf(-1.0 / 30.0) + r.powf(13.0 / 5.0) / q + 1.0,
        PxRegime::VerySmall => {
            q.powf(3.0 / 7.0) * r.powf(2.0 / 7.0)
                + q.powf(3.0 / 8.0) * r.powf(0.25)
                + q.powf(13.0 / 56.0) * r.powf(9.0 / 28.0)
                + r.powi(3) / (q * q)
                + 1.0
        }
    }
}

/// Exponent `e` of the per-regime simplification `Q^e` on the `N = Q³` row.
pub fn critical_exponent(regime: PxRegime) -> f64 {
    match regime {
        PxRegime::Large => 16.0 / 33.0,
        PxRegime::Medium | PxRegime::Small => 133.0 / 270.0,
        PxRegime::VerySmall => 33.0 / 67.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRow {
    pub regime: PxRegime,
    pub bound: f64,
    pub ratio: f64,
    pub exponent_bound: f64,
    pub exponent_ratio: f64,
    /// `Q^{133/270}`.
    pub corollary_bound: f64,
    pub corollary_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PxMonitor {
    pub frame: ApproxFrame,
    pub count: u64,
    /// `Q² ≤ N ≤ Q⁴`.
    pub qn_cond: bool,
    /// `N^{39/142} < Q < N^{9/26}`.
    pub regime_applicable: bool,
    /// `1 + Q²rz + Q³Δ`; absent when `z = 0`.
    pub previous_bound: Option<f64>,
    pub previous_ratio: Option<f64>,
    pub thresholds: RegimeThresholds,
    pub regime: PxRegime,
    pub regime_bound: f64,
    pub regime_ratio: f64,
    pub critical: Option<CriticalRow>,
}

/// Counts `P(x)` (numerators up to `q²`) and sets it against every bound
/// that applies at `ε = 0`.
pub fn px_monitor(
    x: Rational,
    q: u64,
    n: u64,
    range: NumeratorRange,
    budget: u128,
) -> Result<PxMonitor> {
    let frame = ApproxFrame::new(x, q, n)?;
    let query = PxQuery {
        x: frame.x,
        q,
        delta: frame.delta,
        range,
    };
    let count = px_count(&query, budget)?;
    let table = ls_bound_table(q, n)?;
    let (qf, nf) = (q as f64, n as f64);
    let delta = 1.0 / nf;
    let r = frame.r as f64;
    let z = to_f64(frame.z);
    let previous_bound = (z > 0.0).then(|| 1.0 + qf * qf * r * z + qf.powi(3) * delta);
    let thresholds = regime_thresholds(qf, delta);
    let regime = classify_regime(r, &thresholds);
    let regime_bound = regime_bound(regime, qf, delta, r);
    let critical = table.critical.then(|| {
        let regime = critical_regime(r, qf);
        let bound = critical_bound(regime, qf, r);
        let exponent_bound = qf.powf(critical_exponent(regime));
        let corollary_bound = qf.powf(133.0 / 270.0);
        CriticalRow {
            regime,
            bound,
            ratio: count as f64 / bound,
            exponent_bound,
            exponent_ratio: count as f64 / exponent_bound,
            corollary_bound,
            corollary_ratio: count as f64 / corollary_bound,
        }
    });
    Ok(PxMonitor {
        frame,
        count,
        qn_cond: table.in_regime,
        regime_applicable: nf.powf(39.0 / 142.0) < qf && qf < nf.powf(9.0 / 26.0),
        previous_bound,
        previous_ratio: previous_bound.map(|b| count as f64 / b),
        thresholds,
        regime,
        regime_bound,
        regime_ratio: count as f64 / regime_bound,
        critical,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleSieveReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

fn close_pair_sum(points: &[f64], weights: &[Complex64], width: f64) -> f64 {
    let mut total = 0.0;
    for (i, &x) in points.iter().enumerate() {
        for (k, &y) in points.iter().enumerate() {
            if (x - y).abs() < width {
                total += weights[i].norm() * weights[k].norm();
            }
        }
    }
    total
}

/// `|Σ aₖ b_l e(αₖβ_l)| ≤ 5·√(AB+1)·√(Σ_{|α−α'|<1/B} |aa'|)·√(Σ_{|β−β'|<1/A} |bb'|)`.
pub fn double_sieve_check(
    alphas: &[f64],
    a: &[Complex64],
    betas: &[f64],
    b: &[Complex64],
    big_a: f64,
    big_b: f64,
) -> Result<DoubleSieveReport> {
    if alphas.len() != a.len() || betas.len() != b.len() {
        return Err(Error::invalid("point and coefficient counts differ"));
    }
    if big_a.is_nan() || big_b.is_nan() || big_a < 0.0 || big_b < 0.0 {
        return Err(Error::invalid("A and B must be nonnegative"));
    }
    if let Some(x) = alphas.iter().find(|x| x.is_nan() || x.abs() > big_a) {
        return Err(Error::invalid(format!(
            "|α| = {} exceeds A = {big_a}",
            x.abs()
        )));
    }
    if let Some(y) = betas.iter().find(|y| y.is_nan() || y.abs() > big_b) {
        return Err(Error::invalid(format!(
            "|β| = {} exceeds B = {big_b}",
            y.abs()
        )));
    }
    let mut lhs = Complex64::new(0.0, 0.0);
    for (&x, &ak) in alphas.iter().zip(a) {
        for (&y, &bl) in betas.iter().zip(b) {
            let phase = (x * y).rem_euclid(1.0) * std::f64::consts::TAU;
            lhs += ak * bl * Complex64::from_polar(1.0, phase);
        }
    }
    let inv = |v: f64| if v == 0.0 { f64::INFINITY } else { 1.0 / v };
    let alpha_close = close_pair_sum(alphas, a, inv(big_b));
    let beta_close = close_pair_sum(betas, b, inv(big_a));
    let rhs = 5.0 * (big_a * big_b + 1.0).sqrt() * alpha_close.sqrt() * beta_close.sqrt();
    let lhs = lhs.norm();
    Ok(DoubleSieveReport {
        lhs,
        rhs,
        slack: rhs - lhs,
        passed: lhs <= rhs * (1.0 + 1e-12),
    })
}

/// Largest number of the points `αₖ mod 1` in one closed arc of length `width`.
pub fn max_window_count(alphas: &[Rational], width: Rational) -> u64 {
    let k = alphas.len();
    if k == 0 {
        return 0;
    }
    if width >= Rational::from_integer(1) {
        return k as u64;
    }
    let mut pts: Vec<Rational> = alphas.iter().map(|&a| frac_part(a)).collect();
    pts.sort();
    let one = Rational::from_integer(1);
    let ext: Vec<Rational> = pts
        .iter()
        .copied()
        .chain(pts.iter().map(|&p| p + one))
        .collect();
    let mut best = 0;
    let mut hi = 0;
    for lo in 0..k {
        if hi < lo {
            hi = lo;
        }
        while hi < lo + k && ext[hi] - ext[lo] <= width {
            hi += 1;
        }
        best = best.max(hi - lo);
    }
    best as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsReduceReport {
    pub lhs: f64,
    pub maxcount: u64,
    pub n: u64,
    pub z: f64,
    /// `LHS / (maxcount·N·Z)`; zero when the denominator vanishes.
    pub constant: f64,
}

/// `Σₖ |Σₙ aₙ e(nαₖ)|²` against `maxcount·N·Z`, where `maxcount` is the
/// largest number of `αₖ` within `1/N` of a single point.
pub fn lsreduce_check(alphas: &[Rational], inst: &SieveInstance) -> Result<LsReduceReport> {
    let n = inst.len() as u64;
    let values = par::map(alphas, |a| {
        let den = *a.denom();
        if den <= 0 || den > u64::MAX as i128 {
            return Err(Error::Overflow("α denominator"));
        }
        Ok(inst.eval_rational(*a.numer(), den as u64).norm_sqr())
    });
    let mut lhs = 0.0;
    for v in values {
        lhs += v?;
    }
    let maxcount = max_window_count(alphas, Rational::new(2, n as i128));
    let denom = maxcount as f64 * n as f64 * inst.z();
    Ok(LsReduceReport {
        lhs,
        maxcount,
        n,
        z: inst.z(),
        constant: if denom > 0.0 { lhs / denom } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(p: i128, q: i128) -> Rational {
        Rational::new(p, q)
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("3/10").unwrap(), rat(3, 10));
        assert_eq!(parse_rational("0.3").unwrap(), rat(3, 10));
        assert_eq!(parse_rational("-.5").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), rat(7, 1));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn single_coefficient_gives_totient_sum() {
        let inst = SieveInstance::new(0, vec![Complex64::new(1.0, 0.0)]).unwrap();
        for q in 1..=12u64 {
            let lhs = ls_lhs(&inst, q, Moduli::Classical, u128::MAX).unwrap();
            let phi: u64 = (1..=q)
                .map(|k| (1..=k).filter(|&a| gcd(a, k) == 1).count() as u64)
                .sum();
            assert!((lhs.lhs - phi as f64).abs() < 1e-9);
            assert_eq!(lhs.fractions, phi);
            assert!(lhs.lhs <= (q * q) as f64);
        }
    }

    #[test]
    fn zero_instance() {
        let inst = SieveInstance::new(3, vec![Complex64::new(0.0, 0.0); 9]).unwrap();
        assert_eq!(inst.z(), 0.0);
        assert_eq!(
            ls_lhs(&inst, 4, Moduli::Squares, u128::MAX).unwrap().lhs,
            0.0
        );
    }

    #[test]
    fn classical_inequality_holds() {
        for seed in 0..6 {
            for (n, q) in [(16usize, 4u64), (64, 8), (100, 10), (256, 16)] {
                let inst = SieveInstance::seeded(seed as i64 * 17 - 40, n, seed).unwrap();
                let lhs = ls_lhs(&inst, q, Moduli::Classical, u128::MAX).unwrap();
                let bound = ((q * q) as f64 + n as f64 - 1.0) * inst.z();
                assert!(lhs.lhs <= bound * (1.0 + 1e-9), "seed={seed} N={n} Q={q}");
            }
        }
    }

    #[test]
    fn squares_lhs_matches_rational_evaluation() {
        let inst = SieveInstance::seeded(-5, 20, 9).unwrap();
        let fast = ls_lhs(&inst, 4, Moduli::Squares, u128::MAX).unwrap().lhs;
        let mut slow = 0.0;
        for q in 1..=4u64 {
            for a in 1..=q * q {
                if gcd(a, q) == 1 {
                    slow += inst.eval_rational(a as i128, q * q).norm_sqr();
                }
            }
        }
        assert!((fast - slow).abs() < 1e-9 * slow.max(1.0));
    }

    #[test]
    fn budget_refusal() {
        let inst = SieveInstance::seeded(0, 64, 1).unwrap();
        assert_eq!(
            ls_lhs(&inst, 8, Moduli::Squares, 1000),
            Err(Error::Budget {
                cost: 64 * 512,
                budget: 1000
            })
        );
    }

    #[test]
    fn coefficient_file() {
        let inst = SieveInstance::parse_coefficients("1 0\n# c\n0.5 -2\n\n", 0, 2).unwrap();
        assert_eq!(inst.coefficients()[1], Complex64::new(0.5, -2.0));
        assert!((inst.z() - 5.25).abs() < 1e-15);
        assert!(SieveInstance::parse_coefficients("1 0\n", 0, 2).is_err());
        assert!(SieveInstance::parse_coefficients("1\n", 0, 1).is_err());
    }

    #[test]
    fn bound_table_examples() {
        let t = ls_bound_table(10, 1000).unwrap();
        assert_eq!(t.conjecture, 2000.0);
        assert!((t.q2_sqrt_n - t.sqrt_q_n).abs() < 1e-9);
        assert!((t.q2_sqrt_n - 3162.2776601683795).abs() < 1e-6);
        assert!(t.in_regime && t.critical);
        assert_eq!(t.classical, 1099.0);
        assert!(!ls_bound_table(10, 1_000_000).unwrap().in_regime);
        assert!(ls_bound_table(10, 10_000).unwrap().in_regime);
        assert!(!ls_bound_table(10, 99).unwrap().in_regime);
    }

    #[test]
    fn approx_examples() {
        let a = dirichlet_approx(rat(1, 2), 10).unwrap();
        assert_eq!((a.b, a.r, a.z), (1, 2, rat(0, 1)));
        let a = dirichlet_approx(rat(3, 10), 3).unwrap();
        assert_eq!((a.b, a.r, a.z), (1, 3, rat(-1, 30)));
        let golden = rat(6765, 10946);
        let a = dirichlet_approx(golden, 13).unwrap();
        assert_eq!((a.b, a.r), (8, 13));
        assert!(satisfies_approximation(golden, 13, &a));
        assert_eq!(dirichlet_approx(rat(0, 1), 5).unwrap().r, 1);
    }

    #[test]
    fn approximation_constraints_always_hold() {
        for den in 1..=60i128 {
            for num in 0..den {
                let x = rat(num, den);
                for tau in 1..=12 {
                    let a = dirichlet_approx(x, tau).unwrap();
                    assert!(satisfies_approximation(x, tau, &a), "x={x} τ={tau} {a:?}");
                }
            }
        }
    }

    #[test]
    fn frame_invariants() {
        for den in [7i128, 30, 97, 1000] {
            for num in 0..den {
                let f = ApproxFrame::new(rat(num, den), 5, 400).unwrap();
                assert_eq!(f.tau, 20);
                assert!(f.z >= rat(0, 1));
                assert!(f.r >= 1 && f.r <= f.tau);
                assert!(f.z * rat(f.r as i128 * 20, 1) <= rat(1, 1));
                let jb = arith::mul_mod(f.j, arith::reduce_i128(f.b, f.r), f.r);
                assert_eq!(jb, arith::reduce(-1, f.r));
                assert_eq!(f.delta, rat(1, 400));
                if let Some(d) = f.delta_param {
                    assert!(d <= 25.0 + 1e-12);
                }
            }
        }
    }

    fn brute_px(x: Rational, q_cap: u64, delta: Rational, range: NumeratorRange) -> u64 {
        let mut count = 0;
        for q in q_cap + 1..=2 * q_cap {
            let d = q * q;
            let a_max = if range == NumeratorRange::UpToQ { q } else { d };
            for a in 1..=a_max {
                if gcd(a, q) != 1 {
                    continue;
                }
                let diff = frac_part(rat(a as i128, d as i128) - x);
                let dist = diff.min(rat(1, 1) - diff);
                if dist <= delta {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn px_matches_brute_force() {
        for range in [NumeratorRange::UpToQ, NumeratorRange::UpToQSquared] {
            for (x, q, delta) in [
                (rat(1, 2), 3, rat(1, 100)),
                (rat(0, 1), 4, rat(1, 50)),
                (rat(3, 7), 5, rat(1, 30)),
                (rat(99, 100), 6, rat(1, 40)),
                (rat(1, 3), 2, rat(1, 2)),
                (rat(1, 3), 2, rat(3, 4)),
            ] {
                let query = PxQuery { x, q, delta, range };
                assert_eq!(
                    px_count(&query, u128::MAX).unwrap(),
                    brute_px(x, q, delta, range)
                );
            }
        }
    }

    #[test]
    fn px_examples() {
        // full window counts every admissible fraction
        let full = PxQuery {
            x: rat(0, 1),
            q: 3,
            delta: rat(1, 2),
            range: NumeratorRange::UpToQSquared,
        };
        let all: u64 = (4..=6u64)
            .map(|q| (1..=q * q).filter(|&a| gcd(a, q) == 1).count() as u64)
            .sum();
        assert_eq!(px_count(&full, u128::MAX).unwrap(), all);
        let tiny = PxQuery {
            x: rat(6765, 10946),
            q: 3,
            delta: rat(1, 1_000_000_000),
            range: NumeratorRange::UpToQSquared,
        };
        assert_eq!(px_count(&tiny, u128::MAX).unwrap(), 0);
        let bad = PxQuery {
            delta: rat(0, 1),
            ..tiny
        };
        assert!(px_count(&bad, u128::MAX).is_err());
    }

    #[test]
    fn px_monotone() {
        let x = rat(5, 13);
        let mut prev = 0;
        for k in 1..40 {
            let q = PxQuery {
                x,
                q: 6,
                delta: rat(k, 2000),
                range: NumeratorRange::UpToQSquared,
            };
            let c = px_count(&q, u128::MAX).unwrap();
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn monitor_rows() {
        let m = px_monitor(
            rat(2, 7) + rat(1, 5000),
            10,
            1000,
            NumeratorRange::UpToQSquared,
            u128::MAX,
        )
        .unwrap();
        assert!(m.qn_cond);
        assert!(m.critical.is_some());
        let prev = m.previous_bound.unwrap();
        let f = m.frame;
        let expect = 1.0 + 100.0 * f.r as f64 * to_f64(f.z) + 1000.0 / 1000.0;
        assert!((prev - expect).abs() < 1e-9);
        let zero =
            px_monitor(rat(1, 3), 10, 1000, NumeratorRange::UpToQSquared, u128::MAX).unwrap();
        assert!(zero.previous_bound.is_none());
        assert!(
            !px_monitor(
                rat(1, 3),
                10,
                1_000_000,
                NumeratorRange::UpToQSquared,
                u128::MAX
            )
            .unwrap()
            .qn_cond
        );
    }

    #[test]
    fn thresholds_agree_with_critical_row() {
        for q in [8.0f64, 20.0, 100.0] {
            let t = regime_thresholds(q, q.powi(-3));
            assert!((t.very_small - q.powf(15.0 / 67.0)).abs() < 1e-9 * t.very_small);
            assert!((t.small - q.powf(31.0 / 54.0)).abs() < 1e-9 * t.small);
            assert!((t.medium - q.powf(37.0 / 33.0)).abs() < 1e-9 * t.medium);
            assert!((t.top - q.powf(1.5)).abs() < 1e-9 * t.top);
            for r in [1.0, 2.0, 5.0, 30.0, q.powf(1.5)] {
                let regime = classify_regime(r, &t);
                assert_eq!(regime, critical_regime(r, q));
                let general = regime_bound(regime, q, q.powi(-3), r);
                let special = critical_bound(regime, q, r);
                // the simplified row drops dominated terms and the Q³Δ = 1 term
                assert!(general >= special - 1e-9);
                assert!(general <= 2.0 * special + 1.0);
            }
        }
    }

    #[test]
    fn double_sieve_examples() {
        let one = [Complex64::new(1.0, 0.0)];
        let rep = double_sieve_check(&[0.0], &one, &[0.0], &one, 1.0, 1.0).unwrap();
        assert_eq!(rep.lhs, 1.0);
        assert!((rep.rhs - 5.0 * 2f64.sqrt()).abs() < 1e-12);
        let zero = [Complex64::new(0.0, 0.0); 3];
        let rep =
            double_sieve_check(&[0.1, 0.2, 0.3], &zero, &[1.0, 2.0, 3.0], &zero, 1.0, 3.0).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert!(rep.passed);
        assert!(double_sieve_check(&[2.0], &one, &[0.0], &one, 1.0, 1.0).is_err());
    }

    #[test]
    fn double_sieve_random_slack() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..40 {
            let alphas: Vec<f64> = (0..50).map(|_| rng.gen_range(-10.0..=10.0)).collect();
            let betas: Vec<f64> = (0..50).map(|_| rng.gen_range(-10.0..=10.0)).collect();
            let a: Vec<Complex64> = (0..50)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let b: Vec<Complex64> = (0..50)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let rep = double_sieve_check(&alphas, &a, &betas, &b, 10.0, 10.0).unwrap();
            assert!(rep.slack >= 0.0);
        }
    }

    #[test]
    fn window_counts() {
        let pts = [rat(0, 1), rat(1, 10), rat(95, 100), rat(1, 2)];
        assert_eq!(max_window_count(&pts, rat(1, 10)), 2);
        assert_eq!(max_window_count(&pts, rat(15, 100)), 3);
        assert_eq!(max_window_count(&pts, rat(1, 1)), 4);
        assert_eq!(max_window_count(&[], rat(1, 2)), 0);
    }

    #[test]
    fn lsreduce_examples() {
        let inst = SieveInstance::new(0, vec![Complex64::new(3.0, 4.0)]).unwrap();
        let rep = lsreduce_check(&[rat(1, 7)], &inst).unwrap();
        assert!((rep.lhs - 25.0).abs() < 1e-9);
        assert_eq!(rep.maxcount, 1);
        assert!((rep.constant - 1.0).abs() < 1e-12);
        let inst = SieveInstance::seeded(2, 30, 4).unwrap();
        let single = lsreduce_check(&[rat(2, 9)], &inst).unwrap();
        let many = lsreduce_check(&[rat(2, 9); 5], &inst).unwrap();
        assert_eq!(many.maxcount, 5);
        assert!((many.lhs - 5.0 * single.lhs).abs() < 1e-9 * many.lhs);
    }
}
