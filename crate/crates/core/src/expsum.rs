//! Complete exponential sums: quadratic Gauss sums, the root-pair sums
//! `ℰ_{j,h}(l, n)`, the appendix sums `𝒢(q; a, b, j, k, u, s)` and sums of
//! rational functions to a prime modulus.
//!
//! Every phase is reduced to a residue `t mod q` in exact integer arithmetic
//! before `e(t/q) = cis(2πt/q)` is formed, so the only floating-point error is
//! in the final `sin`/`cos` and the summation.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::{self, factorize, gcd, GaussEpsilon};
use crate::error::{Error, Result};
use crate::sqrt::{sqrt_mod_all, SquareTable};

/// `e(num/den) = exp(2πi·num/den)` with `num` reduced mod `den` first.
pub fn e_frac(num: i128, den: u64) -> Complex64 {
    if den == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let t = arith::reduce_i128(num, den);
    unit(t, den)
}

fn unit(t: u64, den: u64) -> Complex64 {
    let (s, c) = (TAU * t as f64 / den as f64).sin_cos();
    Complex64::new(c, s)
}

/// Cached `e(t/q)` for every residue `t mod q`.
#[derive(Debug, Clone)]
pub struct PhaseTable {
    modulus: u64,
    values: Vec<Complex64>,
}

impl PhaseTable {
    pub fn new(modulus: u64) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::ZeroModulus);
        }
        let values = (0..modulus).map(|t| unit(t, modulus)).collect();
        Ok(PhaseTable { modulus, values })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// `e(t/q)` for a residue `t < q`.
    pub fn get(&self, t: u64) -> Complex64 {
        self.values[t as usize]
    }
}

/// A complex sum with its term count and, when a bound applies,
/// `|value| / bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSumValue {
    pub value: Complex64,
    pub terms: u64,
    pub modulus: u64,
    pub margin: Option<f64>,
}

impl ExpSumValue {
    pub fn abs(&self) -> f64 {
        self.value.norm()
    }
}

fn check_modulus(q: u64) -> Result<()> {
    if q == 0 {
        Err(Error::ZeroModulus)
    } else {
        Ok(())
    }
}

/// `G(q; a, b) = Σ_{n mod q} e_q(an² + bn)` by literal summation.
pub fn gauss_sum_direct(q: u64, a: i64, b: i64) -> Result<ExpSumValue> {
    check_modulus(q)?;
    Ok(gauss_sum_direct_with(&PhaseTable::new(q)?, a, b))
}

/// [`gauss_sum_direct`] reusing a phase table for `q`.
///
/// The phase `an² + bn` is advanced by first and second differences.
pub fn gauss_sum_direct_with(table: &PhaseTable, a: i64, b: i64) -> ExpSumValue {
    let q = table.modulus();
    let (a, b) = (arith::reduce(a, q), arith::reduce(b, q));
    let two_a = arith::add_mod(a, a, q);
    let mut phase = 0u64;
    let mut step = arith::add_mod(a, b, q);
    let mut value = Complex64::new(0.0, 0.0);
    for _ in 0..q {
        value += table.get(phase);
        phase = arith::add_mod(phase, step, q);
        step = arith::add_mod(step, two_a, q);
    }
    ExpSumValue {
        value,
        terms: q,
        modulus: q,
        margin: None,
    }
}

/// Closed-form `G(q; a, b)` for odd `q`.
///
/// With `d = (a, q)`: zero if `d ∤ b`, `d·G(q/d; a/d, b/d)` otherwise, and for
/// `d = 1` the value `ε_q·e_q(−(4a)⁻¹b²)·(a/q)·√q`.
pub fn gauss_sum_closed(q: u64, a: i64, b: i64) -> Result<ExpSumValue> {
    check_modulus(q)?;
    if q % 2 == 0 {
        return Err(Error::EvenModulus(q));
    }
    let (a, b) = (arith::reduce(a, q), arith::reduce(b, q));
    let d = gcd(a, q);
    let value = if b % d != 0 {
        Complex64::new(0.0, 0.0)
    } else {
        let (q1, a1, b1) = (q / d, a / d, b / d);
        d as f64 * coprime_gauss(q1, a1, b1)?
    };
    Ok(ExpSumValue {
        value,
        terms: q,
        modulus: q,
        margin: None,
    })
}

fn coprime_gauss(q: u64, a: u64, b: u64) -> Result<Complex64> {
    if q == 1 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let four_a = arith::mul_mod(4, a, q);
    let inv = arith::inv_mod(four_a, q).ok_or(Error::NotCoprime {
        what: "4a",
        value: four_a as i64,
        modulus: q,
        gcd: gcd(four_a, q),
    })?;
    let phase = arith::sub_mod(0, arith::mul_mod(inv, arith::mul_mod(b, b, q), q), q);
    let symbol = arith::jacobi_unchecked(a, q) as f64;
    let eps = GaussEpsilon::for_modulus(q)?.value();
    Ok(eps * unit(phase, q) * symbol * (q as f64).sqrt())
}

/// Which of the two equivalent definitions of `ℰ_{j,h}(l, n)` to sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EsumForm {
    /// Pairs `(k, k̃)` with `k̃² − k² ≡ jh`, phase `l(k̃−k) + n·j̄·k²`.
    Paired,
    /// Classes `a` with roots `k² ≡ ja`, `k̃² ≡ j(a+h)`, phase `l(k̃−k) + na`.
    Bare,
}

impl std::str::FromStr for EsumForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paired" => Ok(EsumForm::Paired),
            "bare" => Ok(EsumForm::Bare),
            other => Err(Error::invalid(format!("unknown form {other:?}"))),
        }
    }
}

/// `r^{4/5}·(h, r)·(l, r)^{1/5}`, with `(0, r) = r`.
pub fn esum_bound(l: i64, h: i64, r: u64) -> f64 {
    let gh = gcd(arith::reduce(h, r), r) as f64;
    let gl = gcd(arith::reduce(l, r), r) as f64;
    (r as f64).powf(0.8) * gh * gl.powf(0.2)
}

/// `ℰ_{j,h}(l, n)` mod `r`, margin against [`esum_bound`].
pub fn esum_jh(l: i64, n: i64, j: i64, h: i64, r: u64, form: EsumForm) -> Result<ExpSumValue> {
    check_modulus(r)?;
    let j_inv = arith::inv_mod_signed(j, r, "j")?;
    let (lr, nr, jr) = (
        arith::reduce(l, r),
        arith::reduce(n, r),
        arith::reduce(j, r),
    );
    let jh = arith::mul_mod(jr, arith::reduce(h, r), r);
    let table = PhaseTable::new(r)?;
    let mut value = Complex64::new(0.0, 0.0);
    let mut terms = 0u64;
    match form {
        EsumForm::Paired => {
            let squares = SquareTable::new(r)?;
            let coeff = arith::mul_mod(nr, j_inv, r);
            for k in 0..r {
                let k2 = arith::mul_mod(k, k, r);
                let base = arith::mul_mod(coeff, k2, r);
                for &kt in squares.roots(arith::add_mod(k2, jh, r)) {
                    let diff = arith::sub_mod(kt as u64, k, r);
                    value += table.get(arith::add_mod(arith::mul_mod(lr, diff, r), base, r));
                    terms += 1;
                }
            }
        }
        EsumForm::Bare => {
            let fr = factorize(r)?;
            for a in 0..r {
                let lower = sqrt_mod_all(arith::mul_mod(jr, a, r), &fr);
                if lower.is_empty() {
                    continue;
                }
                let upper = sqrt_mod_all(arith::add_mod(arith::mul_mod(jr, a, r), jh, r), &fr);
                let base = arith::mul_mod(nr, a, r);
                for &k in &lower.roots {
                    for &kt in &upper.roots {
                        let diff = arith::sub_mod(kt, k, r);
                        value += table.get(arith::add_mod(arith::mul_mod(lr, diff, r), base, r));
                        terms += 1;
                    }
                }
            }
        }
    }
    Ok(ExpSumValue {
        value,
        terms,
        modulus: r,
        margin: Some(value.norm() / esum_bound(l, h, r)),
    })
}

/// The value `r·[r | n]` the simplified `l = 0` evaluation asserts.
pub fn esum_trivial_claim(n: i64, r: u64) -> f64 {
    if arith::reduce(n, r) == 0 {
        r as f64
    } else {
        0.0
    }
}

/// Parameters of `𝒢(q; a, b, j, k, u, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcalParams {
    pub a: i64,
    pub b: i64,
    pub j: i64,
    pub k: i64,
    pub u: i64,
    pub s: i64,
}

/// `12·q^{4/5}·(bu², a, bk², q)^{1/5}`.
pub fn gcal_bound(q: u64, p: &GcalParams) -> f64 {
    let bu2 = arith::mul_mod(
        arith::reduce(p.b, q),
        arith::mul_mod(arith::reduce(p.u, q), arith::reduce(p.u, q), q),
        q,
    );
    let bk2 = arith::mul_mod(
        arith::reduce(p.b, q),
        arith::mul_mod(arith::reduce(p.k, q), arith::reduce(p.k, q), q),
        q,
    );
    let g = gcd(gcd(gcd(bu2, arith::reduce(p.a, q)), bk2), q);
    12.0 * (q as f64).powf(0.8) * (g as f64).powf(0.2)
}

fn is_prime_power(q: u64) -> bool {
    q > 1
        && factorize(q)
            .map(|f| f.factors().len() == 1)
            .unwrap_or(false)
}

/// `𝒢(q; a, b, j, k, u, s) = Σ_{(c,q)=1} e_q(ac + b·(jk − us²c²)²/(4js³c²))`
/// for odd `q` with `(js, q) = 1`.
///
/// The margin against [`gcal_bound`] is set when `q` is a prime power.
pub fn gcal(q: u64, p: &GcalParams) -> Result<ExpSumValue> {
    check_modulus(q)?;
    if q % 2 == 0 {
        return Err(Error::EvenModulus(q));
    }
    let jr = arith::reduce(p.j, q);
    let sr = arith::reduce(p.s, q);
    let js = arith::mul_mod(jr, sr, q);
    let g = gcd(js, q);
    if g != 1 {
        return Err(Error::NotCoprime {
            what: "js",
            value: js as i64,
            modulus: q,
            gcd: g,
        });
    }
    let (a, b) = (arith::reduce(p.a, q), arith::reduce(p.b, q));
    let (k, u) = (arith::reduce(p.k, q), arith::reduce(p.u, q));
    let jk = arith::mul_mod(jr, k, q);
    let us2 = arith::mul_mod(u, arith::mul_mod(sr, sr, q), q);
    let four_js3 = arith::mul_mod(arith::mul_mod(4 % q, jr, q), arith::pow_mod(sr, 3, q), q);
    let four_js3_inv = arith::inv_mod(four_js3, q).unwrap_or(0);
    let table = PhaseTable::new(q)?;
    let mut value = Complex64::new(0.0, 0.0);
    let mut terms = 0u64;
    for c in 0..q {
        let Some(c_inv) = arith::inv_mod(c, q) else {
            continue;
        };
        let c2 = arith::mul_mod(c, c, q);
        let numer = arith::sub_mod(jk, arith::mul_mod(us2, c2, q), q);
        let numer2 = arith::mul_mod(numer, numer, q);
        let denom_inv = arith::mul_mod(four_js3_inv, arith::mul_mod(c_inv, c_inv, q), q);
        let t = arith::add_mod(
            arith::mul_mod(a, c, q),
            arith::mul_mod(b, arith::mul_mod(numer2, denom_inv, q), q),
            q,
        );
        value += table.get(t);
        terms += 1;
    }
    let margin = is_prime_power(q).then(|| value.norm() / gcal_bound(q, p));
    Ok(ExpSumValue {
        value,
        terms,
        modulus: q,
        margin,
    })
}

/// `f = f₁/f₂` over `Z/pZ`; coefficients are listed from the constant term up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalFunctionModP {
    numerator: Vec<u64>,
    denominator: Vec<u64>,
    p: u64,
}

fn reduce_poly(coeffs: &[i64], p: u64) -> Vec<u64> {
    let mut out: Vec<u64> = coeffs.iter().map(|&c| arith::reduce(c, p)).collect();
    while out.last() == Some(&0) {
        out.pop();
    }
    out
}

fn eval_poly(coeffs: &[u64], x: u64, p: u64) -> u64 {
    coeffs
        .iter()
        .rev()
        .fold(0, |acc, &c| arith::add_mod(arith::mul_mod(acc, x, p), c, p))
}

impl RationalFunctionModP {
    pub fn new(numerator: &[i64], denominator: &[i64], p: u64) -> Result<Self> {
        if !arith::is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let denominator = reduce_poly(denominator, p);
        if denominator.is_empty() {
            return Err(Error::invalid("denominator vanishes identically mod p"));
        }
        Ok(RationalFunctionModP {
            numerator: reduce_poly(numerator, p),
            denominator,
            p,
        })
    }

    /// A polynomial `f₁` (denominator 1).
    pub fn polynomial(coeffs: &[i64], p: u64) -> Result<Self> {
        Self::new(coeffs, &[1], p)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn numerator(&self) -> &[u64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[u64] {
        &self.denominator
    }

    /// Degree of the reduced numerator; the zero polynomial counts as 0.
    pub fn numerator_degree(&self) -> u32 {
        self.numerator.len().saturating_sub(1) as u32
    }

    pub fn denominator_degree(&self) -> u32 {
        (self.denominator.len() - 1) as u32
    }

    /// `d_p(f) = d_p(f₁) + d_p(f₂)`.
    pub fn total_degree(&self) -> u32 {
        self.numerator_degree() + self.denominator_degree()
    }

    /// True when `f₁ ≡ c·f₂` as polynomials mod `p`.
    pub fn is_constant(&self) -> bool {
        let p = self.p;
        if self.numerator.is_empty() {
            return true;
        }
        if self.numerator.len() != self.denominator.len() {
            return false;
        }
        let lead_inv = arith::inv_mod(*self.denominator.last().unwrap(), p).unwrap();
        let c = arith::mul_mod(*self.numerator.last().unwrap(), lead_inv, p);
        self.numerator
            .iter()
            .zip(&self.denominator)
            .all(|(&x, &y)| x == arith::mul_mod(c, y, p))
    }

    /// `f(n)` when `f₂(n) ≢ 0`.
    pub fn eval(&self, n: u64) -> Option<u64> {
        let p = self.p;
        let den = eval_poly(&self.denominator, n % p, p);
        let inv = arith::inv_mod(den, p)?;
        Some(arith::mul_mod(eval_poly(&self.numerator, n % p, p), inv, p))
    }
}

/// `S(f, p) = Σ_{f₂(n) ≢ 0} e_p(f(n))`, margin against `2·d_p(f)·√p`.
pub fn rational_expsum(f: &RationalFunctionModP) -> Result<ExpSumValue> {
    if f.is_constant() {
        return Err(Error::invalid("rational function is constant mod p"));
    }
    let p = f.p();
    let table = PhaseTable::new(p)?;
    let mut value = Complex64::new(0.0, 0.0);
    let mut terms = 0;
    for n in 0..p {
        if let Some(t) = f.eval(n) {
            value += table.get(t);
            terms += 1;
        }
    }
    let bound = 2.0 * f.total_degree() as f64 * (p as f64).sqrt();
    Ok(ExpSumValue {
        value,
        terms,
        modulus: p,
        margin: Some(value.norm() / bound),
    })
}
