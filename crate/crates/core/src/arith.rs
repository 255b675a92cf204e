//! Exact integer and modular arithmetic.
//!
//! Residues are `u64` with `u128` intermediates. Nothing in this module
//! touches floating point except [`gcd_power_sum`], whose result is a real
//! number by definition.

use std::fmt;

use num_complex::Complex64;
use num_integer::Integer;

use crate::error::{Error, Result};

/// Largest modulus accepted by [`factorize`].
pub const MAX_FACTOR_INPUT: u64 = 1 << 63;

const TRIAL_DIVISION_LIMIT: u64 = 1_000_000;

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// `a mod m` in `[0, m)` for a signed `a`.
#[inline]
pub fn reduce(a: i64, m: u64) -> u64 {
    debug_assert!(m > 0);
    (a as i128).rem_euclid(m as i128) as u64
}

/// `a mod m` in `[0, m)` for a 128-bit signed `a`.
#[inline]
pub fn reduce_i128(a: i128, m: u64) -> u64 {
    a.rem_euclid(m as i128) as u64
}

/// gcd of a signed value with a modulus; `gcd(0, m) = m`.
pub fn gcd_signed(a: i64, m: u64) -> u64 {
    gcd(a.unsigned_abs(), m)
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    if (a | b) >> 32 == 0 {
        (a * b) % m
    } else {
        ((a as u128 * b as u128) % m as u128) as u64
    }
}

#[inline]
pub fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    if a < m && b < m {
        let s = a.wrapping_add(b);
        if s < a || s >= m {
            s.wrapping_sub(m)
        } else {
            s
        }
    } else {
        ((a as u128 + b as u128) % m as u128) as u64
    }
}

#[inline]
pub fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    let (a, b) = (a % m, b % m);
    if a >= b {
        a - b
    } else {
        m - (b - a)
    }
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, or `None` when `gcd(a, m) > 1`.
///
/// Modulo 1 every residue is 0 and its inverse is 0.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let ext = (a as i128 % m as i128).extended_gcd(&(m as i128));
    if ext.gcd != 1 {
        return None;
    }
    Some(ext.x.rem_euclid(m as i128) as u64)
}

/// Inverse of a signed value, reporting the offending gcd on failure.
pub fn inv_mod_signed(a: i64, m: u64, what: &'static str) -> Result<u64> {
    inv_mod(reduce(a, m), m).ok_or(Error::NotCoprime {
        what,
        value: a,
        modulus: m,
        gcd: gcd_signed(a, m),
    })
}

/// Deterministic Miller-Rabin for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

// Brent's variant; `n` must be odd, composite and not a prime power of a
// small prime (those are removed by trial division first).
fn pollard_rho(n: u64) -> u64 {
    let mut c = 1u64;
    loop {
        let f = |x: u64| add_mod(mul_mod(x, x, n), c, n);
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        let mut q = 1u64;
        let mut r = 1usize;
        let mut ys = y;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..(128.min(r - k)) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = gcd(q, n);
                k += 128;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

fn split_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(n);
    split_into(d, out);
    split_into(n / d, out);
}

/// A positive integer together with its prime factorization.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactoredModulus {
    n: u64,
    factors: Vec<(u64, u32)>,
}

impl FactoredModulus {
    /// Builds a modulus from explicit factors, validating every invariant.
    pub fn from_factors(factors: Vec<(u64, u32)>) -> Result<Self> {
        let mut n: u64 = 1;
        let mut prev = 1u64;
        for &(p, e) in &factors {
            if p <= prev || !is_prime(p) || e == 0 {
                return Err(Error::invalid(format!("bad factor {p}^{e}")));
            }
            prev = p;
            let pe = p.checked_pow(e).ok_or(Error::Overflow("factor power"))?;
            n = n.checked_mul(pe).ok_or(Error::Overflow("factor product"))?;
        }
        Ok(FactoredModulus { n, factors })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `(p, α)` pairs, primes strictly increasing.
    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    /// `(p, α, p^α)` triples.
    pub fn prime_powers(&self) -> impl Iterator<Item = (u64, u32, u64)> + '_ {
        self.factors.iter().map(|&(p, e)| (p, e, p.pow(e)))
    }

    /// Number of divisors τ(n).
    pub fn divisor_count(&self) -> u64 {
        self.factors.iter().map(|&(_, e)| e as u64 + 1).product()
    }

    /// Number of distinct prime factors ω(n).
    pub fn omega(&self) -> u32 {
        self.factors.len() as u32
    }

    /// Euler's totient φ(n).
    pub fn totient(&self) -> u64 {
        self.factors
            .iter()
            .map(|&(p, e)| (p - 1) * p.pow(e - 1))
            .product()
    }

    pub fn is_prime(&self) -> bool {
        self.factors.len() == 1 && self.factors[0].1 == 1
    }

    /// The largest power of 2 dividing `n`, as an exponent.
    pub fn two_adic(&self) -> u32 {
        match self.factors.first() {
            Some(&(2, e)) => e,
            _ => 0,
        }
    }

    /// All positive divisors in increasing order.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let len = divs.len();
            let mut pk = 1;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs.sort_unstable();
        divs
    }
}

impl fmt::Display for FactoredModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|&(p, e)| {
                if e == 1 {
                    p.to_string()
                } else {
                    format!("{p}^{e}")
                }
            })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Factors `n` by trial division up to 10^6, then Miller-Rabin and Pollard rho.
pub fn factorize(n: u64) -> Result<FactoredModulus> {
    if n == 0 {
        return Err(Error::ZeroModulus);
    }
    if n > MAX_FACTOR_INPUT {
        return Err(Error::invalid(format!("{n} exceeds 2^63")));
    }
    let mut rest = n;
    let mut factors: Vec<(u64, u32)> = Vec::new();
    let mut push = |p: u64, rest: &mut u64| {
        let mut e = 0;
        while *rest % p == 0 {
            *rest /= p;
            e += 1;
        }
        if e > 0 {
            factors.push((p, e));
        }
    };
    push(2, &mut rest);
    push(3, &mut rest);
    let mut d = 5u64;
    while d <= TRIAL_DIVISION_LIMIT && d * d <= rest {
        push(d, &mut rest);
        push(d + 2, &mut rest);
        d += 6;
    }
    if rest > 1 {
        let mut big = Vec::new();
        split_into(rest, &mut big);
        big.sort_unstable();
        for p in big {
            match factors.last_mut() {
                Some((q, e)) if *q == p => *e += 1,
                _ => factors.push((p, 1)),
            }
        }
    }
    Ok(FactoredModulus { n, factors })
}

/// Jacobi symbol `(a/q)` for odd positive `q`, by binary reciprocity.
pub fn jacobi(a: i64, q: u64) -> Result<i8> {
    if q == 0 || q % 2 == 0 {
        return Err(Error::EvenModulus(q));
    }
    Ok(jacobi_unchecked(reduce(a, q), q))
}

pub(crate) fn jacobi_unchecked(a: u64, q: u64) -> i8 {
    let mut a = a % q;
    let mut n = q;
    let mut t = 1i8;
    while a != 0 {
        let s = a.trailing_zeros();
        a >>= s;
        if s & 1 == 1 && (n & 7 == 3 || n & 7 == 5) {
            t = -t;
        }
        if a & 3 == 3 && n & 3 == 3 {
            t = -t;
        }
        std::mem::swap(&mut a, &mut n);
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

/// Combines residues modulo pairwise coprime moduli into one residue modulo
/// their product. Returns `(value, modulus)`.
pub fn crt_combine(residues: &[(u64, u64)]) -> Result<(u64, u64)> {
    let mut acc = (0u64, 1u64);
    for &(v, m) in residues {
        if m == 0 {
            return Err(Error::ZeroModulus);
        }
        if gcd(acc.1, m) != 1 {
            return Err(Error::ModuliNotCoprime(acc.1, m));
        }
        let modulus = acc.1.checked_mul(m).ok_or(Error::Overflow("CRT modulus"))?;
        // x = acc.0 + acc.1 * t, with t = (v - acc.0) * acc.1^{-1} mod m
        let inv = inv_mod(acc.1 % m, m).expect("coprime");
        let t = mul_mod(sub_mod(v % m, acc.0 % m, m), inv, m);
        let value = (acc.0 as u128 + acc.1 as u128 * t as u128) % modulus as u128;
        acc = (value as u64, modulus);
    }
    Ok(acc)
}

/// `Σ_{1≤h≤H} gcd(h, r)^σ`.
pub fn gcd_power_sum(h_max: u64, r: u64, sigma: f64) -> Result<f64> {
    if h_max == 0 || r == 0 {
        return Err(Error::invalid("H and r must be positive"));
    }
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::invalid(format!("σ = {sigma} outside (0, 1]")));
    }
    Ok((1..=h_max).map(|h| (gcd(h, r) as f64).powf(sigma)).sum())
}

/// The eighth-root-of-unity factor of the quadratic Gauss sum: `1` for
/// `q ≡ 1 (mod 4)`, `i` for `q ≡ 3 (mod 4)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussEpsilon {
    One,
    I,
}

impl GaussEpsilon {
    pub fn for_modulus(q: u64) -> Result<Self> {
        match q % 4 {
            1 => Ok(GaussEpsilon::One),
            3 => Ok(GaussEpsilon::I),
            _ => Err(Error::EvenModulus(q)),
        }
    }

    pub fn value(self) -> Complex64 {
        match self {
            GaussEpsilon::One => Complex64::new(1.0, 0.0),
            GaussEpsilon::I => Complex64::new(0.0, 1.0),
        }
    }

    /// `ε^k` as an exact quarter-turn count.
    pub fn pow(self, k: u32) -> Complex64 {
        match self {
            GaussEpsilon::One => Complex64::new(1.0, 0.0),
            GaussEpsilon::I => match k % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_factor(mut n: u64) -> Vec<(u64, u32)> {
        let mut out = Vec::new();
        let mut d = 2;
        while d * d <= n {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            if e > 0 {
                out.push((d, e));
            }
            d += 1;
        }
        if n > 1 {
            out.push((n, 1));
        }
        out
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).unwrap().factors().is_empty());
        assert_eq!(factorize(9).unwrap().factors(), &[(3, 2)]);
        assert_eq!(
            factorize(360).unwrap().factors(),
            trial_factor(360).as_slice()
        );
        assert_eq!(factorize(0), Err(Error::ZeroModulus));
    }

    #[test]
    fn factorize_round_trip_to_a_million() {
        for n in 1..=1_000_000u64 {
            let f = factorize(n).unwrap();
            let back: u64 = f.prime_powers().map(|(_, _, pe)| pe).product();
            assert_eq!(back, n);
            assert!(f.factors().windows(2).all(|w| w[0].0 < w[1].0));
        }
    }

    #[test]
    fn factorize_large_semiprimes() {
        let p = 1_000_000_007u64;
        let q = 998_244_353u64;
        assert_eq!(factorize(p * q).unwrap().factors(), &[(q, 1), (p, 1)]);
        let big_prime = 9_223_372_036_854_775_783u64; // largest prime below 2^63
        assert_eq!(factorize(big_prime).unwrap().factors(), &[(big_prime, 1)]);
        let f = factorize(1 << 63).unwrap();
        assert_eq!(f.factors(), &[(2, 63)]);
        assert!(factorize((1 << 63) + 1).is_err());
    }

    #[test]
    fn miller_rabin_matches_sieve() {
        let limit = 100_000usize;
        let mut sieve = vec![true; limit];
        sieve[0] = false;
        sieve[1] = false;
        for i in 2..limit {
            if sieve[i] {
                for k in (i * i..limit).step_by(i) {
                    sieve[k] = false;
                }
            }
        }
        for (n, &p) in sieve.iter().enumerate() {
            assert_eq!(is_prime(n as u64), p, "{n}");
        }
        // strong pseudoprime to bases 2..=37 except one of them
        assert!(!is_prime(3_825_123_056_546_413_051));
    }

    #[test]
    fn jacobi_examples() {
        assert_eq!(jacobi(1, 9).unwrap(), 1);
        assert_eq!(jacobi(2, 15).unwrap(), 1);
        assert_eq!(jacobi(3, 5).unwrap(), -1);
        assert_eq!(jacobi(6, 9).unwrap(), 0);
        assert_eq!(jacobi(-1, 7).unwrap(), -1);
        assert!(jacobi(1, 8).is_err());
        assert!(jacobi(1, 0).is_err());
    }

    #[test]
    fn jacobi_matches_exhaustive_legendre() {
        for q in (3..1000u64).step_by(2).filter(|&q| is_prime(q)) {
            let mut is_square = vec![false; q as usize];
            for k in 1..q {
                is_square[(k * k % q) as usize] = true;
            }
            for a in 0..q {
                let expected = if a == 0 {
                    0
                } else if is_square[a as usize] {
                    1
                } else {
                    -1
                };
                assert_eq!(jacobi(a as i64, q).unwrap(), expected, "({a}/{q})");
            }
        }
    }

    #[test]
    fn jacobi_is_multiplicative() {
        for q in (1..200u64).step_by(2) {
            for a in -30i64..30 {
                for b in -10i64..10 {
                    let lhs = jacobi(a * b, q).unwrap();
                    assert_eq!(lhs, jacobi(a, q).unwrap() * jacobi(b, q).unwrap());
                }
            }
            for q2 in (1..60u64).step_by(2) {
                let a = 17;
                assert_eq!(
                    jacobi(a, q * q2).unwrap(),
                    jacobi(a, q).unwrap() * jacobi(a, q2).unwrap()
                );
            }
        }
    }

    #[test]
    fn crt_examples() {
        assert_eq!(crt_combine(&[(1, 3), (1, 5)]).unwrap(), (1, 15));
        assert_eq!(crt_combine(&[(2, 3), (3, 5)]).unwrap(), (8, 15));
        assert_eq!(crt_combine(&[(0, 4), (1, 9)]).unwrap(), (28, 36));
        assert_eq!(crt_combine(&[]).unwrap(), (0, 1));
        assert_eq!(
            crt_combine(&[(1, 6), (1, 4)]),
            Err(Error::ModuliNotCoprime(6, 4))
        );
    }

    #[test]
    fn gcd_power_sum_examples() {
        assert_eq!(gcd_power_sum(5, 1, 1.0).unwrap(), 5.0);
        assert_eq!(gcd_power_sum(4, 4, 1.0).unwrap(), 8.0);
        let expected = 1.0 + 2f64.sqrt() + 3f64.sqrt() + 2f64.sqrt() + 1.0 + 6f64.sqrt();
        assert!((gcd_power_sum(6, 6, 0.5).unwrap() - expected).abs() < 1e-12);
        assert!(gcd_power_sum(0, 6, 0.5).is_err());
        assert!(gcd_power_sum(3, 6, 0.0).is_err());
    }

    #[test]
    fn epsilon_squared_is_jacobi_of_minus_one() {
        for q in (1..10_000u64).step_by(2) {
            let eps = GaussEpsilon::for_modulus(q).unwrap().value();
            let sq = eps * eps;
            let j = jacobi(-1, q).unwrap() as f64;
            assert_eq!(sq, Complex64::new(j, 0.0), "q = {q}");
        }
        assert!(GaussEpsilon::for_modulus(4).is_err());
    }

    #[test]
    fn inverse_and_totient() {
        assert_eq!(inv_mod(3, 7), Some(5));
        assert_eq!(inv_mod(2, 4), None);
        assert_eq!(inv_mod(5, 1), Some(0));
        let f = factorize(360).unwrap();
        assert_eq!(f.totient(), 96);
        assert_eq!(f.divisor_count(), 24);
        assert_eq!(f.divisors().len(), 24);
        assert_eq!(f.omega(), 3);
        assert_eq!(f.to_string(), "2^3*3^2*5");
    }
}
