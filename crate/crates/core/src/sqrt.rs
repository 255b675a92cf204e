//! Square roots modulo arbitrary moduli, and the residue multisets built
//! from them.
//!
//! `sqrt_mod_all` returns the complete collection of `k mod r` with
//! `k² ≡ m`, obtained per prime power (Tonelli-Shanks or the `p ≡ 3 (mod 4)`
//! exponentiation shortcut, then Hensel lifting) and glued together with
//! the Chinese remainder theorem.

use serde::{Deserialize, Serialize};

use crate::arith::{self, gcd, inv_mod, mul_mod, pow_mod, reduce, FactoredModulus};
use crate::error::{Error, Result};

/// Sorted, duplicate-free square roots of `residue` modulo `modulus`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootSet {
    pub modulus: u64,
    pub residue: u64,
    pub roots: Vec<u64>,
}

impl RootSet {
    fn new(modulus: u64, residue: u64, mut roots: Vec<u64>) -> Self {
        roots.sort_unstable();
        roots.dedup();
        RootSet {
            modulus,
            residue,
            roots,
        }
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

/// Roots of `m` modulo an odd prime `p`.
pub fn sqrt_mod_prime(m: u64, p: u64) -> Result<RootSet> {
    if p == 2 {
        return Err(Error::invalid("p = 2 goes through sqrt_mod_prime_power"));
    }
    if !arith::is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let m = m % p;
    let roots = match odd_prime_root(m, p) {
        None => vec![],
        Some(0) => vec![0],
        Some(x) => vec![x, p - x],
    };
    Ok(RootSet::new(p, m, roots))
}

// One square root of `m` modulo the odd prime `p`, if any.
fn odd_prime_root(m: u64, p: u64) -> Option<u64> {
    let m = m % p;
    if m == 0 {
        return Some(0);
    }
    if pow_mod(m, (p - 1) / 2, p) != 1 {
        return None;
    }
    if p % 4 == 3 {
        return Some(pow_mod(m, (p + 1) / 4, p));
    }
    // Tonelli-Shanks
    let s = (p - 1).trailing_zeros();
    let q = (p - 1) >> s;
    let mut z = 2u64;
    while pow_mod(z, (p - 1) / 2, p) != p - 1 {
        z += 1;
    }
    let mut c = pow_mod(z, q, p);
    let mut x = pow_mod(m, q.div_ceil(2), p);
    let mut t = pow_mod(m, q, p);
    let mut e = s;
    while t != 1 {
        let mut i = 0;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mul_mod(t2, t2, p);
            i += 1;
        }
        let b = pow_mod(c, 1 << (e - i - 1), p);
        x = mul_mod(x, b, p);
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        e = i;
    }
    Some(x)
}

// All roots of a unit `m` modulo `p^e`, `e ≥ 1`, unsorted.
fn unit_roots_prime_power(m: u64, p: u64, e: u32) -> Vec<u64> {
    let pe = p.pow(e);
    let m = m % pe;
    if p == 2 {
        return match e {
            1 => vec![1],
            2 if m % 4 == 1 => vec![1, 3],
            2 => vec![],
            _ if m % 8 != 1 => vec![],
            _ => {
                // x is a root mod 2^i; either x or x + 2^{i-1} lifts to 2^{i+1}.
                let mut x = 1u64;
                for i in 3..e {
                    let next = 1u64 << (i + 1);
                    if mul_mod(x, x, next) != m % next {
                        x += 1 << (i - 1);
                    }
                }
                let half = pe / 2;
                vec![x, pe - x, (x + half) % pe, (pe - x + half) % pe]
            }
        };
    }
    let Some(mut x) = odd_prime_root(m, p) else {
        return vec![];
    };
    let mut pk = p;
    for _ in 1..e {
        pk *= p;
        // x ← x − (x² − m)/(2x) mod p^{k+1}
        let fx = arith::sub_mod(mul_mod(x, x, pk), m % pk, pk);
        let inv = inv_mod(mul_mod(2, x, pk), pk).expect("2x is a unit");
        x = arith::sub_mod(x, mul_mod(fx, inv, pk), pk);
    }
    vec![x, pe - x]
}

/// Roots of `m` modulo `p^α`.
pub fn sqrt_mod_prime_power(m: u64, p: u64, alpha: u32) -> Result<RootSet> {
    if alpha == 0 {
        return Err(Error::invalid("exponent must be at least 1"));
    }
    if !arith::is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let pe = p.checked_pow(alpha).ok_or(Error::Overflow("prime power"))?;
    Ok(RootSet::new(
        pe,
        m % pe,
        prime_power_roots(m % pe, p, alpha, pe),
    ))
}

fn prime_power_roots(m: u64, p: u64, alpha: u32, pe: u64) -> Vec<u64> {
    if m == 0 {
        // k ≡ 0 mod p^{⌈α/2⌉}: p^{⌊α/2⌋} roots
        let step = p.pow(alpha.div_ceil(2));
        return (0..p.pow(alpha / 2)).map(|t| t * step).collect();
    }
    let mut beta = 0u32;
    let mut m1 = m;
    while m1 % p == 0 {
        m1 /= p;
        beta += 1;
    }
    if beta % 2 == 1 {
        return vec![];
    }
    let e = alpha - beta;
    let base = unit_roots_prime_power(m1, p, e);
    if beta == 0 {
        return base;
    }
    // k = k₁·p^{β/2} with k₁ running mod p^{α−β/2}
    let half = p.pow(beta / 2);
    let pe_unit = p.pow(e);
    let mut out = Vec::with_capacity(base.len() * half as usize);
    for &s in &base {
        for t in 0..half {
            let k1 = s + t * pe_unit;
            out.push(mul_mod(k1, half, pe));
        }
    }
    out
}

/// Every square root of `m` modulo `r`.
pub fn sqrt_mod_all(m: u64, r: &FactoredModulus) -> RootSet {
    let n = r.n();
    let m = m % n;
    if n == 1 {
        return RootSet::new(1, 0, vec![0]);
    }
    let mut acc: Vec<u64> = vec![0];
    for (p, alpha, pe) in r.prime_powers() {
        let local = prime_power_roots(m % pe, p, alpha, pe);
        if local.is_empty() {
            return RootSet::new(n, m, vec![]);
        }
        // CRT idempotent for this component: c ≡ 1 mod p^α, c ≡ 0 mod n/p^α.
        let cofactor = n / pe;
        let c = mul_mod(cofactor, inv_mod(cofactor % pe, pe).expect("coprime"), n);
        let mut next = Vec::with_capacity(acc.len() * local.len());
        for &a in &acc {
            for &k in &local {
                next.push(arith::add_mod(a, mul_mod(k, c, n), n));
            }
        }
        acc = next;
    }
    RootSet::new(n, m, acc)
}

/// Upper bound `τ(r)·2^{ω(r)}·gcd(m, r)^{1/2}` on the number of roots.
pub fn root_count_bound(m: u64, r: &FactoredModulus) -> f64 {
    let g = gcd(m % r.n(), r.n());
    r.divisor_count() as f64 * 2f64.powi(r.omega() as i32) * (g as f64).sqrt()
}

/// All residues grouped by their square: the exhaustive-squaring table.
#[derive(Debug, Clone)]
pub struct SquareTable {
    modulus: u64,
    offsets: Vec<u32>,
    roots: Vec<u32>,
}

impl SquareTable {
    pub fn new(modulus: u64) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::ZeroModulus);
        }
        if modulus > u32::MAX as u64 {
            return Err(Error::invalid("square table modulus exceeds 2^32"));
        }
        let n = modulus as usize;
        let mut counts = vec![0u32; n + 1];
        for k in 0..modulus {
            counts[mul_mod(k, k, modulus) as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut roots = vec![0u32; n];
        for k in 0..modulus {
            let s = mul_mod(k, k, modulus) as usize;
            roots[fill[s] as usize] = k as u32;
            fill[s] += 1;
        }
        Ok(SquareTable {
            modulus,
            offsets: counts,
            roots,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Increasing list of `k` with `k² ≡ m`.
    pub fn roots(&self, m: u64) -> &[u32] {
        let m = (m % self.modulus) as usize;
        &self.roots[self.offsets[m] as usize..self.offsets[m + 1] as usize]
    }
}

/// Which residues a [`RootMultiset`] records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MultisetKind {
    /// The roots `k` of `jm` for `1 ≤ m ≤ R`.
    Plain,
    /// The differences `k̃ − k` with `k² ≡ jm`, `k̃² ≡ j(m+h)`.
    Difference { h: i64 },
}

/// Residue → multiplicity table modulo `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootMultiset {
    modulus: u64,
    range: u64,
    j: i64,
    kind: MultisetKind,
    counts: Vec<u64>,
}

impl RootMultiset {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    pub fn j(&self) -> i64 {
        self.j
    }

    pub fn kind(&self) -> MultisetKind {
        self.kind
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, residue: u64) -> u64 {
        self.counts[(residue % self.modulus) as usize]
    }

    pub fn total_mass(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Nonzero entries as `(residue, count)`, residues increasing.
    pub fn support(&self) -> Vec<(u64, u64)> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i as u64, c))
            .collect()
    }
}

fn validate_multiset_args(range: u64, j: i64, r: u64) -> Result<()> {
    if range == 0 {
        return Err(Error::invalid("R must be at least 1"));
    }
    // Modulo 1 every congruence holds and R is unconstrained.
    if range > r && r != 1 {
        return Err(Error::RangeExceedsModulus { range, modulus: r });
    }
    let g = arith::gcd_signed(j, r);
    if g != 1 {
        return Err(Error::NotCoprime {
            what: "j must be coprime to r",
            value: j,
            modulus: r,
            gcd: g,
        });
    }
    Ok(())
}

// #{m ∈ [1, R] : m ≡ class (mod r)} for class in [0, r).
fn count_in_class(range: u64, class: u64, r: u64) -> u64 {
    if class == 0 {
        range / r
    } else if class <= range {
        (range - class) / r + 1
    } else {
        0
    }
}

/// Builds the multiset on the fast path.
///
/// The plain kind walks every `k mod r` once and tests whether `j̄k² mod r`
/// falls in `[1, R]`; the difference kind combines the root sets of `jm`
/// and `j(m+h)` for each `m`.
pub fn build_root_multiset(
    range: u64,
    j: i64,
    r: &FactoredModulus,
    kind: MultisetKind,
) -> Result<RootMultiset> {
    let n = r.n();
    validate_multiset_args(range, j, n)?;
    let mut counts = vec![0u64; n as usize];
    match kind {
        MultisetKind::Plain => {
            let j_inv = inv_mod(reduce(j, n), n).expect("validated coprime");
            for k in 0..n {
                let class = mul_mod(j_inv, mul_mod(k, k, n), n);
                counts[k as usize] = count_in_class(range, class, n);
            }
        }
        MultisetKind::Difference { h } => {
            let jr = reduce(j, n);
            let hr = reduce(h, n);
            for m in 1..=range {
                let jm = mul_mod(jr, m % n, n);
                let lower = sqrt_mod_all(jm, r);
                if lower.is_empty() {
                    continue;
                }
                let upper = sqrt_mod_all(mul_mod(jr, arith::add_mod(m % n, hr, n), n), r);
                for &kt in &upper.roots {
                    for &k in &lower.roots {
                        counts[arith::sub_mod(kt, k, n) as usize] += 1;
                    }
                }
            }
        }
    }
    Ok(RootMultiset {
        modulus: n,
        range,
        j,
        kind,
        counts,
    })
}

/// Builds the multiset by iterating `m` and reading roots off an
/// exhaustive squaring table. Independent of the Hensel/CRT machinery.
pub fn build_root_multiset_by_enumeration(
    range: u64,
    j: i64,
    table: &SquareTable,
    kind: MultisetKind,
) -> Result<RootMultiset> {
    let n = table.modulus();
    validate_multiset_args(range, j, n)?;
    let mut counts = vec![0u64; n as usize];
    let jr = reduce(j, n);
    for m in 1..=range {
        let jm = mul_mod(jr, m % n, n);
        match kind {
            MultisetKind::Plain => {
                for &k in table.roots(jm) {
                    counts[k as usize] += 1;
                }
            }
            MultisetKind::Difference { h } => {
                let up = mul_mod(jr, arith::add_mod(m % n, reduce(h, n), n), n);
                for &kt in table.roots(up) {
                    for &k in table.roots(jm) {
                        counts[arith::sub_mod(kt as u64, k as u64, n) as usize] += 1;
                    }
                }
            }
        }
    }
    Ok(RootMultiset {
        modulus: n,
        range,
        j,
        kind,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::factorize;
    use proptest::prelude::*;

    fn brute_roots(m: u64, r: u64) -> Vec<u64> {
        (0..r).filter(|&k| k * k % r == m % r).collect()
    }

    #[test]
    fn prime_examples() {
        assert_eq!(sqrt_mod_prime(4, 7).unwrap().roots, vec![2, 5]);
        assert_eq!(sqrt_mod_prime(0, 7).unwrap().roots, vec![0]);
        assert!(sqrt_mod_prime(3, 7).unwrap().is_empty());
        assert!(sqrt_mod_prime(1, 2).is_err());
        assert_eq!(sqrt_mod_prime(1, 9), Err(Error::NotPrime(9)));
    }

    #[test]
    fn tonelli_shanks_on_deep_two_adic_prime() {
        // 65537 − 1 = 2^16
        let p = 65_537;
        for m in [2u64, 3, 5, 1234, 65_536] {
            let roots = sqrt_mod_prime(m, p).unwrap().roots;
            assert_eq!(roots, brute_roots(m, p));
        }
    }

    #[test]
    fn prime_power_examples() {
        assert_eq!(sqrt_mod_prime_power(0, 3, 2).unwrap().roots, vec![0, 3, 6]);
        assert_eq!(
            sqrt_mod_prime_power(1, 2, 3).unwrap().roots,
            vec![1, 3, 5, 7]
        );
        assert!(sqrt_mod_prime_power(2, 3, 2).unwrap().is_empty());
        assert!(sqrt_mod_prime_power(1, 3, 0).is_err());
    }

    #[test]
    fn prime_power_matches_brute_force() {
        for (p, max_e) in [(2u64, 10u32), (3, 6), (5, 4), (7, 3), (11, 3)] {
            for e in 1..=max_e {
                let pe = p.pow(e);
                for m in 0..pe {
                    let got = sqrt_mod_prime_power(m, p, e).unwrap().roots;
                    assert_eq!(got, brute_roots(m, pe), "m = {m}, p^e = {p}^{e}");
                }
            }
        }
    }

    #[test]
    fn composite_examples() {
        let r15 = factorize(15).unwrap();
        assert_eq!(sqrt_mod_all(4, &r15).roots, vec![2, 7, 8, 13]);
        let one = factorize(1).unwrap();
        assert_eq!(sqrt_mod_all(12345, &one).roots, vec![0]);
        let r36 = factorize(36).unwrap();
        let zero = sqrt_mod_all(0, &r36);
        assert_eq!(zero.len(), 6);
        assert!(zero.roots.iter().all(|k| k * k % 36 == 0));
    }

    #[test]
    fn composite_matches_square_table() {
        for r in 1..=600u64 {
            let f = factorize(r).unwrap();
            let table = SquareTable::new(r).unwrap();
            for m in 0..r {
                let got = sqrt_mod_all(m, &f);
                let want: Vec<u64> = table.roots(m).iter().map(|&k| k as u64).collect();
                assert_eq!(got.roots, want, "m = {m}, r = {r}");
                assert!(got.len() as f64 <= root_count_bound(m, &f));
            }
        }
    }

    #[test]
    fn plain_multiset_examples() {
        let r7 = factorize(7).unwrap();
        let a = build_root_multiset(1, 1, &r7, MultisetKind::Plain).unwrap();
        assert_eq!(a.support(), vec![(1, 1), (6, 1)]);
        // R = r includes m = r ≡ 0, whose only root mod 7 is 0.
        let full = build_root_multiset(7, 1, &r7, MultisetKind::Plain).unwrap();
        let table = SquareTable::new(7).unwrap();
        let scanned: u64 = (1..=7u64).map(|m| table.roots(m).len() as u64).sum();
        assert_eq!(full.total_mass(), scanned);
        assert_eq!(full.count(0), 1);
    }

    #[test]
    fn difference_multiset_example() {
        // m = 1 has roots {1, 4} mod 5 and m = 2 has none; with h = 0 the
        // differences k̃ − k over {1,4}² are 0, 3, 2, 0.
        let r5 = factorize(5).unwrap();
        let d = build_root_multiset(2, 1, &r5, MultisetKind::Difference { h: 0 }).unwrap();
        assert_eq!(d.support(), vec![(0, 2), (2, 1), (3, 1)]);
    }

    #[test]
    fn multiset_argument_checks() {
        let r9 = factorize(9).unwrap();
        assert!(matches!(
            build_root_multiset(10, 1, &r9, MultisetKind::Plain),
            Err(Error::RangeExceedsModulus { .. })
        ));
        assert!(matches!(
            build_root_multiset(3, 3, &r9, MultisetKind::Plain),
            Err(Error::NotCoprime { .. })
        ));
        let one = factorize(1).unwrap();
        let a = build_root_multiset(3, 1, &one, MultisetKind::Plain).unwrap();
        assert_eq!(a.count(0), 3);
    }

    #[test]
    fn fast_and_enumerated_multisets_agree() {
        for r in 1..=120u64 {
            let f = factorize(r).unwrap();
            let table = SquareTable::new(r).unwrap();
            for j in (1..r.max(2) as i64)
                .filter(|&j| arith::gcd_signed(j, r) == 1)
                .take(4)
            {
                for range in [1, 2, 5, r].into_iter().filter(|&x| x <= r) {
                    for kind in [
                        MultisetKind::Plain,
                        MultisetKind::Difference { h: 0 },
                        MultisetKind::Difference { h: 1 },
                        MultisetKind::Difference { h: -3 },
                    ] {
                        let fast = build_root_multiset(range, j, &f, kind).unwrap();
                        let slow =
                            build_root_multiset_by_enumeration(range, j, &table, kind).unwrap();
                        assert_eq!(fast, slow, "r = {r}, j = {j}, R = {range}, {kind:?}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn root_sets_are_sorted_and_closed_under_negation(m in 0u64..100_000, r in 1u64..100_000) {
            let f = factorize(r).unwrap();
            let set = sqrt_mod_all(m, &f);
            prop_assert!(set.roots.windows(2).all(|w| w[0] < w[1]));
            for &k in &set.roots {
                prop_assert_eq!(mul_mod(k, k, r), m % r);
                let neg = (r - k) % r;
                prop_assert!(set.roots.binary_search(&neg).is_ok());
            }
            prop_assert!(set.len() as f64 <= root_count_bound(m, &f));
        }

        #[test]
        fn plain_multiset_mass_and_symmetry(r in 1u64..3000, range_frac in 0.0f64..1.0, j_seed in 1i64..1000) {
            let f = factorize(r).unwrap();
            let range = ((r as f64 * range_frac) as u64).clamp(1, r);
            let j = (j_seed..j_seed + 4 * r as i64 + 4)
                .find(|&j| arith::gcd_signed(j, r) == 1)
                .unwrap();
            let a = build_root_multiset(range, j, &f, MultisetKind::Plain).unwrap();
            let expected: u64 = (1..=range)
                .map(|m| sqrt_mod_all(mul_mod(reduce(j, r), m, r), &f).len() as u64)
                .sum();
            prop_assert_eq!(a.total_mass(), expected);
            let cap = range as f64 * f.divisor_count() as f64 * 2f64.powi(f.omega() as i32);
            prop_assert!(a.total_mass() as f64 <= cap);
            for lambda in 0..r {
                prop_assert!(a.count(lambda) <= 1);
                prop_assert_eq!(a.count(lambda), a.count((r - lambda) % r));
            }
        }
    }
}
