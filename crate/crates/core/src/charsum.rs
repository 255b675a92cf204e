//! The complete sum `S₄(j; h⃗)`, weighted square-root energies and the
//! Legendre-symbol sum over the cubic form
//! `e₃(h⃗) = h₁h₂h₃ + h₁h₂h₄ + h₁h₃h₄ + h₂h₃h₄`.
//!
//! Smooth weights are modelled by [`TrigWeight`], a finitely supported set of
//! Fourier coefficients, so that the Poisson-summation step relating the two
//! evaluations of the weighted energy is a finite identity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::{self, GaussEpsilon};
use crate::error::{check_budget, Error, Result};
use crate::expsum::{ExpSumValue, PhaseTable};
use crate::par;

/// Real, even coefficients `ĉ(h)` for `|h| ≤ H`, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigWeight {
    /// `ĉ(0), ĉ(1), …, ĉ(H)`; negative indices mirror these.
    coeffs: Vec<f64>,
}

impl TrigWeight {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("a weight needs at least ĉ(0)"));
        }
        if let Some(c) = coeffs.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::invalid(format!(
                "weight coefficient {c} outside [0, 1]"
            )));
        }
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Ok(TrigWeight { coeffs })
    }

    /// Builds a weight from `ĉ(−H), …, ĉ(H)`, rejecting asymmetric input.
    pub fn from_symmetric(values: &[f64]) -> Result<Self> {
        if values.len() % 2 == 0 {
            return Err(Error::invalid(
                "symmetric weight needs an odd number of entries",
            ));
        }
        let h = values.len() / 2;
        if (0..h).any(|i| values[i] != values[values.len() - 1 - i]) {
            return Err(Error::invalid(
                "weight coefficients must satisfy ĉ(−h) = ĉ(h)",
            ));
        }
        Self::new(values[h..].to_vec())
    }

    /// `ĉ(h) = max(0, 1 − |h|/width)`.
    pub fn fejer(width: f64) -> Result<Self> {
        if width.is_nan() || width <= 0.0 || width.is_infinite() {
            return Err(Error::invalid("Fejér width must be positive"));
        }
        let h_max = width.ceil() as usize;
        Self::new(
            (0..=h_max)
                .map(|h| (1.0 - h as f64 / width).max(0.0))
                .collect(),
        )
    }

    /// Only `ĉ(0) = 1`.
    pub fn constant() -> Self {
        TrigWeight { coeffs: vec![1.0] }
    }

    /// Largest `|h|` with `ĉ(h) ≠ 0` (or 0).
    pub fn h_max(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn coeff(&self, h: i64) -> f64 {
        self.coeffs
            .get(h.unsigned_abs() as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// `Σ_h ĉ(h) e(hy)`.
    pub fn eval(&self, y: f64) -> f64 {
        let tau = std::f64::consts::TAU;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(h, &c)| {
                if h == 0 {
                    c
                } else {
                    2.0 * c * (tau * h as f64 * y).cos()
                }
            })
            .sum()
    }

    /// `Σ_h ĉ(h) e(h·t/r)` with the phase reduced exactly.
    fn eval_residue(&self, t: u64, table: &PhaseTable) -> f64 {
        let r = table.modulus();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(h, &c)| {
                let e = table.get(arith::mul_mod(h as u64 % r, t, r)).re;
                if h == 0 {
                    c
                } else {
                    2.0 * c * e
                }
            })
            .sum()
    }
}

/// Parameters of `S₄(j; h₁, h₂, h₃, h₄)` modulo an odd prime `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct S4Input {
    pub j: i64,
    pub h: [i64; 4],
    pub r: u64,
}

impl S4Input {
    pub fn new(j: i64, h: [i64; 4], r: u64) -> Result<Self> {
        validate_odd_prime(r)?;
        arith::inv_mod_signed(j, r, "j")?;
        Ok(S4Input { j, h, r })
    }
}

fn validate_odd_prime(r: u64) -> Result<()> {
    if r % 2 == 0 {
        return Err(Error::EvenModulus(r));
    }
    if !arith::is_prime(r) {
        return Err(Error::NotPrime(r));
    }
    Ok(())
}

fn legendre(a: i128, r: u64) -> f64 {
    arith::jacobi_unchecked(arith::reduce_i128(a, r), r) as f64
}

/// `Σ_{k₁+k₂≡k₃+k₄} e_r(j̄(h₁k₁² + h₂k₂² + h₃k₃² + h₄k₄²))` by enumerating
/// all `r³` admissible quadruples.
pub fn s4_direct(input: &S4Input, budget: u128) -> Result<ExpSumValue> {
    let r = input.r;
    validate_odd_prime(r)?;
    check_budget((r as u128).pow(3), budget)?;
    let j_inv = arith::inv_mod_signed(input.j, r, "j")?;
    let table = PhaseTable::new(r)?;
    // phase[i][k] = j̄·hᵢ·k² mod r
    let phase: Vec<Vec<u64>> = input
        .h
        .iter()
        .map(|&h| {
            let c = arith::mul_mod(j_inv, arith::reduce(h, r), r);
            (0..r)
                .map(|k| arith::mul_mod(c, arith::mul_mod(k, k, r), r))
                .collect()
        })
        .collect();
    let partial = par::map_range(0, r, |k1| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k2 in 0..r {
            let t12 = arith::add_mod(phase[0][k1 as usize], phase[1][k2 as usize], r);
            let l = arith::add_mod(k1, k2, r);
            for k3 in 0..r {
                let k4 = arith::sub_mod(l, k3, r);
                let t = arith::add_mod(
                    t12,
                    arith::add_mod(phase[2][k3 as usize], phase[3][k4 as usize], r),
                    r,
                );
                acc += table.get(t);
            }
        }
        acc
    });
    Ok(ExpSumValue {
        value: partial.into_iter().sum(),
        terms: r * r * r,
        modulus: r,
        margin: None,
    })
}

struct Pair {
    /// `a₁ ≡ a₂ ≡ 0`.
    gamma: bool,
    /// `0 ≢ a₁ ≡ −a₂`.
    gamma_tilde: bool,
}

fn pair(a1: u64, a2: u64, r: u64) -> Pair {
    Pair {
        gamma: a1 == 0 && a2 == 0,
        gamma_tilde: a1 != 0 && arith::add_mod(a1, a2, r) == 0,
    }
}

/// The closed-form evaluation of `S₄`, valid for every `h⃗`.
///
/// With `s₁₂ = h₁+h₂`, `s₃₄ = h₃+h₄`, `J = (j/r)`, `ε = ε_r`:
///
/// * main term: `ε³r^{3/2}J(e₃/r)` if `s₁₂s₃₄e₃ ≢ 0`, `ε²r²(s₁₂s₃₄/r)` if
///   `s₁₂s₃₄ ≢ 0 ≡ e₃`, else 0;
/// * for each pair, when the other pair is `(0, 0)`: `ε²r²(a₁a₂/r)` if
///   `a₁a₂ ≢ 0`, `εr^{5/2}J(s/r)` if `a₁a₂ ≡ 0 ≢ s`; when the other pair has
///   `0 ≢ a₁ ≡ −a₂`: `εr^{3/2}J(s/r)`;
/// * `r²(r·γ₁₂γ₃₄ + γ̃₁₂γ₃₄ + γ₁₂γ̃₃₄ + γ̃₁₂γ̃₃₄)`.
pub fn s4_closed(input: &S4Input) -> Result<ExpSumValue> {
    let r = input.r;
    validate_odd_prime(r)?;
    arith::inv_mod_signed(input.j, r, "j")?;
    let h: Vec<u64> = input.h.iter().map(|&x| arith::reduce(x, r)).collect();
    let rf = r as f64;
    let eps = GaussEpsilon::for_modulus(r)?;
    let jac = legendre(input.j as i128, r);
    let s12 = arith::add_mod(h[0], h[1], r);
    let s34 = arith::add_mod(h[2], h[3], r);
    let e3 = elementary_cubic(&input.h, r);
    let p12 = pair(h[0], h[1], r);
    let p34 = pair(h[2], h[3], r);

    let mut value = Complex64::new(0.0, 0.0);
    if s12 != 0 && s34 != 0 {
        value += if e3 != 0 {
            eps.pow(3) * rf.powf(1.5) * jac * legendre(e3 as i128, r)
        } else {
            eps.pow(2) * rf * rf * legendre(s12 as i128 * s34 as i128, r)
        };
    }
    let side = |a1: u64, a2: u64, s: u64, other: &Pair| -> Complex64 {
        if s == 0 {
            return Complex64::new(0.0, 0.0);
        }
        if other.gamma {
            let prod = arith::mul_mod(a1, a2, r);
            if prod != 0 {
                eps.pow(2) * rf * rf * legendre(prod as i128, r)
            } else {
                eps.value() * rf.powf(2.5) * jac * legendre(s as i128, r)
            }
        } else if other.gamma_tilde {
            eps.value() * rf.powf(1.5) * jac * legendre(s as i128, r)
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    value += side(h[0], h[1], s12, &p34);
    value += side(h[2], h[3], s34, &p12);
    let deltas = rf * (p12.gamma && p34.gamma) as u8 as f64
        + (p12.gamma_tilde && p34.gamma) as u8 as f64
        + (p12.gamma && p34.gamma_tilde) as u8 as f64
        + (p12.gamma_tilde && p34.gamma_tilde) as u8 as f64;
    value += rf * rf * deltas;
    Ok(ExpSumValue {
        value,
        terms: r * r * r,
        modulus: r,
        margin: None,
    })
}

/// The eight-term simplified display, transcribed literally with `γ̂(a₁, a₂)`
/// meaning `a₁ ≡ −a₂`.
///
/// It matches [`s4_closed`] when `h₁h₂h₃h₄·s₁₂·s₃₄·e₃ ≢ 0`; elsewhere it can
/// drop or double-count terms.
pub fn s4_eight_term(input: &S4Input) -> Result<ExpSumValue> {
    let r = input.r;
    validate_odd_prime(r)?;
    arith::inv_mod_signed(input.j, r, "j")?;
    let h: Vec<u64> = input.h.iter().map(|&x| arith::reduce(x, r)).collect();
    let rf = r as f64;
    let eps = GaussEpsilon::for_modulus(r)?;
    let jac = legendre(input.j as i128, r);
    let ind = |b: bool| b as u8 as f64;
    let p12 = pair(h[0], h[1], r);
    let p34 = pair(h[2], h[3], r);
    let hat12 = arith::add_mod(h[0], h[1], r) == 0;
    let hat34 = arith::add_mod(h[2], h[3], r) == 0;
    let e3 = elementary_cubic(&input.h, r);
    let value = eps.pow(3) * rf.powf(1.5) * jac * legendre(e3 as i128, r)
        + eps.pow(2) * rf * rf * legendre(h[0] as i128 * h[1] as i128, r) * ind(p34.gamma)
        + eps.value()
            * rf.powf(1.5)
            * jac
            * legendre((h[0] + h[1]) as i128, r)
            * ind(p34.gamma_tilde)
        + eps.pow(2) * rf * rf * legendre(h[2] as i128 * h[3] as i128, r) * ind(p12.gamma)
        + eps.value()
            * rf.powf(1.5)
            * jac
            * legendre((h[2] + h[3]) as i128, r)
            * ind(p12.gamma_tilde)
        + Complex64::new(
            rf.powi(3) * ind(p12.gamma && p34.gamma)
                + rf * rf * ind(p12.gamma_tilde && hat34)
                + rf * rf * ind(hat12 && p34.gamma_tilde),
            0.0,
        );
    Ok(ExpSumValue {
        value,
        terms: r * r * r,
        modulus: r,
        margin: None,
    })
}

/// `e₃(h⃗) mod r`.
pub fn elementary_cubic(h: &[i64; 4], r: u64) -> u64 {
    let v: Vec<u64> = h.iter().map(|&x| arith::reduce(x, r)).collect();
    let m = |a: u64, b: u64, c: u64| arith::mul_mod(arith::mul_mod(a, b, r), c, r);
    let mut s = m(v[0], v[1], v[2]);
    s = arith::add_mod(s, m(v[0], v[1], v[3]), r);
    s = arith::add_mod(s, m(v[0], v[2], v[3]), r);
    arith::add_mod(s, m(v[1], v[2], v[3]), r)
}

/// Exact sharp-cutoff energies and both evaluations of the smoothed energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEnergy {
    pub modulus: u64,
    pub range: u64,
    pub j: i64,
    /// `Σ Πφ(j̄kᵢ²/r)` over `k₁+k₂ ≡ k₃+k₄`.
    pub direct: f64,
    /// `ν⁴ Σ_{h⃗} Πĉ(hᵢ) S₄(j; h⃗)` with `ν = R/r`.
    pub poisson: f64,
    pub relative_gap: f64,
    /// Roots with `j̄k² mod r ∈ [1, R]`; for `R = r` this leaves out the
    /// class `k ≡ 0` that the `m ≤ R` definition admits.
    pub e2: u128,
    /// Roots with `‖j̄k²/r‖ ≤ R/r`, including `k ≡ 0`.
    pub e2_prime: u128,
    pub sandwich_holds: bool,
    /// `E₂′ / Ẽ₂`.
    pub prime_over_tilde: f64,
}

fn window_energy(indicator: &[bool], r: u64) -> Result<u128> {
    let support: Vec<u64> = (0..r).filter(|&k| indicator[k as usize]).collect();
    let mut pair_counts = vec![0u128; r as usize];
    for &a in &support {
        for &b in &support {
            pair_counts[arith::add_mod(a, b, r) as usize] += 1;
        }
    }
    pair_counts.iter().try_fold(0u128, |acc, &c| {
        c.checked_mul(c)
            .and_then(|sq| acc.checked_add(sq))
            .ok_or(Error::Overflow("window energy"))
    })
}

/// Work estimate for [`weighted_energy`].
pub fn weighted_energy_cost(r: u64, w: &TrigWeight) -> u128 {
    let side = 2 * w.h_max() as u128 + 1;
    (r as u128 * r as u128).saturating_add(side.pow(4))
}

pub fn weighted_energy(
    range: u64,
    j: i64,
    r: u64,
    w: &TrigWeight,
    budget: u128,
) -> Result<WeightedEnergy> {
    validate_odd_prime(r)?;
    if range == 0 || range > r {
        return Err(Error::RangeExceedsModulus { range, modulus: r });
    }
    let j_inv = arith::inv_mod_signed(j, r, "j")?;
    check_budget(weighted_energy_cost(r, w), budget)?;
    let nu = range as f64 / r as f64;
    let table = PhaseTable::new(r)?;
    let residues: Vec<u64> = (0..r)
        .map(|k| arith::mul_mod(j_inv, arith::mul_mod(k, k, r), r))
        .collect();
    let phi: Vec<f64> = residues
        .iter()
        .map(|&t| nu * w.eval_residue(t, &table))
        .collect();
    let mut conv = vec![0.0f64; r as usize];
    for a in 0..r as usize {
        for b in 0..r as usize {
            conv[(a + b) % r as usize] += phi[a] * phi[b];
        }
    }
    let direct: f64 = conv.iter().map(|c| c * c).sum();

    let h_max = w.h_max();
    let hs: Vec<i64> = (-h_max..=h_max).collect();
    let partial = par::map(&hs, |&h1| -> Result<f64> {
        let mut acc = 0.0;
        let c1 = w.coeff(h1);
        for &h2 in &hs {
            let c2 = c1 * w.coeff(h2);
            for &h3 in &hs {
                let c3 = c2 * w.coeff(h3);
                for &h4 in &hs {
                    let c = c3 * w.coeff(h4);
                    if c == 0.0 {
                        continue;
                    }
                    acc += c * s4_closed(&S4Input {
                        j,
                        h: [h1, h2, h3, h4],
                        r,
                    })?
                    .value
                    .re;
                }
            }
        }
        Ok(acc)
    });
    let mut poisson = 0.0;
    for p in partial {
        poisson += p?;
    }
    poisson *= nu.powi(4);

    let in_fraction: Vec<bool> = residues.iter().map(|&t| t >= 1 && t <= range).collect();
    let in_distance: Vec<bool> = residues.iter().map(|&t| t.min(r - t) <= range).collect();
    let e2 = window_energy(&in_fraction, r)?;
    let e2_prime = window_energy(&in_distance, r)?;
    Ok(WeightedEnergy {
        modulus: r,
        range,
        j,
        direct,
        poisson,
        relative_gap: (direct - poisson).abs() / direct.abs().max(f64::MIN_POSITIVE),
        e2,
        e2_prime,
        sandwich_holds: e2 <= e2_prime,
        prime_over_tilde: e2_prime as f64 / direct,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicFormReport {
    pub modulus: u64,
    pub m: u64,
    pub value: f64,
    pub terms: u64,
    /// `M^{1/2}r^{3/2} + M²r^{1/2} + M³`.
    pub bound: f64,
    pub margin: f64,
    /// `r^{7/4}`, reported when `M = ⌊√r⌋`.
    pub corollary_bound: Option<f64>,
    pub corollary_margin: Option<f64>,
}

pub fn cubic_form_bound(m: u64, r: u64) -> f64 {
    let (m, r) = (m as f64, r as f64);
    m.sqrt() * r.powf(1.5) + m * m * r.sqrt() + m.powi(3)
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

/// `Σ_{h⃗} Πĉ(hᵢ)·(e₃(h⃗)/r)` where `w` already carries the scale `M`.
pub fn cubic_form_charsum(m: u64, r: u64, w: &TrigWeight, budget: u128) -> Result<CubicFormReport> {
    validate_odd_prime(r)?;
    if m == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    let h_max = w.h_max();
    let side = 2 * h_max as u128 + 1;
    check_budget(side.pow(4), budget)?;
    let hs: Vec<i64> = (-h_max..=h_max).collect();
    let partial = par::map(&hs, |&h1| {
        let mut acc = 0.0;
        let mut terms = 0u64;
        let c1 = w.coeff(h1);
        for &h2 in &hs {
            let c2 = c1 * w.coeff(h2);
            for &h3 in &hs {
                let c3 = c2 * w.coeff(h3);
                for &h4 in &hs {
                    let c = c3 * w.coeff(h4);
                    if c == 0.0 {
                        continue;
                    }
                    let e3 = elementary_cubic(&[h1, h2, h3, h4], r);
                    acc += c * legendre(e3 as i128, r);
                    terms += 1;
                }
            }
        }
        (acc, terms)
    });
    let (value, terms) = partial
        .into_iter()
        .fold((0.0, 0), |(s, t), (a, b)| (s + a, t + b));
    let bound = cubic_form_bound(m, r);
    let corollary_bound = (m == isqrt(r)).then(|| (r as f64).powf(1.75));
    Ok(CubicFormReport {
        modulus: r,
        m,
        value,
        terms,
        bound,
        margin: value.abs() / bound,
        corollary_bound,
        corollary_margin: corollary_bound.map(|b| value.abs() / b),
    })
}

/// `E₂(R; j, r)` against `R⁴/r + R² + r^{3/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTheoremCheck {
    pub modulus: u64,
    pub range: u64,
    pub j: i64,
    pub e2: u128,
    pub bound: f64,
    pub constant: f64,
}

pub fn energy_theorem_check(range: u64, j: i64, r: u64) -> Result<EnergyTheoremCheck> {
    validate_odd_prime(r)?;
    let f = arith::factorize(r)?;
    let e2 = crate::energy::energy_e2(range, j, &f, crate::energy::Method::Convolution)?.energy;
    let (rr, rf) = (range as f64, r as f64);
    let bound = rr.powi(4) / rf + rr * rr + rf.powf(1.5);
    Ok(EnergyTheoremCheck {
        modulus: r,
        range,
        j,
        e2,
        bound,
        constant: e2 as f64 / bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn s4_zero_shift() {
        for r in [3u64, 5, 7, 11] {
            let inp = S4Input::new(1, [0, 0, 0, 0], r).unwrap();
            let d = s4_direct(&inp, u128::MAX).unwrap();
            assert!(close(
                d.value,
                Complex64::new((r * r * r) as f64, 0.0),
                1e-9
            ));
            let c = s4_closed(&inp).unwrap();
            assert!(close(c.value, d.value, 1e-9));
        }
    }

    #[test]
    fn s4_small_examples() {
        // r = 3, h = (1, 0, 0, 0): only k₁ carries a phase and (k₂, k₃) are
        // free, so S₄ = 9·G(3; 1, 0) = 9i√3.
        let inp = S4Input::new(1, [1, 0, 0, 0], 3).unwrap();
        let d = s4_direct(&inp, u128::MAX).unwrap();
        assert!(close(d.value, Complex64::new(0.0, 9.0 * 3f64.sqrt()), 1e-9));
        assert!(close(s4_closed(&inp).unwrap().value, d.value, 1e-9));
        let inp = S4Input::new(2, [1, 1, 1, 1], 5).unwrap();
        let d = s4_direct(&inp, u128::MAX).unwrap();
        assert!(close(s4_closed(&inp).unwrap().value, d.value, 1e-9));
        let inp = S4Input::new(1, [1, 2, 3, 4], 7).unwrap();
        let d = s4_direct(&inp, u128::MAX).unwrap();
        assert!(close(s4_closed(&inp).unwrap().value, d.value, 1e-9));
        let inp = S4Input::new(1, [1, -1, 2, -2], 5).unwrap();
        let d = s4_direct(&inp, u128::MAX).unwrap();
        assert!(close(s4_closed(&inp).unwrap().value, d.value, 1e-9));
    }

    #[test]
    fn s4_closed_full_sweep() {
        for r in [3u64, 5, 7, 11, 13] {
            for j in 1..r as i64 {
                if j > 2 {
                    break;
                }
                for idx in 0..r.pow(4) {
                    let h = [
                        (idx % r) as i64,
                        (idx / r % r) as i64,
                        (idx / r / r % r) as i64,
                        (idx / r / r / r) as i64,
                    ];
                    let inp = S4Input::new(j, h, r).unwrap();
                    let d = s4_direct(&inp, u128::MAX).unwrap();
                    let c = s4_closed(&inp).unwrap();
                    assert!(
                        close(c.value, d.value, 1e-9 * (r * r * r) as f64),
                        "r={r} j={j} h={h:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn eight_term_agrees_only_generically() {
        let mut disagreements = 0;
        for r in [5u64, 7] {
            for idx in 0..r.pow(4) {
                let h = [
                    (idx % r) as i64,
                    (idx / r % r) as i64,
                    (idx / r / r % r) as i64,
                    (idx / r / r / r) as i64,
                ];
                let inp = S4Input::new(1, h, r).unwrap();
                let c = s4_closed(&inp).unwrap().value;
                let e = s4_eight_term(&inp).unwrap().value;
                let generic = h.iter().all(|&x| x != 0)
                    && (h[0] + h[1]) as u64 % r != 0
                    && (h[2] + h[3]) as u64 % r != 0
                    && elementary_cubic(&h, r) != 0;
                if generic {
                    assert!(close(c, e, 1e-9));
                } else if !close(c, e, 1e-9) {
                    disagreements += 1;
                }
            }
        }
        assert!(disagreements > 0);
        // γ̃₁₂γ̃₃₄ is counted twice by the display
        let inp = S4Input::new(1, [1, -1, 2, -2], 5).unwrap();
        let gap = s4_eight_term(&inp).unwrap().value - s4_closed(&inp).unwrap().value;
        assert!(close(gap, Complex64::new(25.0, 0.0), 1e-9));
    }

    #[test]
    fn s4_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for r in [7u64, 11, 13] {
            for _ in 0..20 {
                let h: [i64; 4] = std::array::from_fn(|_| rng.gen_range(0..r as i64));
                let j = rng.gen_range(1..r as i64);
                let base = s4_direct(&S4Input::new(j, h, r).unwrap(), u128::MAX)
                    .unwrap()
                    .value;
                let swap12 = s4_direct(
                    &S4Input::new(j, [h[1], h[0], h[2], h[3]], r).unwrap(),
                    u128::MAX,
                )
                .unwrap()
                .value;
                let swap34 = s4_direct(
                    &S4Input::new(j, [h[0], h[1], h[3], h[2]], r).unwrap(),
                    u128::MAX,
                )
                .unwrap()
                .value;
                let swap_pairs = s4_direct(
                    &S4Input::new(j, [h[2], h[3], h[0], h[1]], r).unwrap(),
                    u128::MAX,
                )
                .unwrap()
                .value;
                let tol = 1e-9 * (r * r * r) as f64;
                assert!(close(base, swap12, tol));
                assert!(close(base, swap34, tol));
                assert!(close(base, swap_pairs, tol));
                let neg = s4_direct(&S4Input::new(j, h.map(|x| -x), r).unwrap(), u128::MAX)
                    .unwrap()
                    .value;
                assert!(close(base, neg.conj(), tol));
            }
        }
    }

    #[test]
    fn s4_argument_errors() {
        assert_eq!(S4Input::new(1, [0; 4], 9), Err(Error::NotPrime(9)));
        assert_eq!(S4Input::new(1, [0; 4], 2), Err(Error::EvenModulus(2)));
        assert!(matches!(
            S4Input::new(7, [0; 4], 7),
            Err(Error::NotCoprime { .. })
        ));
        let inp = S4Input {
            j: 1,
            h: [0; 4],
            r: 151,
        };
        assert!(matches!(
            s4_direct(&inp, 1_000_000),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn weights() {
        let f = TrigWeight::fejer(3.0).unwrap();
        assert_eq!(f.h_max(), 2);
        assert!((f.coeff(-1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.coeff(3), 0.0);
        for y in [0.0, 0.1, 0.37, 0.5] {
            let expand: f64 = (-2..=2)
                .map(|h| f.coeff(h) * (std::f64::consts::TAU * h as f64 * y).cos())
                .sum();
            assert!((f.eval(y) - expand).abs() < 1e-12);
        }
        assert!(TrigWeight::from_symmetric(&[0.5, 1.0, 0.25]).is_err());
        assert!(TrigWeight::new(vec![1.5]).is_err());
        assert_eq!(
            TrigWeight::from_symmetric(&[0.5, 1.0, 0.5])
                .unwrap()
                .coeff(1),
            0.5
        );
    }

    #[test]
    fn weighted_energy_examples() {
        let c = weighted_energy(2, 1, 5, &TrigWeight::constant(), u128::MAX).unwrap();
        let expect = (2.0f64 / 5.0).powi(4) * 125.0;
        assert!((c.direct - expect).abs() < 1e-9);
        assert!((c.poisson - expect).abs() < 1e-9);
        let f = weighted_energy(2, 1, 5, &TrigWeight::fejer(3.0).unwrap(), u128::MAX).unwrap();
        assert!(f.relative_gap < 1e-9, "{f:?}");
    }

    #[test]
    fn poisson_identity_sweep() {
        for r in [3u64, 7, 13, 31, 61] {
            for range in [1, r / 3 + 1, r] {
                for width in [1.0, 2.5, 5.0] {
                    let w = TrigWeight::fejer(width).unwrap();
                    for j in [1i64, 2] {
                        let rep = weighted_energy(range, j, r, &w, u128::MAX).unwrap();
                        assert!(
                            rep.relative_gap < 1e-6,
                            "r={r} R={range} w={width}: {rep:?}"
                        );
                        assert!(rep.sandwich_holds);
                    }
                }
            }
        }
    }

    #[test]
    fn sharp_energy_matches_energy_module() {
        for r in [5u64, 11, 29] {
            let f = arith::factorize(r).unwrap();
            for range in 1..r.min(9) {
                for j in 1..4i64 {
                    let ours =
                        weighted_energy(range, j, r, &TrigWeight::constant(), u128::MAX).unwrap();
                    let e = crate::energy::energy_e2(range, j, &f, crate::energy::Method::Brute)
                        .unwrap();
                    assert_eq!(ours.e2, e.energy);
                }
            }
        }
    }

    #[test]
    fn cubic_examples() {
        let w = TrigWeight::fejer(2.0).unwrap();
        let rep = cubic_form_charsum(1, 7, &w, u128::MAX).unwrap();
        let mut expect = 0.0;
        for h1 in -1..=1i64 {
            for h2 in -1..=1i64 {
                for h3 in -1..=1i64 {
                    for h4 in -1..=1i64 {
                        let c: f64 = [h1, h2, h3, h4].iter().map(|&h| w.coeff(h)).product();
                        let e3 = h1 * h2 * h3 + h1 * h2 * h4 + h1 * h3 * h4 + h2 * h3 * h4;
                        expect += c * arith::jacobi(e3, 7).unwrap() as f64;
                    }
                }
            }
        }
        assert!((rep.value - expect).abs() < 1e-12);
        assert_eq!(rep.terms, 81);
        assert!(rep.corollary_bound.is_none());
        let rep =
            cubic_form_charsum(10, 101, &TrigWeight::fejer(10.0).unwrap(), u128::MAX).unwrap();
        assert!((rep.corollary_bound.unwrap() - 101f64.powf(1.75)).abs() < 1e-6);
        assert!(rep.margin.is_finite());
        assert!(cubic_form_charsum(10, 101, &TrigWeight::fejer(10.0).unwrap(), 100).is_err());
    }

    #[test]
    fn energy_theorem_monitor() {
        let c = energy_theorem_check(10, 1, 101).unwrap();
        assert_eq!(c.bound, 1e4 / 101.0 + 100.0 + 101f64.powf(1.5));
        assert!(c.constant > 0.0 && c.constant.is_finite());
    }
}
