//! Exact character values in Q(zeta_8, zeta_p, zeta_{p^2}, ...).
//!
//! Every value the additive characters and Weil indices produce lives in the
//! union of the fields Q(zeta_{8 p^m}). A value is stored as a rational
//! combination of basis roots `zeta_8^i * zeta_{p^m}^a` with `0 <= i < 4`
//! (since `zeta_8^4 = -1`) and `a/p^m` a reduced fraction whose top base-p
//! digit is at most `p - 2` (the relation `Phi_{p^m}(zeta_{p^m}) = 0` rewrites
//! the excluded digit). The basis is independent of the conductor, so values
//! of different level compare by literal equality of their term maps.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::padic::{pow_u64, PAdicScalar};
use crate::{Error, Result};

/// Basis root `zeta_8^eighth * zeta_{p^pm}^pa`; `pm = 0` forces `pa = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RootKey {
    pub eighth: u8,
    pub pm: u32,
    pub pa: u64,
}

const RATIONAL_KEY: RootKey = RootKey { eighth: 0, pm: 0, pa: 0 };

/// Element of Q(zeta_8, zeta_{p^inf}) in canonical form.
#[derive(Clone, Debug, PartialEq)]
pub struct CyclotomicValue {
    prime: u64,
    terms: BTreeMap<RootKey, BigRational>,
}

impl CyclotomicValue {
    pub fn zero(prime: u64) -> Self {
        CyclotomicValue { prime, terms: BTreeMap::new() }
    }

    pub fn one(prime: u64) -> Self {
        Self::from_rational(prime, BigRational::one())
    }

    pub fn from_rational(prime: u64, r: BigRational) -> Self {
        let mut v = Self::zero(prime);
        v.push_term(0, 0, 0, r);
        v
    }

    pub fn from_integer(prime: u64, n: i64) -> Self {
        Self::from_rational(prime, BigRational::from(BigInt::from(n)))
    }

    /// `zeta_{p^m}^a`.
    pub fn root_p(prime: u64, a: i128, m: u32) -> Self {
        let mut v = Self::zero(prime);
        let md = pow_u64(prime, m) as i128;
        let a = a.rem_euclid(md) as u64;
        v.push_term(0, m, a, BigRational::one());
        v
    }

    /// `zeta_8^i`.
    pub fn root8(prime: u64, i: i64) -> Self {
        let mut v = Self::zero(prime);
        v.push_term(i.rem_euclid(8) as u64, 0, 0, BigRational::one());
        v
    }

    /// `e^{2 pi i num/den}` where `den` divides `8 p^m` for some m.
    pub fn root(prime: u64, num: i128, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidInput("root with zero denominator".into()));
        }
        let mut two = 0u32;
        let mut f = 0u32;
        let mut d = den;
        while d % 2 == 0 {
            two += 1;
            d /= 2;
        }
        while d % prime as u64 == 0 {
            f += 1;
            d /= prime;
        }
        if d != 1 || two > 3 {
            return Err(Error::InvalidInput(format!(
                "denominator {} is not of the form 2^e p^f with e <= 3",
                den
            )));
        }
        let num = num.rem_euclid(den as i128) as u64;
        // split num/den into x/2^e + y/p^f mod 1
        let de2 = 1u64 << two;
        let dep = pow_u64(prime, f);
        let x = if two == 0 {
            0
        } else {
            // num * inv(dep) mod 2^e
            let mut inv = 1u64;
            for cand in 0..de2 {
                if (cand * (dep % de2)) % de2 == 1 % de2 {
                    inv = cand;
                    break;
                }
            }
            (num % de2) * inv % de2
        };
        let y = if f == 0 {
            0
        } else {
            let inv;
            let m = dep as u128;
            // inverse of 2^e mod p^f by Fermat-Euler on small modulus
            let base = (de2 as u128) % m;
            let phi = (dep / prime) * (prime - 1);
            let mut acc = 1u128;
            let mut b = base;
            let mut e = phi - 1;
            while e > 0 {
                if e & 1 == 1 {
                    acc = acc * b % m;
                }
                b = b * b % m;
                e >>= 1;
            }
            inv = acc;
            ((num as u128 % m) * inv % m) as u64
        };
        let mut v = Self::zero(prime);
        v.push_term(x * (8 / de2), f, y, BigRational::one());
        Ok(v)
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &BTreeMap<RootKey, BigRational> {
        &self.terms
    }

    /// The rational number this value equals, if it is rational.
    pub fn to_rational(&self) -> Option<BigRational> {
        if self.terms.is_empty() {
            return Some(BigRational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&RATIONAL_KEY) {
                return Some(c.clone());
            }
        }
        None
    }

    /// Insert `c * zeta_8^i8 * zeta_{p^m}^a` and restore canonical form.
    fn push_term(&mut self, i8exp: u64, m: u32, a: u64, c: BigRational) {
        if c.is_zero() {
            return;
        }
        // sign from the eighth root
        let mut i8exp = i8exp % 8;
        let mut c = c;
        if i8exp >= 4 {
            i8exp -= 4;
            c = -c;
        }
        // reduce the p-part fraction
        let mut m = m;
        let mut a = a % pow_u64(self.prime, m);
        while m > 0 && a % self.prime == 0 {
            a /= self.prime;
            m -= 1;
        }
        if m == 0 {
            a = 0;
        }
        // excluded top digit: expand via the cyclotomic relation
        if m > 0 {
            let top = a / pow_u64(self.prime, m - 1);
            if top == self.prime - 1 {
                let b = a % pow_u64(self.prime, m - 1);
                for j in 0..self.prime - 1 {
                    self.push_term(i8exp, m, j * pow_u64(self.prime, m - 1) + b, -c.clone());
                }
                return;
            }
        }
        let key = RootKey { eighth: i8exp as u8, pm: m, pa: a };
        let entry = self.terms.entry(key).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    fn check_prime(&self, other: &Self) {
        assert_eq!(self.prime, other.prime, "mixed primes in cyclotomic arithmetic");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_prime(other);
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.push_term(k.eighth as u64, k.pm, k.pa, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        CyclotomicValue {
            prime: self.prime,
            terms: self.terms.iter().map(|(k, c)| (*k, -c.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        if r.is_zero() {
            return Self::zero(self.prime);
        }
        CyclotomicValue {
            prime: self.prime,
            terms: self.terms.iter().map(|(k, c)| (*k, c * r)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_prime(other);
        let mut out = Self::zero(self.prime);
        for (k1, c1) in &self.terms {
            for (k2, c2) in &other.terms {
                let i8exp = k1.eighth as u64 + k2.eighth as u64;
                let m = k1.pm.max(k2.pm);
                let md = pow_u64(self.prime, m) as u128;
                let a = (k1.pa as u128 * pow_u64(self.prime, m - k1.pm) as u128
                    + k2.pa as u128 * pow_u64(self.prime, m - k2.pm) as u128)
                    % md;
                out.push_term(i8exp, m, a as u64, c1 * c2);
            }
        }
        out
    }

    /// Complex conjugate: every root goes to its inverse.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero(self.prime);
        for (k, c) in &self.terms {
            let i8exp = (8 - k.eighth as u64) % 8;
            let md = pow_u64(self.prime, k.pm);
            let a = (md - k.pa) % md;
            out.push_term(i8exp, k.pm, a, c.clone());
        }
        out
    }

    /// Numerical projection under `zeta_n -> e^{2 pi i / n}`.
    pub fn approx(&self) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (k, c) in &self.terms {
            let cf = c.to_f64().unwrap_or(f64::NAN);
            let angle = 2.0 * std::f64::consts::PI
                * (k.eighth as f64 / 8.0 + k.pa as f64 / pow_u64(self.prime, k.pm) as f64);
            re += cf * angle.cos();
            im += cf * angle.sin();
        }
        (re, im)
    }

    pub fn approx_abs(&self) -> f64 {
        let (re, im) = self.approx();
        (re * re + im * im).sqrt()
    }

    /// Distance `|self - other|` after numerical projection.
    pub fn approx_distance(&self, other: &Self) -> f64 {
        self.sub(other).approx_abs()
    }

    /// The positive square root of `p` as an exact value, via the quadratic
    /// Gauss sum `sum_a (a|p) zeta_p^a` (multiplied by `-i` when `p = 3 mod 4`).
    pub fn sqrt_p(prime: u64) -> Self {
        let mut g = Self::zero(prime);
        for a in 1..prime {
            let ls = legendre(a, prime);
            g.push_term(0, 1, a, BigRational::from(BigInt::from(ls)));
        }
        if prime % 4 == 3 {
            g = g.mul(&Self::root8(prime, 6));
        }
        g
    }

    /// Exact square root of a positive rational of the form `s^2 * p^e`.
    pub fn sqrt_of_rational(prime: u64, r: &BigRational) -> Result<Self> {
        if r.is_negative() || r.is_zero() {
            return Err(Error::InvalidInput("square root of a non-positive rational".into()));
        }
        let p = BigInt::from(prime);
        let mut num = r.numer().clone();
        let mut den = r.denom().clone();
        let mut e: i64 = 0;
        while (&num % &p).is_zero() {
            num /= &p;
            e += 1;
        }
        while (&den % &p).is_zero() {
            den /= &p;
            e -= 1;
        }
        let ns = num.sqrt();
        let ds = den.sqrt();
        if &ns * &ns != num || &ds * &ds != den {
            return Err(Error::InvalidInput(format!(
                "{} is not of the form s^2 * p^e",
                r
            )));
        }
        let mut s = BigRational::new(ns, ds);
        // fold even powers of p into s
        let half = e.div_euclid(2);
        let odd = e.rem_euclid(2) == 1;
        if half >= 0 {
            s *= BigRational::from(p.pow(half as u32));
        } else {
            s /= BigRational::from(p.pow((-half) as u32));
        }
        let mut out = Self::from_rational(prime, s);
        if odd {
            out = out.mul(&Self::sqrt_p(prime));
        }
        Ok(out)
    }
}

/// Legendre symbol `(a|p)` for odd prime p, as -1, 0, 1.
pub fn legendre(a: u64, prime: u64) -> i64 {
    let a = a % prime;
    if a == 0 {
        return 0;
    }
    let mut acc = 1u64;
    let mut b = a;
    let mut e = (prime - 1) / 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % prime;
        }
        b = b * b % prime;
        e >>= 1;
    }
    if acc == 1 {
        1
    } else {
        -1
    }
}

impl fmt::Display for CyclotomicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", c)?;
            if k.eighth != 0 {
                write!(f, " z8^{}", k.eighth)?;
            }
            if k.pm != 0 {
                write!(f, " z{}^{}", pow_u64(self.prime, k.pm), k.pa)?;
            }
        }
        Ok(())
    }
}

/// The standard additive character of Q_p: trivial on Z_p, and on `x` with
/// `v(x) = -m < 0` equal to `zeta_{p^m}^u` where `u` is the unit part mod p^m.
/// Z_p^n is its own dual lattice under the induced pairing.
#[derive(Clone, Copy, Debug)]
pub struct AdditiveCharacter {
    prime: u64,
}

impl AdditiveCharacter {
    pub fn new(prime: u64) -> Self {
        AdditiveCharacter { prime }
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn eval(&self, x: &PAdicScalar) -> Result<CyclotomicValue> {
        assert_eq!(x.prime(), self.prime, "character and scalar prime differ");
        // a certified integral scalar pairs to 1 even when its exact
        // valuation is unknown after cancellation
        if x.valuation_bound() >= 0 {
            return Ok(CyclotomicValue::one(self.prime));
        }
        match x.valuation() {
            Err(e) => Err(e),
            Ok(None) => Ok(CyclotomicValue::one(self.prime)),
            Ok(Some(v)) if v >= 0 => Ok(CyclotomicValue::one(self.prime)),
            Ok(Some(v)) => {
                let m = (-v) as u32;
                // fractional part: unit mod p^m over p^m
                let u = x.shifted_code(m as i64, m)?;
                Ok(CyclotomicValue::root_p(self.prime, u as i128, m))
            }
        }
    }

    /// `x -> eval(a * x)`, the character twisted by `a`.
    pub fn eval_scaled(&self, a: &PAdicScalar, x: &PAdicScalar) -> Result<CyclotomicValue> {
        self.eval(&a.mul(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn full_orbit_sums_vanish() {
        for p in [3u64, 5, 7] {
            let mut s = CyclotomicValue::zero(p);
            for a in 0..p {
                s = s.add(&CyclotomicValue::root_p(p, a as i128, 1));
            }
            assert!(s.is_zero(), "sum of all p-th roots must vanish, p={}", p);
        }
    }

    #[test]
    fn eighth_roots_know_i() {
        let i = CyclotomicValue::root8(5, 2);
        let m1 = i.mul(&i);
        assert_eq!(m1, CyclotomicValue::from_integer(5, -1));
        assert!(i.mul(&i.conj()).to_rational().unwrap().is_one());
    }

    #[test]
    fn root_multiplication_is_homomorphic() {
        // zeta_25^7 * zeta_25^21 = zeta_25^28 = zeta_25^3
        let a = CyclotomicValue::root_p(5, 7, 2);
        let b = CyclotomicValue::root_p(5, 21, 2);
        assert_eq!(a.mul(&b), CyclotomicValue::root_p(5, 3, 2));
        // across conductors: zeta_5^2 * zeta_25^5 = zeta_25^15 = zeta_5^3
        let c = CyclotomicValue::root_p(5, 2, 1);
        let d = CyclotomicValue::root_p(5, 5, 2);
        assert_eq!(c.mul(&d), CyclotomicValue::root_p(5, 3, 1));
    }

    #[test]
    fn canonical_form_is_conductor_free() {
        // zeta_25^5 must compare equal to zeta_5 built directly
        assert_eq!(
            CyclotomicValue::root_p(5, 5, 2),
            CyclotomicValue::root_p(5, 1, 1)
        );
    }

    #[test]
    fn float_projection_matches_unit_circle() {
        let z = CyclotomicValue::root_p(5, 1, 1);
        let (re, im) = z.approx();
        let t = 2.0 * std::f64::consts::PI / 5.0;
        assert!((re - t.cos()).abs() < 1e-12);
        assert!((im - t.sin()).abs() < 1e-12);
        let w = CyclotomicValue::root(7, 3, 56).unwrap();
        let (re, im) = w.approx();
        let t = 2.0 * std::f64::consts::PI * 3.0 / 56.0;
        assert!((re - t.cos()).abs() < 1e-12);
        assert!((im - t.sin()).abs() < 1e-12);
    }

    #[test]
    fn gauss_sum_square_roots() {
        for p in [3u64, 5, 7, 11] {
            let s = CyclotomicValue::sqrt_p(p);
            let sq = s.mul(&s).to_rational().expect("square must be rational");
            assert_eq!(sq, BigRational::from(BigInt::from(p)));
            // and it is the positive root
            let (re, im) = s.approx();
            assert!(im.abs() < 1e-9);
            assert!((re - (p as f64).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn sqrt_of_rational_splits_square_times_p() {
        let r = rat(4 * 125, 9);
        let s = CyclotomicValue::sqrt_of_rational(5, &r).unwrap();
        assert_eq!(s.mul(&s).to_rational().unwrap(), r);
        assert!(CyclotomicValue::sqrt_of_rational(5, &rat(3, 1)).is_err());
    }

    #[test]
    fn standard_character_values() {
        let chi = AdditiveCharacter::new(5);
        let x = PAdicScalar::from_rational(3, 25, 5, 12).unwrap();
        // frac(3/25) = 3/25
        assert_eq!(chi.eval(&x).unwrap(), CyclotomicValue::root_p(5, 3, 2));
        let y = PAdicScalar::from_rational(7, 1, 5, 12).unwrap();
        assert!(chi.eval(&y).unwrap().to_rational().unwrap().is_one());
        // character is additive: chi(x + z) = chi(x) chi(z)
        let z = PAdicScalar::from_rational(2, 5, 5, 12).unwrap();
        let lhs = chi.eval(&x.add(&z)).unwrap();
        let rhs = chi.eval(&x).unwrap().mul(&chi.eval(&z).unwrap());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn character_orthogonality_on_shells() {
        // sum over u in p^-1 Z/Z of chi(u) = 0; over Z/Z it is 1
        let chi = AdditiveCharacter::new(7);
        let mut s = CyclotomicValue::zero(7);
        for c in 0..7u64 {
            let x = PAdicScalar::from_code(c, 1, 7, 12);
            s = s.add(&chi.eval(&x).unwrap());
        }
        assert!(s.is_zero());
    }
}
