//! Scalars of Q_p at bounded precision.
//!
//! A nonzero scalar is `p^v * u` with `u` a unit known modulo `p^k`; the
//! digit count `k` is the precision. Zero is a tagged sentinel: `exact` zero
//! has infinite valuation, while a zero produced by catastrophic cancellation
//! remembers that its valuation is merely unknown, and asking for it is an
//! error rather than a wrong answer.
//!
//! Units are stored in a `u64`, so the precision cap per prime is the largest
//! `k` with `p^k <= u64::MAX`; products go through `u128` and cannot overflow.

use std::fmt;

use num::{BigInt, BigRational, One, Zero as NumZero};

use crate::{Error, Result};

/// Largest `k` with `p^k <= u64::MAX`.
pub fn max_precision(prime: u64) -> u32 {
    let mut k = 0u32;
    let mut acc: u128 = 1;
    loop {
        acc *= prime as u128;
        if acc > u64::MAX as u128 {
            return k;
        }
        k += 1;
    }
}

/// `p^k` as `u64`; panics if it overflows (callers stay under `max_precision`).
pub fn pow_u64(prime: u64, k: u32) -> u64 {
    let mut acc: u128 = 1;
    for _ in 0..k {
        acc *= prime as u128;
        assert!(acc <= u64::MAX as u128, "p^k overflows u64");
    }
    acc as u64
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a, m);
        }
        a = mul_mod(a, a, m);
        e >>= 1;
    }
    acc
}

/// Inverse of a unit modulo `p^k`, via Euler's theorem.
fn inv_mod_ppow(a: u64, prime: u64, k: u32) -> u64 {
    let m = pow_u64(prime, k);
    // phi(p^k) = p^{k-1}(p-1)
    let phi = pow_u64(prime, k - 1) * (prime - 1);
    pow_mod(a, phi - 1, m)
}

#[derive(Clone, Debug)]
enum Repr {
    /// `bound` is a certified lower bound on the valuation: the value is known
    /// to be divisible by p^bound. Exact zero carries `i64::MAX`.
    Zero { exact: bool, bound: i64 },
    Term { val: i64, unit: u64, prec: u32 },
}

/// Element of Q_p known to finitely many digits.
#[derive(Clone, Debug)]
pub struct PAdicScalar {
    prime: u64,
    repr: Repr,
}

impl PAdicScalar {
    /// The exact zero of Q_p.
    pub fn zero(prime: u64) -> Self {
        PAdicScalar {
            prime,
            repr: Repr::Zero { exact: true, bound: i64::MAX },
        }
    }

    pub fn one(prime: u64, prec: u32) -> Self {
        Self::from_integer(1, prime, prec)
    }

    /// `p^e` as a scalar.
    pub fn uniformizer_pow(e: i64, prime: u64, prec: u32) -> Self {
        PAdicScalar {
            prime,
            repr: Repr::Term {
                val: e,
                unit: 1,
                prec: prec.min(max_precision(prime)),
            },
        }
    }

    pub fn from_integer(n: i128, prime: u64, prec: u32) -> Self {
        Self::from_rational(n, 1, prime, prec).expect("denominator is 1")
    }

    /// Exact image of `num/den` in Q_p at precision `prec` digits.
    pub fn from_rational(num: i128, den: i128, prime: u64, prec: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::DivisionByZero("rational with zero denominator".into()));
        }
        if num == 0 {
            return Ok(Self::zero(prime));
        }
        let prec = prec.min(max_precision(prime));
        if prec == 0 {
            return Err(Error::WindowOutOfRange("precision 0".into()));
        }
        let neg = (num < 0) != (den < 0);
        let mut num = num.unsigned_abs();
        let mut den = den.unsigned_abs();
        let p = prime as u128;
        let mut val: i64 = 0;
        while num % p == 0 {
            num /= p;
            val += 1;
        }
        while den % p == 0 {
            den /= p;
            val -= 1;
        }
        let m = pow_u64(prime, prec) as u128;
        let nu = (num % m) as u64;
        let du = (den % m) as u64;
        let mut unit = mul_mod(nu, inv_mod_ppow(du, prime, prec), m as u64);
        if neg {
            unit = (m as u64 - unit) % m as u64;
        }
        Ok(PAdicScalar {
            prime,
            repr: Repr::Term { val, unit, prec },
        })
    }

    /// Reinterpret an integer code `c` as `c * p^{-shift}`.
    pub fn from_code(code: u64, shift: i64, prime: u64, prec: u32) -> Self {
        match Self::from_rational(code as i128, 1, prime, prec) {
            Ok(x) => x.mul(&Self::uniformizer_pow(-shift, prime, prec)),
            Err(_) => unreachable!(),
        }
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { .. })
    }

    /// Valuation; `None` encodes the infinite valuation of exact zero.
    pub fn valuation(&self) -> Result<Option<i64>> {
        match &self.repr {
            Repr::Zero { exact: true, .. } => Ok(None),
            Repr::Zero { exact: false, .. } => Err(Error::PrecisionExhausted(
                "valuation of a cancelled scalar is unknown".into(),
            )),
            Repr::Term { val, .. } => Ok(Some(*val)),
        }
    }

    /// Certified lower bound on the valuation; `i64::MAX` for exact zero.
    pub fn valuation_bound(&self) -> i64 {
        match &self.repr {
            Repr::Zero { bound, .. } => *bound,
            Repr::Term { val, .. } => *val,
        }
    }

    /// `|x|_p = p^{-v(x)}` as an exact rational; 0 for exact zero.
    pub fn abs_p(&self) -> Result<BigRational> {
        match self.valuation()? {
            None => Ok(BigRational::zero()),
            Some(v) => {
                let pw = BigInt::from(self.prime).pow(v.unsigned_abs() as u32);
                Ok(if v >= 0 {
                    BigRational::new(BigInt::one(), pw)
                } else {
                    BigRational::from(pw)
                })
            }
        }
    }

    pub fn precision(&self) -> Option<u32> {
        match &self.repr {
            Repr::Zero { .. } => None,
            Repr::Term { prec, .. } => Some(*prec),
        }
    }

    fn check_prime(&self, other: &Self) {
        assert_eq!(self.prime, other.prime, "mixed primes in scalar arithmetic");
    }

    pub fn neg(&self) -> Self {
        match &self.repr {
            Repr::Zero { .. } => self.clone(),
            Repr::Term { val, unit, prec } => {
                let m = pow_u64(self.prime, *prec);
                PAdicScalar {
                    prime: self.prime,
                    repr: Repr::Term {
                        val: *val,
                        unit: (m - *unit % m) % m,
                        prec: *prec,
                    },
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_prime(other);
        let (v1, u1, k1, v2, u2, k2) = match (&self.repr, &other.repr) {
            (Repr::Zero { exact: true, .. }, _) => return other.clone(),
            (_, Repr::Zero { exact: true, .. }) => return self.clone(),
            (Repr::Zero { exact: false, bound: b1 }, Repr::Zero { exact: false, bound: b2 }) => {
                return PAdicScalar {
                    prime: self.prime,
                    repr: Repr::Zero { exact: false, bound: (*b1).min(*b2) },
                };
            }
            (Repr::Zero { exact: false, bound }, Repr::Term { val, unit, prec })
            | (Repr::Term { val, unit, prec }, Repr::Zero { exact: false, bound }) => {
                // the cancelled zero can only disturb digits past bound - val
                return if *val < *bound {
                    let keep = ((*bound - *val) as u64).min(*prec as u64) as u32;
                    PAdicScalar {
                        prime: self.prime,
                        repr: Repr::Term {
                            val: *val,
                            unit: *unit % pow_u64(self.prime, keep),
                            prec: keep,
                        },
                    }
                } else {
                    PAdicScalar {
                        prime: self.prime,
                        repr: Repr::Zero { exact: false, bound: *bound },
                    }
                };
            }
            (
                Repr::Term { val: v1, unit: u1, prec: k1 },
                Repr::Term { val: v2, unit: u2, prec: k2 },
            ) => (*v1, *u1, *k1, *v2, *u2, *k2),
        };
        // order so v1 <= v2
        let (v1, u1, k1, v2, u2, k2) = if v1 <= v2 {
            (v1, u1, k1, v2, u2, k2)
        } else {
            (v2, u2, k2, v1, u1, k1)
        };
        let d = (v2 - v1) as u32;
        // sum known modulo p^K relative to p^{v1}
        let kk = k1.min(k2 + d);
        if d >= kk {
            // the second term is invisible at this precision
            return PAdicScalar {
                prime: self.prime,
                repr: Repr::Term { val: v1, unit: u1 % pow_u64(self.prime, kk), prec: kk },
            };
        }
        let m = pow_u64(self.prime, kk);
        let shifted = mul_mod(u2 % m, pow_u64(self.prime, d) % m, m);
        let mut s = (((u1 % m) as u128 + shifted as u128) % m as u128) as u64;
        if s == 0 {
            return PAdicScalar {
                prime: self.prime,
                repr: Repr::Zero { exact: false, bound: v1 + kk as i64 },
            };
        }
        let mut t = 0u32;
        while s % self.prime == 0 {
            s /= self.prime;
            t += 1;
        }
        PAdicScalar {
            prime: self.prime,
            repr: Repr::Term {
                val: v1 + t as i64,
                unit: s,
                prec: kk - t,
            },
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_prime(other);
        match (&self.repr, &other.repr) {
            (Repr::Zero { exact: e1, bound: b1 }, Repr::Zero { exact: e2, bound: b2 }) => {
                PAdicScalar {
                    prime: self.prime,
                    repr: if *e1 || *e2 {
                        Repr::Zero { exact: true, bound: i64::MAX }
                    } else {
                        Repr::Zero { exact: false, bound: b1.saturating_add(*b2) }
                    },
                }
            }
            (Repr::Zero { exact, bound }, Repr::Term { val, .. })
            | (Repr::Term { val, .. }, Repr::Zero { exact, bound }) => PAdicScalar {
                prime: self.prime,
                repr: Repr::Zero { exact: *exact, bound: bound.saturating_add(*val) },
            },
            (
                Repr::Term { val: v1, unit: u1, prec: k1 },
                Repr::Term { val: v2, unit: u2, prec: k2 },
            ) => {
                let k = (*k1).min(*k2);
                let m = pow_u64(self.prime, k);
                PAdicScalar {
                    prime: self.prime,
                    repr: Repr::Term {
                        val: v1 + v2,
                        unit: mul_mod(*u1 % m, *u2 % m, m),
                        prec: k,
                    },
                }
            }
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        match &self.repr {
            Repr::Zero { exact: true, .. } => {
                Err(Error::DivisionByZero("inverse of zero".into()))
            }
            Repr::Zero { exact: false, .. } => Err(Error::PrecisionExhausted(
                "inverse of a cancelled scalar".into(),
            )),
            Repr::Term { val, unit, prec } => Ok(PAdicScalar {
                prime: self.prime,
                repr: Repr::Term {
                    val: -val,
                    unit: inv_mod_ppow(*unit, self.prime, *prec),
                    prec: *prec,
                },
            }),
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.inverse()?))
    }

    pub fn pow(&self, e: i64) -> Result<Self> {
        let base = if e < 0 { self.inverse()? } else { self.clone() };
        let mut acc = Self::one(self.prime, self.precision().unwrap_or(max_precision(self.prime)));
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    /// Residue of an integral scalar modulo `p^m`.
    pub fn residue(&self, m: u32) -> Result<u64> {
        self.shifted_code(0, m)
    }

    /// Code of `x * p^shift` modulo `p^digits`; requires `x * p^shift` integral
    /// and enough known digits.
    pub fn shifted_code(&self, shift: i64, digits: u32) -> Result<u64> {
        match &self.repr {
            Repr::Zero { exact: true, .. } => Ok(0),
            Repr::Zero { exact: false, bound } => {
                // certified divisibility can still pin the code to 0
                if bound.saturating_add(shift) >= digits as i64 {
                    Ok(0)
                } else {
                    Err(Error::PrecisionExhausted(
                        "coset code of a cancelled scalar".into(),
                    ))
                }
            }
            Repr::Term { val, unit, prec } => {
                let v = val + shift;
                if v < 0 {
                    return Err(Error::WindowOutOfRange(format!(
                        "scalar p^{} lies outside the window (shift {})",
                        val, shift
                    )));
                }
                let v = v as u32;
                if v >= digits {
                    return Ok(0);
                }
                let need = digits - v;
                if *prec < need {
                    return Err(Error::PrecisionExhausted(format!(
                        "need {} digits, have {}",
                        need, prec
                    )));
                }
                let m = pow_u64(self.prime, digits);
                Ok(mul_mod(unit % m, pow_u64(self.prime, v), m))
            }
        }
    }
}

impl PartialEq for PAdicScalar {
    /// Indistinguishability at the coarser of the two precisions.
    fn eq(&self, other: &Self) -> bool {
        if self.prime != other.prime {
            return false;
        }
        match (&self.repr, &other.repr) {
            (Repr::Zero { .. }, Repr::Zero { .. }) => true,
            (Repr::Zero { .. }, Repr::Term { .. })
            | (Repr::Term { .. }, Repr::Zero { .. }) => false,
            (
                Repr::Term { val: v1, unit: u1, prec: k1 },
                Repr::Term { val: v2, unit: u2, prec: k2 },
            ) => {
                if v1 != v2 {
                    return false;
                }
                let m = pow_u64(self.prime, *k1.min(k2));
                u1 % m == u2 % m
            }
        }
    }
}

impl fmt::Display for PAdicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Zero { exact: true, .. } => write!(f, "0"),
            Repr::Zero { exact: false, .. } => write!(f, "0 (cancelled)"),
            Repr::Term { val, unit, prec } => {
                write!(f, "{}^{} * {} (mod {}^{})", self.prime, val, unit, self.prime, prec)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(num: i128, den: i128) -> PAdicScalar {
        PAdicScalar::from_rational(num, den, 5, 12).unwrap()
    }

    #[test]
    fn valuation_matches_rational_factorization() {
        // oracle: factor the rational by hand
        assert_eq!(q(50, 1).valuation().unwrap(), Some(2));
        assert_eq!(q(3, 25).valuation().unwrap(), Some(-2));
        assert_eq!(q(-125, 7).valuation().unwrap(), Some(3));
        assert_eq!(PAdicScalar::zero(5).valuation().unwrap(), None);
    }

    #[test]
    fn field_ops_agree_with_rationals() {
        // (3/5 + 7/10) * 2 = 13/5; check against direct construction
        let lhs = q(3, 5).add(&q(7, 10)).mul(&q(2, 1));
        assert_eq!(lhs, q(13, 5));
        let inv = q(13, 5).inverse().unwrap();
        assert_eq!(inv, q(5, 13));
        assert_eq!(q(13, 5).mul(&inv), q(1, 1));
    }

    #[test]
    fn cancellation_is_tagged() {
        let d = q(7, 2).sub(&q(7, 2));
        assert!(d.is_zero());
        assert!(d.valuation().is_err());
        let z = q(4, 9).sub(&q(4, 9)).add(&q(0, 1));
        assert!(z.valuation().is_err());
    }

    #[test]
    fn addition_tracks_absolute_precision() {
        // p^-3 * u at 12 digits + p^5 * w: the sum keeps 12 digits at p^-3
        let a = q(2, 125);
        let b = q(3125 * 4, 1);
        let s = a.add(&b);
        assert_eq!(s.valuation().unwrap(), Some(-3));
        assert_eq!(s.precision(), Some(12));
    }

    #[test]
    fn codes_round_trip() {
        // x = 42 * 5^-2: code at shift 2 with 5 digits is 42 mod 5^5
        let x = q(42, 25);
        assert_eq!(x.shifted_code(2, 5).unwrap(), 42);
        let y = PAdicScalar::from_code(42, 2, 5, 12);
        assert_eq!(x, y);
        // outside the window
        assert!(x.shifted_code(1, 5).is_err());
    }

    #[test]
    fn abs_p_values() {
        use num::ToPrimitive;
        assert_eq!(q(50, 1).abs_p().unwrap().to_f64().unwrap(), 1.0 / 25.0);
        assert_eq!(q(1, 5).abs_p().unwrap().to_f64().unwrap(), 5.0);
    }
}
