//! Quadratic forms over Q_p, lattice Gauss sums and the Weil index.
//!
//! The oscillatory integral `int sigma(a0 Q(w)/2) dw` over growing lattices
//! `p^{-N} O^n` stabilizes once N passes the conductor of `a0 * Gram`. The
//! stabilized value S factors as `c * gamma` with `c = |S| > 0` and `gamma`
//! of modulus one: `gamma` is the Weil index of `a0 Q`. `|S|^2 = S * conj(S)`
//! is rational of the form `s^2 p^e`, so the normalization stays exact (a
//! square root of p is itself a cyclotomic value).
//!
//! The defining property is checked through the Fourier identity
//! `int sigma(v'Av/2) f(v) dv = gamma(A) |det A|^{-1/2}
//!  int sigma(-l'A^{-1}l/2) fhat(-l) dl`
//! whose two sides are finite sums for compactly supported f.

use std::collections::HashMap;

use num::{BigRational, Signed, Zero};

use crate::cyclotomic::{AdditiveCharacter, CyclotomicValue};
use crate::linalg::MatK;
use crate::padic::{max_precision, pow_u64, PAdicScalar};
use crate::schwartz::{rational_power, SchwartzFunction, Window};
use crate::{Error, Result};

/// Symmetric nondegenerate form `Q(v) = v' Gram v`.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    gram: MatK,
}

impl QuadraticForm {
    /// Symmetrizes the given matrix (which leaves `Q(v)` unchanged) and
    /// rejects degenerate forms.
    pub fn new(mat: MatK) -> Result<Self> {
        assert_eq!(mat.n_rows(), mat.n_cols());
        let half = PAdicScalar::from_rational(1, 2, mat.prime(), max_precision(mat.prime()))?;
        let gram = mat.add(&mat.transpose()).scale(&half);
        if gram.det()?.is_zero() {
            return Err(Error::InvalidInput("degenerate quadratic form".into()));
        }
        Ok(QuadraticForm { gram })
    }

    pub fn diagonal(entries: &[PAdicScalar]) -> Result<Self> {
        let prime = entries[0].prime();
        let mut m = MatK::zero(entries.len(), entries.len(), prime);
        for (i, e) in entries.iter().enumerate() {
            m.set(i, i, e.clone());
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.gram.n_rows()
    }

    pub fn prime(&self) -> u64 {
        self.gram.prime()
    }

    pub fn gram(&self) -> &MatK {
        &self.gram
    }

    pub fn eval(&self, v: &[PAdicScalar]) -> PAdicScalar {
        crate::linalg::dot(v, &self.gram.mul_vec(v))
    }

    pub fn scale(&self, a: &PAdicScalar) -> Result<Self> {
        Self::new(self.gram.scale(a))
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        let n = self.dim() + other.dim();
        let mut m = MatK::zero(n, n, self.prime());
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                m.set(i, j, self.gram.get(i, j).clone());
            }
        }
        for i in 0..other.dim() {
            for j in 0..other.dim() {
                m.set(self.dim() + i, self.dim() + j, other.gram.get(i, j).clone());
            }
        }
        Self::new(m)
    }

    /// Gram of the inverse form, for the Fourier side of the index identity.
    pub fn inverse_form(&self) -> Result<Self> {
        Self::new(self.gram.inverse()?)
    }
}

/// `B(v, w) = v' mat w` with `mat` antisymmetric.
#[derive(Clone, Debug)]
pub struct AlternatingForm {
    mat: MatK,
}

impl AlternatingForm {
    pub fn new(mat: MatK) -> Result<Self> {
        assert_eq!(mat.n_rows(), mat.n_cols());
        for i in 0..mat.n_rows() {
            for j in 0..=i {
                let s = mat.get(i, j).add(mat.get(j, i));
                if !s.is_zero() {
                    return Err(Error::InvalidInput("matrix is not antisymmetric".into()));
                }
            }
        }
        Ok(AlternatingForm { mat })
    }

    /// The standard symplectic form on k^{2d}: B(e_i, f_j) = delta_ij.
    pub fn standard_symplectic(d: usize, prime: u64) -> Self {
        let prec = max_precision(prime);
        let mut m = MatK::zero(2 * d, 2 * d, prime);
        for i in 0..d {
            m.set(i, d + i, PAdicScalar::one(prime, prec));
            m.set(d + i, i, PAdicScalar::one(prime, prec).neg());
        }
        AlternatingForm { mat: m }
    }

    pub fn dim(&self) -> usize {
        self.mat.n_rows()
    }

    pub fn prime(&self) -> u64 {
        self.mat.prime()
    }

    pub fn matrix(&self) -> &MatK {
        &self.mat
    }

    pub fn eval(&self, v: &[PAdicScalar], w: &[PAdicScalar]) -> PAdicScalar {
        crate::linalg::dot(v, &self.mat.mul_vec(w))
    }

    /// Pfaffian of the Gram matrix in the given basis (columns).
    pub fn pfaffian_in_basis(&self, basis: &[Vec<PAdicScalar>]) -> Result<PAdicScalar> {
        if basis.len() % 2 != 0 {
            return Err(Error::InvalidInput("pfaffian needs an even-dimensional basis".into()));
        }
        let n = self.dim();
        let mut g = MatK::zero(basis.len(), basis.len(), self.prime());
        for (a, va) in basis.iter().enumerate() {
            assert_eq!(va.len(), n);
            for (b, vb) in basis.iter().enumerate() {
                g.set(a, b, self.eval(va, vb));
            }
        }
        g.pfaffian()
    }

    pub fn pfaffian(&self) -> Result<PAdicScalar> {
        self.mat.pfaffian()
    }
}

fn min_valuation(m: &MatK) -> Option<i64> {
    let mut best: Option<i64> = None;
    for i in 0..m.n_rows() {
        for j in 0..m.n_cols() {
            if let Ok(Some(v)) = m.get(i, j).valuation() {
                best = Some(best.map_or(v, |b: i64| b.min(v)));
            }
        }
    }
    best
}

/// `int over p^{-N} O^n of sigma(a0 Q(w)/2) dw`, exactly.
///
/// The sum runs over a grid refined until the integrand is constant on cells;
/// a coordinate recursion with memoization on the accumulated linear phase
/// keeps block-diagonal forms at linear cost in the dimension.
pub fn gauss_sum(q: &QuadraticForm, a0: &PAdicScalar, level: i32) -> Result<CyclotomicValue> {
    if a0.is_zero() {
        return Err(Error::InvalidInput("gauss_sum with a0 = 0".into()));
    }
    let prime = q.prime();
    let n = q.dim();
    let prec = max_precision(prime);
    let half = PAdicScalar::from_rational(1, 2, prime, prec)?;
    let c = a0.mul(&half);
    let two_c = a0.clone();
    let vc = c.valuation()?.expect("a0 nonzero");
    let vg = min_valuation(q.gram()).ok_or_else(|| {
        Error::InvalidInput("zero Gram matrix".into())
    })?;
    let nn = level.max(0) as i64;
    let defect = -(vc + vg);
    let k = 0i64.max(nn + defect).max((defect + 1).div_euclid(2));
    let digits = (nn + k) as u32;
    let cap = pow_u64(prime, digits);
    // linear phases matter modulo p^N; codes carry `ushift + N` digits
    let ushift = 0i64.max(nn + defect);
    let udigits = (ushift + nn) as u32;
    let chi = AdditiveCharacter::new(prime);
    let mut memo: HashMap<(usize, Vec<u64>), CyclotomicValue> = HashMap::new();

    fn rec(
        i: usize,
        u: &[PAdicScalar],
        q: &QuadraticForm,
        c: &PAdicScalar,
        two_c: &PAdicScalar,
        chi: &AdditiveCharacter,
        nn: i64,
        cap: u64,
        ushift: i64,
        udigits: u32,
        prec: u32,
        memo: &mut HashMap<(usize, Vec<u64>), CyclotomicValue>,
    ) -> Result<CyclotomicValue> {
        let prime = q.prime();
        let n = q.dim();
        if i == n {
            return Ok(CyclotomicValue::one(prime));
        }
        let mut key = Vec::with_capacity(n - i);
        for uj in u {
            let code = if uj.is_zero() {
                0
            } else {
                uj.shifted_code(ushift, udigits)?
            };
            key.push(code);
        }
        if let Some(v) = memo.get(&(i, key.clone())) {
            return Ok(v.clone());
        }
        let mut acc = CyclotomicValue::zero(prime);
        for code in 0..cap {
            let w = PAdicScalar::from_code(code, nn, prime, prec);
            // phase c G_ii w^2 + u_i w
            let phase = c
                .mul(q.gram().get(i, i))
                .mul(&w)
                .mul(&w)
                .add(&u[0].mul(&w));
            let ph = chi.eval(&phase)?;
            if i + 1 == n {
                acc = acc.add(&ph);
                continue;
            }
            let mut next_u = Vec::with_capacity(n - i - 1);
            for j in i + 1..n {
                next_u.push(u[j - i].add(&two_c.mul(q.gram().get(i, j)).mul(&w)));
            }
            let sub = rec(
                i + 1, &next_u, q, c, two_c, chi, nn, cap, ushift, udigits, prec, memo,
            )?;
            acc = acc.add(&ph.mul(&sub));
        }
        memo.insert((i, key), acc.clone());
        Ok(acc)
    }

    let u0 = vec![PAdicScalar::zero(prime); n];
    let total = rec(
        0, &u0, q, &c, &two_c, &chi, nn, cap, ushift, udigits, prec, &mut memo,
    )?;
    // each grid cell has volume q^{-K n}
    Ok(total.scale(&rational_power(prime, -(k * n as i64))))
}

/// Weil index of `a0 Q` together with the exact positive normalization.
#[derive(Clone, Debug)]
pub struct WeilIndexResult {
    /// `gamma(a0 Q)`, of modulus one.
    pub value: CyclotomicValue,
    /// First level at which two consecutive lattice sums agree.
    pub stabilization_level: i32,
    /// `c = |S| = c_rational * sqrt(p)^{c_half}`.
    pub c_rational: BigRational,
    pub c_half: bool,
}

impl WeilIndexResult {
    pub fn c_approx(&self) -> f64 {
        use num::ToPrimitive;
        let base = self.c_rational.to_f64().unwrap_or(f64::NAN);
        if self.c_half {
            base * (self.value.prime() as f64).sqrt()
        } else {
            base
        }
    }
}

pub const STABILIZATION_MAX_LEVEL: i32 = 6;

pub fn weil_index(q: &QuadraticForm, a0: &PAdicScalar) -> Result<WeilIndexResult> {
    let prime = q.prime();
    let mut prev = gauss_sum(q, a0, 1)?;
    for n in 1..STABILIZATION_MAX_LEVEL {
        let next = gauss_sum(q, a0, n + 1)?;
        if next == prev {
            return normalize_index(prime, prev, n);
        }
        prev = next;
    }
    Err(Error::StabilizationFailed(format!(
        "gauss sum did not stabilize by level {}; last value ~ {:?}",
        STABILIZATION_MAX_LEVEL,
        prev.approx()
    )))
}

fn normalize_index(prime: u64, s: CyclotomicValue, level: i32) -> Result<WeilIndexResult> {
    let norm2 = s
        .mul(&s.conj())
        .to_rational()
        .ok_or_else(|| Error::StabilizationFailed("|S|^2 is not rational".into()))?;
    if norm2.is_zero() {
        return Err(Error::StabilizationFailed("stabilized sum vanished".into()));
    }
    // norm2 = s0^2 * p^e with e in {0, 1} after extracting squares
    let mut e: i64 = 0;
    let mut num = norm2.numer().clone();
    let mut den = norm2.denom().clone();
    let p = num::BigInt::from(prime);
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
        return Err(Error::StabilizationFailed(
            "|S|^2 is not a square times a power of p".into(),
        ));
    }
    let mut c_rational = BigRational::new(ns, ds);
    let half_floor = e.div_euclid(2);
    let c_half = e.rem_euclid(2) == 1;
    if half_floor >= 0 {
        c_rational *= BigRational::from(p.pow(half_floor as u32));
    } else {
        c_rational /= BigRational::from(p.pow((-half_floor) as u32));
    }
    if c_rational.is_negative() {
        return Err(Error::StabilizationFailed("negative modulus".into()));
    }
    // 1/c: rational, times sqrt(p)/p when the half power is present
    let mut inv = c_rational.recip();
    let mut gamma = s;
    if c_half {
        inv /= BigRational::from(num::BigInt::from(prime));
        gamma = gamma.mul(&CyclotomicValue::sqrt_p(prime));
    }
    gamma = gamma.scale(&inv);
    Ok(WeilIndexResult {
        value: gamma,
        stabilization_level: level,
        c_rational,
        c_half,
    })
}

/// `int sigma(a0 Q(v)/2) f(v) dv` as a single finite sum (f has compact
/// support, so no stabilization is involved).
pub fn twisted_integral(
    q: &QuadraticForm,
    a0: &PAdicScalar,
    f: &SchwartzFunction,
) -> Result<CyclotomicValue> {
    assert_eq!(q.prime(), f.prime());
    assert_eq!(q.dim(), f.dim());
    let prime = q.prime();
    let prec = max_precision(prime);
    let half = PAdicScalar::from_rational(1, 2, prime, prec)?;
    let c = a0.mul(&half);
    let vc = c.valuation()?.ok_or_else(|| Error::InvalidInput("a0 = 0".into()))?;
    let vg = min_valuation(q.gram())
        .ok_or_else(|| Error::InvalidInput("zero Gram matrix".into()))?;
    let w = f.window();
    let defect = -(vc + vg);
    let inner_needed = (w.outer as i64 + defect)
        .max((defect + 1).div_euclid(2))
        .max(w.inner as i64);
    let g = f.refine(Window { outer: w.outer, inner: inner_needed as i32 });
    let chi = AdditiveCharacter::new(prime);
    let vol = g.coset_volume();
    let mut acc = CyclotomicValue::zero(prime);
    for (code, val) in g.table() {
        let v = g.rep_point(code);
        let phase = chi.eval(&c.mul(&q.eval(&v)))?;
        acc = acc.add(&phase.mul(val));
    }
    Ok(acc.scale(&vol))
}

/// Both sides of the index identity for a test function: LHS the twisted
/// integral of `f`, RHS `gamma(a0 Q) |det(a0 Gram)|^{-1/2}` times the twisted
/// integral of `fhat(-l)` against the inverse form with twist `-1`.
pub fn index_identity_sides(
    q: &QuadraticForm,
    a0: &PAdicScalar,
    f: &SchwartzFunction,
) -> Result<(CyclotomicValue, CyclotomicValue)> {
    let prime = q.prime();
    let prec = max_precision(prime);
    let lhs = twisted_integral(q, a0, f)?;
    let idx = weil_index(q, a0)?;
    // A = a0 Gram; inverse form has Gram (a0 Gram)^{-1}
    let a_mat = q.gram().scale(a0);
    let a_inv_form = QuadraticForm::new(a_mat.inverse()?)?;
    let det = a_mat.det()?;
    let det_abs = det.abs_p()?;
    let inv_sqrt_det = CyclotomicValue::sqrt_of_rational(prime, &det_abs.recip())?;
    let fhat_neg = f.fourier().negate_argument();
    let minus_one = PAdicScalar::from_integer(-1, prime, prec);
    let dual = twisted_integral(&a_inv_form, &minus_one, &fhat_neg)?;
    let rhs = idx.value.mul(&inv_sqrt_det).mul(&dual);
    Ok((lhs, rhs))
}

/// Cayley-type quadratic form `Q(v) = B(v, (s^{-1} - 1)^{-1} v)` on the span
/// of `lagrangian` (columns), in those coordinates.
pub fn cayley_form(
    b: &AlternatingForm,
    s: &MatK,
    lagrangian: &[Vec<PAdicScalar>],
) -> Result<QuadraticForm> {
    let n = b.dim();
    let prime = b.prime();
    let prec = max_precision(prime);
    let s_inv = s.inverse()?;
    let one = MatK::identity(n, prime, prec);
    let den = s_inv.sub(&one);
    let cay = den
        .inverse()
        .map_err(|_| Error::InvalidInput("s^{-1} - 1 is singular".into()))?;
    // transversality: the span must meet its s-image trivially
    let d = lagrangian.len();
    let mut trans = MatK::zero(n, 2 * d, prime);
    for (j, col) in lagrangian.iter().enumerate() {
        let img = s.mul_vec(col);
        for i in 0..n {
            trans.set(i, j, col[i].clone());
            trans.set(i, d + j, img[i].clone());
        }
    }
    if !trans.kernel()?.is_empty() {
        return Err(Error::InvalidInput(
            "s does not move the lagrangian off itself".into(),
        ));
    }
    let mut gram = MatK::zero(d, d, prime);
    for (i, vi) in lagrangian.iter().enumerate() {
        for (j, vj) in lagrangian.iter().enumerate() {
            gram.set(i, j, b.eval(vi, &cay.mul_vec(vj)));
        }
    }
    QuadraticForm::new(gram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    fn sc(n: i128, d: i128, p: u64) -> PAdicScalar {
        PAdicScalar::from_rational(n, d, p, 24).unwrap()
    }

    fn unit_form(p: u64, entries: &[i128]) -> QuadraticForm {
        QuadraticForm::diagonal(&entries.iter().map(|&e| sc(e, 1, p)).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn gauss_sum_trivial_window() {
        // over O the phase is trivial for integral a0 and Gram
        let p = 5u64;
        let q = unit_form(p, &[1]);
        let s = gauss_sum(&q, &sc(1, 1, p), 0).unwrap();
        assert_eq!(s, CyclotomicValue::one(p));
    }

    #[test]
    fn ramified_gauss_sum_matches_direct_oracle() {
        // a0 = p: direct sum over p^{-1}O/O of zeta_p^{inv2 c^2}
        let p = 5u64;
        let q = unit_form(p, &[1]);
        let s = gauss_sum(&q, &sc(5, 1, p), 1).unwrap();
        let mut oracle = CyclotomicValue::zero(p);
        for cc in 0..p {
            // phase (p/2)(c/p)^2 = c^2 * inv2 / p with inv2 = 3 mod 5
            oracle = oracle.add(&CyclotomicValue::root_p(p, (cc * cc * 3) as i128, 1));
        }
        assert_eq!(s, oracle);
    }

    #[test]
    fn block_sums_factor() {
        let p = 3u64;
        let q1 = unit_form(p, &[1, 2]);
        let q2 = unit_form(p, &[3]);
        let a0 = sc(1, 3, p);
        let joint = gauss_sum(&q1.direct_sum(&q2).unwrap(), &a0, 2).unwrap();
        let split = gauss_sum(&q1, &a0, 2)
            .unwrap()
            .mul(&gauss_sum(&q2, &a0, 2).unwrap());
        assert_eq!(joint, split);
    }

    #[test]
    fn weil_index_has_modulus_one() {
        for p in [3u64, 5] {
            for a0 in [sc(1, 1, p), sc(p as i128, 1, p), sc(2, 1, p)] {
                let q = unit_form(p, &[1]);
                let r = weil_index(&q, &a0).unwrap();
                assert!((r.value.approx_abs() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hyperbolic_and_split_forms_have_trivial_index() {
        let p = 5u64;
        // Q(x, y) = x^2 - y^2 ~ hyperbolic plane
        let q = unit_form(p, &[1, -1]);
        let r = weil_index(&q, &sc(5, 1, p)).unwrap();
        assert_eq!(r.value, CyclotomicValue::one(p));
        // Q + (-Q) in dimension 4
        let q4 = unit_form(p, &[2, 5, -2, -5]);
        let r = weil_index(&q4, &sc(1, 1, p)).unwrap();
        assert_eq!(r.value, CyclotomicValue::one(p));
    }

    #[test]
    fn ramified_index_value_against_gauss_sum_oracle() {
        // a0 = p, Q = x^2: gamma = normalized quadratic Gauss sum; for p = 5
        // the sum is (2|5)-twisted: S = sum zeta_5^{3c^2} = -sqrt(5)
        let p = 5u64;
        let q = unit_form(p, &[1]);
        let r = weil_index(&q, &sc(5, 1, p)).unwrap();
        assert_eq!(r.value, CyclotomicValue::from_integer(p, -1));
        assert_eq!(r.c_rational, BigRational::from(BigInt::from(1)));
        assert!(r.c_half);
    }

    #[test]
    fn multiplicative_over_orthogonal_sums() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for p in [3u64, 5] {
            for _ in 0..4 {
                let d1 = rng.gen_range(1..=2);
                let d2 = rng.gen_range(1..=2);
                let mut entries = |d: usize| -> Vec<PAdicScalar> {
                    (0..d)
                        .map(|_| {
                            let u = rng.gen_range(1..p) as i128;
                            let e = rng.gen_range(0..=1) as u32;
                            sc(u * (p as i128).pow(e), 1, p)
                        })
                        .collect()
                };
                let q1 = QuadraticForm::diagonal(&entries(d1)).unwrap();
                let q2 = QuadraticForm::diagonal(&entries(d2)).unwrap();
                let a0 = sc(rng.gen_range(1..p) as i128, 1, p);
                let joint = weil_index(&q1.direct_sum(&q2).unwrap(), &a0).unwrap();
                let split = weil_index(&q1, &a0)
                    .unwrap()
                    .value
                    .mul(&weil_index(&q2, &a0).unwrap().value);
                assert_eq!(joint.value, split, "p={}", p);
            }
        }
    }

    #[test]
    fn index_identity_on_test_functions() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
        for p in [3u64, 5] {
            let q = unit_form(p, &[1]);
            for a0 in [sc(1, 1, p), sc(p as i128, 1, p)] {
                let f = crate::schwartz::random_function(&mut rng, p, 1, 1, 1);
                let (lhs, rhs) = index_identity_sides(&q, &a0, &f).unwrap();
                assert!(
                    lhs.approx_distance(&rhs) < 1e-9,
                    "identity failed p={} lhs={:?} rhs={:?}",
                    p,
                    lhs.approx(),
                    rhs.approx()
                );
            }
        }
        // a 2x2 non-diagonal form
        let p = 3u64;
        let mut m = MatK::zero(2, 2, p);
        m.set(0, 0, sc(1, 1, p));
        m.set(0, 1, sc(1, 1, p));
        m.set(1, 0, sc(1, 1, p));
        m.set(1, 1, sc(2, 1, p));
        let q = QuadraticForm::new(m).unwrap();
        let f = crate::schwartz::random_function(&mut rng, p, 2, 1, 1);
        let (lhs, rhs) = index_identity_sides(&q, &sc(3, 1, p), &f).unwrap();
        assert!(lhs.approx_distance(&rhs) < 1e-9);
    }

    #[test]
    fn pfaffian_of_standard_form() {
        let p = 5u64;
        let b = AlternatingForm::standard_symplectic(1, p);
        assert_eq!(b.pfaffian().unwrap(), sc(1, 1, p));
        let b2 = AlternatingForm::standard_symplectic(2, p);
        let scaled = AlternatingForm::new(b2.matrix().scale(&sc(7, 1, p))).unwrap();
        // pfaffian scales by c^d in dimension 2d; the (e1,e2,f1,f2) ordering
        // contributes the matching sign (-1)^{d(d-1)/2}
        assert_eq!(scaled.pfaffian().unwrap(), sc(-49, 1, p));
        // squares to the determinant
        assert_eq!(
            scaled.pfaffian().unwrap().mul(&scaled.pfaffian().unwrap()),
            scaled.matrix().det().unwrap()
        );
        // singular alternating form
        let z = AlternatingForm::new(MatK::zero(2, 2, p)).unwrap();
        assert!(z.pfaffian().unwrap().is_zero());
    }

    #[test]
    fn cayley_form_on_a_line() {
        let p = 5u64;
        let b = AlternatingForm::standard_symplectic(1, p);
        // s = diag(a, a^{-1}) moves span(e + f) off itself when a != 1
        let a = sc(2, 1, p);
        let mut s = MatK::zero(2, 2, p);
        s.set(0, 0, a.clone());
        s.set(1, 1, a.inverse().unwrap());
        let l2 = vec![vec![sc(1, 1, p), sc(1, 1, p)]];
        let q = cayley_form(&b, &s, &l2).unwrap();
        // oracle: on v = x(e+f), B(v, (s^{-1}-1)^{-1} v) = x^2 (1+a)/(a-1)
        assert_eq!(q.gram().get(0, 0), &sc(3, 1, p));
        // identity s is rejected
        let id = MatK::identity(2, p, 24);
        assert!(cayley_form(&b, &id, &l2).is_err());
        // lagrangian fixed by s is rejected
        let l_fixed = vec![vec![sc(1, 1, p), sc(0, 1, p)]];
        assert!(cayley_form(&b, &s, &l_fixed).is_err());
    }
}
