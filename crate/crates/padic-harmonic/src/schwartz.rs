//! Locally constant compactly supported functions on k^n as finite tables.
//!
//! A function is stored on the window `p^{-M} O^n / p^{m} O^n`: supported in
//! the outer lattice, constant on cosets of the inner one. A coset is coded
//! per axis by an integer `c < p^{M+m}` representing `c * p^{-M}`. The pair
//! `(M, m)` is kept canonical: zero outer shells are trimmed and constant
//! inner refinements merged, so equality of functions is equality of tables.
//!
//! The Fourier transform uses the pairing `(l, x) -> sigma(<l, x>)` with the
//! standard character `sigma` trivial on Z_p and no sign in the exponent;
//! under it the transform of an `(M, m)` window lands exactly on the dual
//! `(m, M)` window, and inversion is transform followed by argument negation.
//!
//! Measures are explicit: each function carries the volume assigned to `O^n`.
//! Binary operations insist the tags agree instead of silently rescaling.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, One};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cyclotomic::{AdditiveCharacter, CyclotomicValue};
use crate::linalg::MatK;
use crate::padic::{max_precision, pow_u64, PAdicScalar};
use crate::{Error, Result};

/// `p^e` as an exact rational, for any sign of `e`.
pub fn rational_power(prime: u64, e: i64) -> BigRational {
    let pw = BigInt::from(prime).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        BigRational::from(pw)
    } else {
        BigRational::new(BigInt::one(), pw)
    }
}

/// Window levels of a coset table: support in `p^{-outer} O^n`, constant on
/// cosets of `p^{inner} O^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub outer: i32,
    pub inner: i32,
}

impl Window {
    /// Window the Fourier transform of a function on `self` lands on exactly.
    pub fn dual(self) -> Window {
        Window { outer: self.inner, inner: self.outer }
    }

    pub fn digits(self) -> u32 {
        let k = self.outer + self.inner;
        assert!(k >= 0, "window with negative digit count");
        k as u32
    }
}

#[derive(Clone, Debug)]
pub struct SchwartzFunction {
    prime: u64,
    dim: usize,
    window: Window,
    /// Volume assigned to `O^n` by the carried Haar measure.
    scale: BigRational,
    table: BTreeMap<Vec<u64>, CyclotomicValue>,
}

impl SchwartzFunction {
    pub fn zero(prime: u64, dim: usize) -> Self {
        SchwartzFunction {
            prime,
            dim,
            window: Window { outer: 0, inner: 0 },
            scale: BigRational::one(),
            table: BTreeMap::new(),
        }
    }

    /// Indicator of `p^{level} O^n` (so `level = 0` gives `1_{O^n}`).
    pub fn lattice_indicator(prime: u64, dim: usize, level: i32) -> Self {
        let mut f = SchwartzFunction {
            prime,
            dim,
            window: Window { outer: -level, inner: level },
            scale: BigRational::one(),
            table: BTreeMap::new(),
        };
        f.table.insert(vec![0; dim], CyclotomicValue::one(prime));
        f.canonicalize();
        f
    }

    /// Build from explicit window and entries; entries are canonicalized.
    pub fn from_entries(
        prime: u64,
        dim: usize,
        window: Window,
        entries: Vec<(Vec<u64>, CyclotomicValue)>,
    ) -> Result<Self> {
        let k = window.outer + window.inner;
        if k < 0 {
            return Err(Error::WindowOutOfRange(format!(
                "outer {} + inner {} negative",
                window.outer, window.inner
            )));
        }
        let cap = pow_u64(prime, k as u32);
        let mut table = BTreeMap::new();
        for (code, v) in entries {
            if code.len() != dim {
                return Err(Error::InvalidInput("coset code of wrong dimension".into()));
            }
            if code.iter().any(|&c| c >= cap) {
                return Err(Error::WindowOutOfRange("coset code outside window".into()));
            }
            if v.is_zero() {
                continue;
            }
            let entry = table.entry(code).or_insert_with(|| CyclotomicValue::zero(prime));
            *entry = entry.add(&v);
        }
        let mut f = SchwartzFunction {
            prime,
            dim,
            window,
            scale: BigRational::one(),
            table,
        };
        f.canonicalize();
        Ok(f)
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn scale(&self) -> &BigRational {
        &self.scale
    }

    pub fn with_scale(mut self, scale: BigRational) -> Self {
        self.scale = scale;
        self
    }

    pub fn table(&self) -> &BTreeMap<Vec<u64>, CyclotomicValue> {
        &self.table
    }

    pub fn is_zero(&self) -> bool {
        self.table.is_empty()
    }

    pub fn support_size(&self) -> usize {
        self.table.len()
    }

    /// p-adic scalar represented by one axis code.
    pub fn rep_scalar(&self, code: u64) -> PAdicScalar {
        PAdicScalar::from_code(code, self.window.outer as i64, self.prime, max_precision(self.prime))
    }

    pub fn rep_point(&self, code: &[u64]) -> Vec<PAdicScalar> {
        code.iter().map(|&c| self.rep_scalar(c)).collect()
    }

    pub fn evaluate(&self, x: &[PAdicScalar]) -> Result<CyclotomicValue> {
        assert_eq!(x.len(), self.dim);
        let k = self.window.digits();
        let mut code = Vec::with_capacity(self.dim);
        for xi in x {
            match xi.shifted_code(self.window.outer as i64, k) {
                Ok(c) => code.push(c),
                Err(Error::WindowOutOfRange(_)) => return Ok(CyclotomicValue::zero(self.prime)),
                Err(e) => return Err(e),
            }
        }
        Ok(self
            .table
            .get(&code)
            .cloned()
            .unwrap_or_else(|| CyclotomicValue::zero(self.prime)))
    }

    /// Volume of one inner coset under the carried measure.
    pub fn coset_volume(&self) -> BigRational {
        rational_power(self.prime, -(self.window.inner as i64) * self.dim as i64) * &self.scale
    }

    /// `integral = sum of entries * coset volume`, exact.
    pub fn integral(&self) -> CyclotomicValue {
        let vol = self.coset_volume();
        let mut acc = CyclotomicValue::zero(self.prime);
        for v in self.table.values() {
            acc = acc.add(v);
        }
        acc.scale(&vol)
    }

    // ----- canonical form -----

    fn canonicalize(&mut self) {
        self.table.retain(|_, v| !v.is_zero());
        if self.table.is_empty() || self.dim == 0 {
            self.window = Window { outer: 0, inner: 0 };
            return;
        }
        if self.window.outer < 0 {
            // representable, but the type promises outer >= 0
            let delta = (-self.window.outer) as u32;
            let f = pow_u64(self.prime, delta);
            let table = std::mem::take(&mut self.table);
            self.table = table
                .into_iter()
                .map(|(code, v)| (code.iter().map(|&c| c * f).collect(), v))
                .collect();
            self.window.outer = 0;
        }
        loop {
            if self.try_trim_outer() {
                continue;
            }
            if self.try_merge_inner() {
                continue;
            }
            break;
        }
    }

    /// Drop the outermost shell if nothing lives on it.
    fn try_trim_outer(&mut self) -> bool {
        if self.window.outer <= 0 || self.window.digits() == 0 {
            return false;
        }
        if !self
            .table
            .keys()
            .all(|code| code.iter().all(|c| c % self.prime == 0))
        {
            return false;
        }
        let table = std::mem::take(&mut self.table);
        self.table = table
            .into_iter()
            .map(|(code, v)| (code.iter().map(|&c| c / self.prime).collect(), v))
            .collect();
        self.window.outer -= 1;
        true
    }

    /// Coarsen the inner level when the finest digit carries no information.
    fn try_merge_inner(&mut self) -> bool {
        let k = self.window.digits();
        if k == 0 {
            return false;
        }
        let base = pow_u64(self.prime, k - 1);
        let group_size = (self.prime as u128).pow(self.dim as u32);
        let mut groups: BTreeMap<Vec<u64>, (CyclotomicValue, u128)> = BTreeMap::new();
        for (code, v) in &self.table {
            let key: Vec<u64> = code.iter().map(|&c| c % base).collect();
            match groups.get_mut(&key) {
                None => {
                    groups.insert(key, (v.clone(), 1));
                }
                Some((w, count)) => {
                    if w != v {
                        return false;
                    }
                    *count += 1;
                }
            }
        }
        if groups.values().any(|(_, count)| *count != group_size) {
            return false;
        }
        self.table = groups.into_iter().map(|(k, (v, _))| (k, v)).collect();
        self.window.inner -= 1;
        true
    }

    /// Re-express on a finer/larger window without changing the function.
    pub fn refine(&self, window: Window) -> Self {
        assert!(window.outer >= self.window.outer && window.inner >= self.window.inner);
        let dm = (window.outer - self.window.outer) as u32;
        let k_old = self.window.digits();
        let extra = window.digits() - k_old - dm;
        let shift = pow_u64(self.prime, dm);
        let fine = pow_u64(self.prime, extra);
        let step = pow_u64(self.prime, k_old + dm);
        let mut table = BTreeMap::new();
        for (code, v) in &self.table {
            let base: Vec<u64> = code.iter().map(|&c| c * shift).collect();
            // enumerate the free fine digits on every axis
            let mut idx = vec![0u64; self.dim];
            loop {
                let key: Vec<u64> = base
                    .iter()
                    .zip(&idx)
                    .map(|(&b, &d)| b + d * step)
                    .collect();
                table.insert(key, v.clone());
                let mut axis = 0;
                loop {
                    if axis == self.dim {
                        break;
                    }
                    idx[axis] += 1;
                    if idx[axis] < fine {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                }
                if axis == self.dim {
                    break;
                }
            }
        }
        SchwartzFunction {
            prime: self.prime,
            dim: self.dim,
            window,
            scale: self.scale.clone(),
            table,
        }
    }

    fn common_window(&self, other: &Self) -> Window {
        Window {
            outer: self.window.outer.max(other.window.outer),
            inner: self.window.inner.max(other.window.inner),
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.prime != other.prime {
            return Err(Error::PrimeMismatch(self.prime, other.prime));
        }
        if self.dim != other.dim {
            return Err(Error::InvalidInput("dimension mismatch".into()));
        }
        if self.scale != other.scale {
            return Err(Error::InvalidInput(
                "Haar normalization tags differ; rescale explicitly first".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let w = self.common_window(other);
        let a = self.refine(w);
        let b = other.refine(w);
        let mut table = a.table;
        for (code, v) in b.table {
            let entry = table
                .entry(code)
                .or_insert_with(|| CyclotomicValue::zero(self.prime));
            *entry = entry.add(&v);
        }
        let mut f = SchwartzFunction {
            prime: self.prime,
            dim: self.dim,
            window: w,
            scale: self.scale.clone(),
            table,
        };
        f.canonicalize();
        Ok(f)
    }

    pub fn scale_values(&self, c: &CyclotomicValue) -> Self {
        let mut f = self.clone();
        f.table = f
            .table
            .into_iter()
            .map(|(code, v)| (code, v.mul(c)))
            .collect();
        f.canonicalize();
        f
    }

    pub fn scale_rational(&self, r: &BigRational) -> Self {
        self.scale_values(&CyclotomicValue::from_rational(self.prime, r.clone()))
    }

    /// Pointwise product (same measure tag required).
    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let w = self.common_window(other);
        let a = self.refine(w);
        let b = other.refine(w);
        let mut table = BTreeMap::new();
        for (code, v) in &a.table {
            if let Some(u) = b.table.get(code) {
                table.insert(code.clone(), v.mul(u));
            }
        }
        let mut f = SchwartzFunction {
            prime: self.prime,
            dim: self.dim,
            window: w,
            scale: self.scale.clone(),
            table,
        };
        f.canonicalize();
        Ok(f)
    }

    /// `x -> f(-x)`.
    pub fn negate_argument(&self) -> Self {
        let k = self.window.digits();
        let cap = pow_u64(self.prime, k);
        let mut f = self.clone();
        f.table = self
            .table
            .iter()
            .map(|(code, v)| {
                (
                    code.iter().map(|&c| (cap - c % cap) % cap).collect::<Vec<u64>>(),
                    v.clone(),
                )
            })
            .collect();
        f
    }

    /// `x -> f(x - a)`.
    pub fn translate(&self, a: &[PAdicScalar]) -> Result<Self> {
        assert_eq!(a.len(), self.dim);
        let mut outer = self.window.outer;
        for ai in a {
            if let Some(v) = ai.valuation()? {
                outer = outer.max((-v) as i32);
            }
        }
        let w = Window { outer, inner: self.window.inner };
        let g = self.refine(w);
        let k = w.digits();
        let cap = pow_u64(self.prime, k);
        let mut shift = Vec::with_capacity(self.dim);
        for ai in a {
            shift.push(ai.shifted_code(outer as i64, k)?);
        }
        let mut f = g.clone();
        f.table = g
            .table
            .iter()
            .map(|(code, v)| {
                (
                    code.iter()
                        .zip(&shift)
                        .map(|(&c, &s)| (c + s) % cap)
                        .collect::<Vec<u64>>(),
                    v.clone(),
                )
            })
            .collect();
        f.canonicalize();
        Ok(f)
    }

    /// Multiply by the character `x -> sigma(<l, x>)`.
    pub fn modulate(&self, l: &[PAdicScalar]) -> Result<Self> {
        assert_eq!(l.len(), self.dim);
        let chi = AdditiveCharacter::new(self.prime);
        let mut inner = self.window.inner;
        for li in l {
            if let Some(v) = li.valuation()? {
                inner = inner.max((-v) as i32);
            }
        }
        let w = Window { outer: self.window.outer, inner };
        let g = self.refine(w);
        let mut table = BTreeMap::new();
        for (code, v) in &g.table {
            let x = g.rep_point(code);
            let pairing = crate::linalg::dot(l, &x);
            table.insert(code.clone(), v.mul(&chi.eval(&pairing)?));
        }
        let mut f = SchwartzFunction {
            prime: self.prime,
            dim: self.dim,
            window: w,
            scale: self.scale.clone(),
            table,
        };
        f.canonicalize();
        Ok(f)
    }

    // ----- Fourier -----

    /// Exact Fourier transform `f^(l) = int f(x) sigma(<l, x>) dx`, landing on
    /// the dual window with the dual measure tag.
    pub fn fourier(&self) -> Self {
        let k = self.window.digits();
        let modulus = pow_u64(self.prime, k);
        // roots zeta_{p^K}^t for all t
        let roots: Vec<CyclotomicValue> = (0..modulus)
            .map(|t| CyclotomicValue::root_p(self.prime, t as i128, k))
            .collect();
        let mut table = self.table.clone();
        for axis in 0..self.dim {
            let mut groups: BTreeMap<Vec<u64>, Vec<(u64, CyclotomicValue)>> = BTreeMap::new();
            for (code, v) in &table {
                let mut rest = code.clone();
                let c = rest.remove(axis);
                groups.entry(rest).or_default().push((c, v.clone()));
            }
            let mut next = BTreeMap::new();
            for (rest, line) in groups {
                for out_c in 0..modulus {
                    let mut acc = CyclotomicValue::zero(self.prime);
                    for (c, v) in &line {
                        let t = ((*c as u128 * out_c as u128) % modulus as u128) as u64;
                        acc = acc.add(&v.mul(&roots[t as usize]));
                    }
                    if acc.is_zero() {
                        continue;
                    }
                    let mut key = rest.clone();
                    key.insert(axis, out_c);
                    next.insert(key, acc);
                }
            }
            table = next;
        }
        let vol = self.coset_volume();
        let mut f = SchwartzFunction {
            prime: self.prime,
            dim: self.dim,
            window: self.window.dual(),
            scale: self.scale.recip(),
            table: table
                .into_iter()
                .map(|(code, v)| (code, v.scale(&vol)))
                .collect(),
        };
        f.canonicalize();
        f
    }

    /// Inverse transform: transform then negate the argument.
    pub fn fourier_inverse(&self) -> Self {
        self.fourier().negate_argument()
    }

    /// Both sides of `f(0) = int f^ (dual measure)`, exactly.
    pub fn inversion_check(&self) -> Result<(CyclotomicValue, CyclotomicValue)> {
        let zero = vec![PAdicScalar::zero(self.prime); self.dim];
        let lhs = self.evaluate(&zero)?;
        let rhs = self.fourier().integral();
        Ok((lhs, rhs))
    }

    // ----- convolution -----

    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        // integrand y -> f(y) g(x - y) is constant at the finer inner level
        let inner = self.window.inner.max(other.window.inner);
        let outer = self.window.outer.max(other.window.outer);
        let a = self.refine(Window { outer: self.window.outer, inner });
        let w_fine = Window { outer, inner };
        let vol = a.coset_volume();
        let mut table: BTreeMap<Vec<u64>, CyclotomicValue> = BTreeMap::new();
        let lift = pow_u64(self.prime, (outer - self.window.outer) as u32);
        let denom = pow_u64(self.prime, outer as u32) as i128;
        for (ycode, fv) in &a.table {
            // x ranges over the output window at the fine level; the grid
            // difference x - y is an exact rational, never a cancelled scalar
            for xcode in enumerate_window(self.prime, self.dim, w_fine) {
                let diff: Vec<PAdicScalar> = xcode
                    .iter()
                    .zip(ycode)
                    .map(|(&cx, &cy)| {
                        PAdicScalar::from_rational(
                            cx as i128 - (cy * lift) as i128,
                            denom,
                            self.prime,
                            max_precision(self.prime),
                        )
                    })
                    .collect::<Result<_>>()?;
                let gv = other.evaluate(&diff)?;
                if gv.is_zero() {
                    continue;
                }
                let term = fv.mul(&gv).scale(&vol);
                let entry = table
                    .entry(xcode)
                    .or_insert_with(|| CyclotomicValue::zero(self.prime));
                *entry = entry.add(&term);
            }
        }
        let mut f = SchwartzFunction {
            prime: self.prime,
            dim: self.dim,
            window: w_fine,
            scale: self.scale.clone(),
            table,
        };
        f.canonicalize();
        Ok(f)
    }

    // ----- change of variables and fiber integration -----

    /// `x -> f(A x)` for invertible `A`.
    pub fn substitute(&self, a: &MatK) -> Result<Self> {
        assert_eq!(a.n_rows(), self.dim);
        assert_eq!(a.n_cols(), self.dim);
        let a_inv = a.inverse()?;
        let min_val = |m: &MatK| -> i64 {
            let mut best = 0i64;
            for i in 0..m.n_rows() {
                for j in 0..m.n_cols() {
                    if let Ok(Some(v)) = m.get(i, j).valuation() {
                        best = best.min(v);
                    }
                }
            }
            best
        };
        let outer = self.window.outer + (-min_val(&a_inv)).max(0) as i32;
        let inner = self.window.inner + (-min_val(a)).max(0) as i32;
        let w = Window { outer, inner };
        let mut table = BTreeMap::new();
        for code in enumerate_window(self.prime, self.dim, w) {
            let x: Vec<PAdicScalar> = code
                .iter()
                .map(|&c| PAdicScalar::from_code(c, outer as i64, self.prime, max_precision(self.prime)))
                .collect();
            let v = self.evaluate(&a.mul_vec(&x))?;
            if !v.is_zero() {
                table.insert(code, v);
            }
        }
        let mut f = SchwartzFunction {
            prime: self.prime,
            dim: self.dim,
            window: w,
            scale: self.scale.clone(),
            table,
        };
        f.canonicalize();
        Ok(f)
    }

    /// Integrate out the last `t` axes; the fiber measure gives each inner
    /// coset of an axis volume `q^{-inner}` times `fiber_scale^{1/t}`-free tag:
    /// the caller passes the total fiber normalization explicitly.
    pub fn integrate_out_last(&self, t: usize, fiber_scale: &BigRational) -> Self {
        assert!(t <= self.dim);
        let keep = self.dim - t;
        let per_coset =
            rational_power(self.prime, -(self.window.inner as i64) * t as i64) * fiber_scale;
        let mut table: BTreeMap<Vec<u64>, CyclotomicValue> = BTreeMap::new();
        for (code, v) in &self.table {
            let key: Vec<u64> = code[..keep].to_vec();
            let term = v.scale(&per_coset);
            let entry = table
                .entry(key)
                .or_insert_with(|| CyclotomicValue::zero(self.prime));
            *entry = entry.add(&term);
        }
        let mut f = SchwartzFunction {
            prime: self.prime,
            dim: keep,
            window: self.window,
            scale: self.scale.clone(),
            table,
        };
        f.canonicalize();
        f
    }

    /// Relabel axes: output axis `i` is input axis `perm[i]`.
    pub fn permute_axes(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim);
        let table: BTreeMap<Vec<u64>, CyclotomicValue> = self
            .table
            .iter()
            .map(|(code, v)| {
                let key: Vec<u64> = perm.iter().map(|&j| code[j]).collect();
                (key, v.clone())
            })
            .collect();
        SchwartzFunction {
            prime: self.prime,
            dim: self.dim,
            window: self.window,
            scale: self.scale.clone(),
            table,
        }
    }

    /// Keep the slice where the last `t` coordinates are zero, as a function
    /// of the first `dim - t` coordinates.
    pub fn slice_last_zero(&self, t: usize) -> Self {
        assert!(t <= self.dim);
        let keep = self.dim - t;
        let table: BTreeMap<Vec<u64>, CyclotomicValue> = self
            .table
            .iter()
            .filter(|(code, _)| code[keep..].iter().all(|&c| c == 0))
            .map(|(code, v)| (code[..keep].to_vec(), v.clone()))
            .collect();
        let mut f = SchwartzFunction {
            prime: self.prime,
            dim: keep,
            window: self.window,
            scale: self.scale.clone(),
            table,
        };
        f.canonicalize();
        f
    }

    // ----- serialization -----

    pub fn to_json_value(&self) -> serde_json::Value {
        let dto = SchwartzDto::from(self);
        serde_json::to_value(dto).expect("serialization is infallible")
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        let dto: SchwartzDto =
            serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        dto.build()
    }
}

impl PartialEq for SchwartzFunction {
    fn eq(&self, other: &Self) -> bool {
        self.prime == other.prime
            && self.dim == other.dim
            && self.window == other.window
            && self.scale == other.scale
            && self.table == other.table
    }
}

/// All coset codes of a window, in lexicographic order.
pub fn enumerate_window(prime: u64, dim: usize, window: Window) -> Vec<Vec<u64>> {
    let k = window.digits();
    let cap = pow_u64(prime, k);
    let mut out = Vec::new();
    let mut code = vec![0u64; dim];
    loop {
        out.push(code.clone());
        let mut axis = 0;
        loop {
            if axis == dim {
                return out;
            }
            code[axis] += 1;
            if code[axis] < cap {
                break;
            }
            code[axis] = 0;
            axis += 1;
        }
        if axis == dim {
            return out;
        }
    }
}

/// Restriction of `f` to the span of `basis` (columns over k), in the basis
/// coordinates, with the measure that gives the spanned lattice volume 1.
pub fn restrict_to_subspace(f: &SchwartzFunction, basis: &[Vec<PAdicScalar>]) -> Result<SchwartzFunction> {
    let n = f.dim();
    let d = basis.len();
    let c = extend_basis(f.prime(), n, basis)?;
    // g(y) = f(C y) with the last n-d coordinates frozen to zero
    let g = f.substitute(&c)?;
    Ok(g.slice_last_zero(n - d))
}

/// Fiber integration over the annihilator: given `fhat` on the dual of V and
/// a subspace W (basis columns), returns the function on the dual of W
/// obtained by integrating `fhat` over W-perp fibers. With the conventions of
/// [`restrict_to_subspace`] this equals the Fourier transform of the
/// restriction of `f` to W; the fiber measure is the standard one on the
/// complement coordinates divided by |det C| for the extended basis C.
pub fn fiber_integrate_annihilator(
    fhat: &SchwartzFunction,
    basis: &[Vec<PAdicScalar>],
) -> Result<SchwartzFunction> {
    let n = fhat.dim();
    let d = basis.len();
    let c = extend_basis(fhat.prime(), n, basis)?;
    // dual coordinates: y = C^T l, so l = (C^T)^{-1} y
    let ct_inv = c.transpose().inverse()?;
    let g = fhat.substitute(&ct_inv)?;
    let det = c.det()?;
    let kappa = det.abs_p()?.recip();
    Ok(g.integrate_out_last(n - d, &kappa))
}

/// Extend `basis` to a basis of k^n by greedily appending standard vectors.
fn extend_basis(prime: u64, n: usize, basis: &[Vec<PAdicScalar>]) -> Result<MatK> {
    let d = basis.len();
    if d > n {
        return Err(Error::InvalidInput("more basis vectors than the dimension".into()));
    }
    let mut cols: Vec<Vec<PAdicScalar>> = basis.to_vec();
    for e in 0..n {
        if cols.len() == n {
            break;
        }
        let mut cand = vec![PAdicScalar::zero(prime); n];
        cand[e] = PAdicScalar::one(prime, max_precision(prime));
        let mut trial = cols.clone();
        trial.push(cand);
        let m = columns_to_matrix(prime, n, &trial);
        // full column rank iff the kernel of the n x (d+1) matrix is trivial
        if m.kernel()?.is_empty() {
            cols = trial;
        }
    }
    if cols.len() != n {
        return Err(Error::InvalidInput("basis vectors are linearly dependent".into()));
    }
    let full = columns_to_matrix(prime, n, &cols);
    // reject dependent input (kernel check above only covers the extension)
    if full.det()?.is_zero() {
        return Err(Error::InvalidInput("basis vectors are linearly dependent".into()));
    }
    Ok(full)
}

fn columns_to_matrix(prime: u64, n: usize, cols: &[Vec<PAdicScalar>]) -> MatK {
    let mut m = MatK::zero(n, cols.len(), prime);
    for (j, col) in cols.iter().enumerate() {
        assert_eq!(col.len(), n, "basis vector of wrong dimension");
        for i in 0..n {
            m.set(i, j, col[i].clone());
        }
    }
    m
}

/// Seeded random canonical function for property suites.
pub fn random_function<R: Rng>(
    rng: &mut R,
    prime: u64,
    dim: usize,
    max_outer: i32,
    max_inner: i32,
) -> SchwartzFunction {
    // keep the dense dual table at desk scale: digits * dim stays small
    let digit_cap: i32 = match dim {
        1 => 3,
        2 => 2,
        _ => 1,
    };
    let outer = rng.gen_range(0..=max_outer.min(digit_cap));
    let inner = rng.gen_range((-outer).max(-1)..=max_inner.min(digit_cap - outer));
    let window = Window { outer, inner };
    let cap = pow_u64(prime, window.digits());
    let total = (cap as u128).pow(dim as u32);
    let entries = rng.gen_range(1..=(total.min(12) as usize));
    let mut list = Vec::new();
    for _ in 0..entries {
        let code: Vec<u64> = (0..dim).map(|_| rng.gen_range(0..cap)).collect();
        let num = rng.gen_range(-4i64..=4);
        let den = rng.gen_range(1i64..=3);
        let conductor = rng.gen_range(0..=2u32);
        let a = rng.gen_range(0..pow_u64(prime, conductor)) as i128;
        let root = CyclotomicValue::root_p(prime, a, conductor);
        let coeff = BigRational::new(BigInt::from(num), BigInt::from(den));
        list.push((code, root.scale(&coeff)));
    }
    SchwartzFunction::from_entries(prime, dim, window, list).expect("codes are in range")
}

// ----- JSON DTO -----

#[derive(Serialize, Deserialize)]
struct TermDto {
    e8: u8,
    m: u32,
    a: u64,
    num: String,
    den: String,
}

#[derive(Serialize, Deserialize)]
struct EntryDto {
    coset: Vec<u64>,
    value: Vec<TermDto>,
}

#[derive(Serialize, Deserialize)]
struct SchwartzDto {
    p: u64,
    n: usize,
    #[serde(rename = "M")]
    outer: i32,
    #[serde(rename = "m")]
    inner: i32,
    scale_num: String,
    scale_den: String,
    entries: Vec<EntryDto>,
}

impl From<&SchwartzFunction> for SchwartzDto {
    fn from(f: &SchwartzFunction) -> Self {
        SchwartzDto {
            p: f.prime,
            n: f.dim,
            outer: f.window.outer,
            inner: f.window.inner,
            scale_num: f.scale.numer().to_string(),
            scale_den: f.scale.denom().to_string(),
            entries: f
                .table
                .iter()
                .map(|(code, v)| EntryDto {
                    coset: code.clone(),
                    value: v
                        .terms()
                        .iter()
                        .map(|(k, c)| TermDto {
                            e8: k.eighth,
                            m: k.pm,
                            a: k.pa,
                            num: c.numer().to_string(),
                            den: c.denom().to_string(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl SchwartzDto {
    fn build(self) -> Result<SchwartzFunction> {
        let parse = |s: &str| -> Result<BigInt> {
            s.parse::<BigInt>().map_err(|e| Error::Parse(e.to_string()))
        };
        let mut entries = Vec::new();
        for e in self.entries {
            let mut v = CyclotomicValue::zero(self.p);
            for t in e.value {
                let c = BigRational::new(parse(&t.num)?, parse(&t.den)?);
                let root = CyclotomicValue::root8(self.p, t.e8 as i64)
                    .mul(&CyclotomicValue::root_p(self.p, t.a as i128, t.m));
                v = v.add(&root.scale(&c));
            }
            entries.push((e.coset, v));
        }
        let f = SchwartzFunction::from_entries(
            self.p,
            self.n,
            Window { outer: self.outer, inner: self.inner },
            entries,
        )?;
        let scale = BigRational::new(parse(&self.scale_num)?, parse(&self.scale_den)?);
        Ok(f.with_scale(scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sc(n: i128, d: i128, p: u64) -> PAdicScalar {
        PAdicScalar::from_rational(n, d, p, 20).unwrap()
    }

    #[test]
    fn unit_lattice_indicator_is_fourier_fixed() {
        for p in [3u64, 5] {
            for n in [1usize, 2] {
                let f = SchwartzFunction::lattice_indicator(p, n, 0);
                assert_eq!(f.fourier(), f, "1_O^n should be self-dual, p={} n={}", p, n);
            }
        }
    }

    #[test]
    fn zero_transforms_to_zero() {
        let f = SchwartzFunction::zero(5, 2);
        assert!(f.fourier().is_zero());
    }

    #[test]
    fn shrunk_lattice_transforms_to_scaled_grown_lattice() {
        // oracle: direct finite sum over p^{-1}O/pO of sigma(lx) for each l
        let p = 5u64;
        let f = SchwartzFunction::lattice_indicator(p, 1, 1);
        let g = f.fourier();
        let expected = SchwartzFunction::lattice_indicator(p, 1, -1)
            .scale_rational(&BigRational::new(BigInt::one(), BigInt::from(p)));
        // measure tags differ by design (dual measure), compare tables
        assert_eq!(g.window(), expected.window());
        assert_eq!(g.table(), expected.table());
    }

    #[test]
    fn double_transform_negates_argument() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in [3u64, 5, 7] {
            for n in [1usize, 2] {
                let f = random_function(&mut rng, p, n, 2, 2);
                let ff = f.fourier().fourier();
                assert_eq!(ff.window(), f.window());
                assert_eq!(ff.table(), f.negate_argument().table());
            }
        }
    }

    #[test]
    fn inversion_check_on_modulated_indicator() {
        let p = 5u64;
        let f = SchwartzFunction::lattice_indicator(p, 1, 0)
            .modulate(&[sc(3, 25, p)])
            .unwrap();
        let (lhs, rhs) = f.inversion_check().unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(lhs, CyclotomicValue::one(p));
    }

    #[test]
    fn parseval_exact_on_random_suite() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [3u64, 7] {
            let f = random_function(&mut rng, p, 2, 2, 1);
            let fh = f.fourier();
            let lhs = {
                let mut acc = CyclotomicValue::zero(p);
                for v in f.table().values() {
                    acc = acc.add(&v.mul(&v.conj()));
                }
                acc.scale(&f.coset_volume())
            };
            let rhs = {
                let mut acc = CyclotomicValue::zero(p);
                for v in fh.table().values() {
                    acc = acc.add(&v.mul(&v.conj()));
                }
                acc.scale(&fh.coset_volume())
            };
            assert_eq!(lhs, rhs, "Parseval failed for p={}", p);
        }
    }

    #[test]
    fn convolution_identity_element() {
        let p = 3u64;
        let e = SchwartzFunction::lattice_indicator(p, 1, 0);
        assert_eq!(e.convolve(&e).unwrap(), e);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_function(&mut rng, p, 1, 1, 1);
        // smoothing by the normalized indicator of p^m O is the identity
        let m = f.window().inner;
        let unit = SchwartzFunction::lattice_indicator(p, 1, m)
            .scale_rational(&rational_power(p, m as i64));
        assert_eq!(f.convolve(&unit).unwrap(), f);
        assert!(f.convolve(&SchwartzFunction::zero(p, 1)).unwrap().is_zero());
    }

    #[test]
    fn convolution_theorem_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for p in [3u64, 5] {
            let f = random_function(&mut rng, p, 1, 1, 1);
            let g = random_function(&mut rng, p, 1, 1, 1);
            let lhs = f.convolve(&g).unwrap().fourier();
            let rhs = f.fourier().pointwise_mul(&g.fourier()).unwrap();
            assert_eq!(lhs, rhs, "convolution theorem failed for p={}", p);
        }
    }

    #[test]
    fn fiber_integration_matches_restricted_transform() {
        let p = 3u64;
        // W = first axis of k^2, f = 1_{O^2}: both sides are 1_O
        let f = SchwartzFunction::lattice_indicator(p, 2, 0);
        let w = vec![vec![sc(1, 1, p), sc(0, 1, p)]];
        let lhs = fiber_integrate_annihilator(&f.fourier(), &w).unwrap();
        let rhs = restrict_to_subspace(&f, &w).unwrap().fourier();
        assert_eq!(lhs.table(), rhs.table());
        assert_eq!(lhs.window(), rhs.window());
        // a skew subspace with a random function
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_function(&mut rng, p, 2, 1, 1);
        let w = vec![vec![sc(1, 1, p), sc(2, 3, p)]];
        let lhs = fiber_integrate_annihilator(&f.fourier(), &w).unwrap();
        let rhs = restrict_to_subspace(&f, &w).unwrap().fourier();
        assert_eq!(lhs.table(), rhs.table());
        assert_eq!(lhs.window(), rhs.window());
    }

    #[test]
    fn trivial_subspace_cases() {
        let p = 5u64;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_function(&mut rng, p, 2, 1, 1);
        // W = V: fiber integration is the identity
        let full = vec![
            vec![sc(1, 1, p), sc(0, 1, p)],
            vec![sc(0, 1, p), sc(1, 1, p)],
        ];
        let lhs = fiber_integrate_annihilator(&f.fourier(), &full).unwrap();
        assert_eq!(lhs.table(), f.fourier().table());
        // W = 0: the result is the constant f-hat total integral = f(0)... on k^0
        let lhs = fiber_integrate_annihilator(&f.fourier(), &[]).unwrap();
        let total = f.fourier().integral();
        if total.is_zero() {
            assert!(lhs.is_zero());
        } else {
            assert_eq!(lhs.table().get(&vec![]).unwrap(), &total);
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let f = random_function(&mut rng, 7, 2, 2, 1)
            .modulate(&[sc(1, 7, 7), sc(3, 49, 7)])
            .unwrap();
        let j = f.to_json_value();
        let g = SchwartzFunction::from_json_value(&j).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn dependent_basis_is_rejected() {
        let p = 3u64;
        let f = SchwartzFunction::lattice_indicator(p, 2, 0);
        let w = vec![
            vec![sc(1, 1, p), sc(2, 1, p)],
            vec![sc(2, 1, p), sc(4, 1, p)],
        ];
        assert!(restrict_to_subspace(&f, &w).is_err());
    }
}
