//! Lattice models of Heisenberg group representations over Q_p.
//!
//! The Heisenberg group H = V x k on a symplectic space (V, B) has, for each
//! nonzero central parameter a0, a unique irreducible representation with
//! central character t -> sigma(a0 t).  We realize it on functions on V/r for
//! a lattice r that is self dual under a0 B, acting by
//!
//!   pi(w, t) f(v) = sigma(a0 (t + B(v, w)/2 - B(m, u)/2)) f(u),
//!
//! where v + w = u + m with m in r.  Symplectic maps stabilizing r act by
//! plain substitution, and the module computes exact traces of these actions
//! smeared against Schwartz densities: both directly (a stabilized sum over
//! V/r) and through explicit operator matrices on a coset grid.
//!
//! The two payoff identities are trace formulas: at the identity the trace of
//! pi(phi) equals a scaled integral of the Fourier transform of phi over a
//! single hyperplane, and at a semisimple s with det(1 - s) != 0 the smeared
//! twisted trace factors through a modulus-one constant times the central
//! integral of the test density.

use crate::cyclotomic::CyclotomicValue;
use crate::error::Error;
use crate::linalg::{dot, MatK};
use crate::padic::{max_precision, pow_u64, PAdicScalar};
use crate::schwartz::{rational_power, SchwartzFunction, Window};
use crate::weil::{cayley_form, weil_index, AlternatingForm};
use crate::Result;
use num::{BigRational, One};
use std::collections::BTreeMap;

/// How far the stabilized trace sums are allowed to climb before giving up.
const TRACE_MAX_LEVEL: i32 = 10;

/// Group element (v, t) of H = V x k, in standard symplectic coordinates.
#[derive(Clone, Debug)]
pub struct HeisenbergElement {
    pub v: Vec<PAdicScalar>,
    pub t: PAdicScalar,
}

/// A lattice r in V that is self dual for the pairing a0 B, given by a basis
/// matrix whose columns span r over the integers.
#[derive(Clone, Debug)]
pub struct SelfDualLattice {
    pub basis: MatK,
    pub label: String,
}

fn matrix_is_integral(m: &MatK) -> bool {
    (0..m.n_rows()).all(|i| (0..m.n_cols()).all(|j| m.get(i, j).valuation_bound() >= 0))
}

/// Direct self-duality test: the a0 B dual of the column span of `basis`
/// equals the span itself.
pub fn lattice_is_self_dual(
    form: &AlternatingForm,
    basis: &MatK,
    a0: &PAdicScalar,
) -> Result<bool> {
    // dual basis: columns of (a0 B' basis)^{-1} with B' the transposed Gram
    let m = basis.transpose().mul(&form.matrix().transpose()).scale(a0);
    let dual = m.inverse()?;
    let fwd = basis.inverse()?.mul(&dual);
    let bwd = dual.inverse()?.mul(basis);
    Ok(matrix_is_integral(&fwd) && matrix_is_integral(&bwd))
}

/// Pick the balanced scaled coordinate lattice p^{je} O^n + p^{jf} O^n with
/// je + jf = -v(a0), then verify self-duality rather than trusting the
/// exponent arithmetic.
pub fn find_self_dual_lattice(
    form: &AlternatingForm,
    a0: &PAdicScalar,
) -> Result<SelfDualLattice> {
    let prime = form.prime();
    let prec = max_precision(prime);
    let n = form.dim() / 2;
    let v0 = a0
        .valuation()?
        .ok_or_else(|| Error::InvalidInput("central parameter a0 = 0".into()))?;
    let je = (-v0).div_euclid(2);
    let jf = -v0 - je;
    let mut basis = MatK::zero(2 * n, 2 * n, prime);
    for i in 0..n {
        basis.set(i, i, PAdicScalar::uniformizer_pow(je, prime, prec));
        basis.set(n + i, n + i, PAdicScalar::uniformizer_pow(jf, prime, prec));
    }
    if !lattice_is_self_dual(form, &basis, a0)? {
        return Err(Error::InvalidInput(format!(
            "scaled coordinate lattice (p^{}, p^{}) is not self dual",
            je, jf
        )));
    }
    Ok(SelfDualLattice {
        basis,
        label: format!("p^{} e-block, p^{} f-block", je, jf),
    })
}

/// Everything needed to act: the symplectic form, the central parameter, the
/// chosen self-dual lattice and its coordinates.
#[derive(Clone, Debug)]
pub struct LatticeModel {
    prime: u64,
    n: usize,
    a0: PAdicScalar,
    form: AlternatingForm,
    lattice: SelfDualLattice,
    basis_inv: MatK,
    /// Gram matrix of B in lattice coordinates.
    gram: MatK,
    half: PAdicScalar,
}

impl LatticeModel {
    pub fn new(n: usize, prime: u64, a0: PAdicScalar) -> Result<Self> {
        assert_eq!(a0.prime(), prime);
        let prec = max_precision(prime);
        let form = AlternatingForm::standard_symplectic(n, prime);
        let lattice = find_self_dual_lattice(&form, &a0)?;
        let basis_inv = lattice.basis.inverse()?;
        let gram = lattice
            .basis
            .transpose()
            .mul(form.matrix())
            .mul(&lattice.basis);
        let half = PAdicScalar::from_rational(1, 2, prime, prec)?;
        Ok(LatticeModel {
            prime,
            n,
            a0,
            form,
            lattice,
            basis_inv,
            gram,
            half,
        })
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn half_rank(&self) -> usize {
        self.n
    }

    pub fn central_parameter(&self) -> &PAdicScalar {
        &self.a0
    }

    pub fn form(&self) -> &AlternatingForm {
        &self.form
    }

    pub fn lattice(&self) -> &SelfDualLattice {
        &self.lattice
    }

    pub fn identity(&self) -> HeisenbergElement {
        HeisenbergElement {
            v: vec![PAdicScalar::zero(self.prime); 2 * self.n],
            t: PAdicScalar::zero(self.prime),
        }
    }

    /// Group law (v, t)(v', t') = (v + v', t + t' + B(v, v')/2).
    pub fn group_mul(&self, a: &HeisenbergElement, b: &HeisenbergElement) -> HeisenbergElement {
        let v: Vec<PAdicScalar> = a.v.iter().zip(&b.v).map(|(x, y)| x.add(y)).collect();
        let t = a
            .t
            .add(&b.t)
            .add(&self.half.mul(&self.form.eval(&a.v, &b.v)));
        HeisenbergElement { v, t }
    }

    pub fn group_inv(&self, a: &HeisenbergElement) -> HeisenbergElement {
        HeisenbergElement {
            v: a.v.iter().map(|x| x.neg()).collect(),
            t: a.t.neg(),
        }
    }

    fn by(&self, x: &[PAdicScalar], y: &[PAdicScalar]) -> PAdicScalar {
        dot(x, &self.gram.mul_vec(y))
    }

    /// sigma(x) for an exact scalar; the certified valuation bound picks the
    /// conductor, so cancelled-but-small scalars evaluate cleanly to 1.
    fn character_of(&self, x: &PAdicScalar) -> Result<CyclotomicValue> {
        let lev = (-x.valuation_bound()).max(0);
        if lev == 0 {
            return Ok(CyclotomicValue::one(self.prime));
        }
        let c = x.shifted_code(lev, lev as u32)?;
        Ok(CyclotomicValue::root_p(self.prime, c as i128, lev as u32))
    }

    fn central_phase(&self, t: &PAdicScalar) -> Result<CyclotomicValue> {
        self.character_of(&self.a0.mul(t))
    }

    fn lattice_coords(&self, v: &[PAdicScalar]) -> Vec<PAdicScalar> {
        self.basis_inv.mul_vec(v)
    }

    fn reduce(&self, y: &[PAdicScalar], level: u32) -> Result<Vec<u64>> {
        y.iter()
            .map(|x| x.shifted_code(level as i64, level))
            .collect()
    }

    fn grid_point(&self, codes: &[u64], level: u32) -> Vec<PAdicScalar> {
        codes
            .iter()
            .map(|&c| PAdicScalar::from_code(c, level as i64, self.prime, max_precision(self.prime)))
            .collect()
    }
}

/// Model vector: values on the grid p^{-level} r / r, extended to cosets of r
/// by the covariance f(u + m) = sigma(a0 B(u, m)/2) f(u).
#[derive(Clone, Debug)]
pub struct LatticeVector {
    prime: u64,
    level: u32,
    table: BTreeMap<Vec<u64>, CyclotomicValue>,
}

impl LatticeVector {
    pub fn zero(prime: u64) -> Self {
        LatticeVector { prime, level: 0, table: BTreeMap::new() }
    }

    pub fn delta(model: &LatticeModel, level: u32, codes: Vec<u64>) -> Self {
        assert_eq!(codes.len(), 2 * model.n);
        let cap = pow_u64(model.prime, level);
        assert!(codes.iter().all(|&c| c < cap));
        let mut table = BTreeMap::new();
        table.insert(codes, CyclotomicValue::one(model.prime));
        LatticeVector { prime: model.prime, level, table }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn table(&self) -> &BTreeMap<Vec<u64>, CyclotomicValue> {
        &self.table
    }

    pub fn is_zero(&self) -> bool {
        self.table.values().all(|v| v.is_zero())
    }

    /// Same vector on a finer grid; the extra points are not in the support.
    pub fn at_level(&self, level: u32) -> Self {
        assert!(level >= self.level);
        let f = pow_u64(self.prime, level - self.level);
        LatticeVector {
            prime: self.prime,
            level,
            table: self
                .table
                .iter()
                .map(|(code, v)| (code.iter().map(|&c| c * f).collect(), v.clone()))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let level = self.level.max(other.level);
        let a = self.at_level(level);
        let b = other.at_level(level);
        let mut table = a.table;
        for (code, v) in b.table {
            let entry = table.entry(code).or_insert_with(|| CyclotomicValue::zero(self.prime));
            *entry = entry.add(&v);
        }
        LatticeVector { prime: self.prime, level, table }
    }

    pub fn scale(&self, c: &CyclotomicValue) -> Self {
        LatticeVector {
            prime: self.prime,
            level: self.level,
            table: self.table.iter().map(|(k, v)| (k.clone(), v.mul(c))).collect(),
        }
    }

    /// Value at an arbitrary point of p^{-infty} r, through the covariance.
    pub fn evaluate(&self, model: &LatticeModel, y: &[PAdicScalar]) -> Result<CyclotomicValue> {
        let need = y
            .iter()
            .map(|x| (-x.valuation_bound()).max(0))
            .max()
            .unwrap_or(0) as u32;
        let level = self.level.max(need);
        let g = self.at_level(level);
        let codes = model.reduce(y, level)?;
        let val = match g.table.get(&codes) {
            Some(v) => v.clone(),
            None => return Ok(CyclotomicValue::zero(self.prime)),
        };
        let u = model.grid_point(&codes, level);
        let m: Vec<PAdicScalar> = y.iter().zip(&u).map(|(a, b)| a.sub(b)).collect();
        let cocycle = model.central_phase(&model.half.mul(&model.by(&u, &m)))?;
        Ok(val.mul(&cocycle))
    }

    /// Counting-measure pairing sum f conj(g); independent of the grid level.
    pub fn inner(&self, other: &Self) -> CyclotomicValue {
        let level = self.level.max(other.level);
        let a = self.at_level(level);
        let b = other.at_level(level);
        let mut acc = CyclotomicValue::zero(self.prime);
        for (code, v) in &a.table {
            if let Some(w) = b.table.get(code) {
                acc = acc.add(&v.mul(&w.conj()));
            }
        }
        acc
    }
}

impl LatticeModel {
    /// pi(w, t) f, exactly, on a grid fine enough for the translation.
    pub fn heisenberg_action(
        &self,
        h: &HeisenbergElement,
        f: &LatticeVector,
    ) -> Result<LatticeVector> {
        let w = self.lattice_coords(&h.v);
        let need = w
            .iter()
            .map(|x| (-x.valuation_bound()).max(0))
            .max()
            .unwrap_or(0) as u32;
        let level = f.level.max(need);
        let g = f.at_level(level);
        let mut table = BTreeMap::new();
        for (codes, val) in &g.table {
            let u = self.grid_point(codes, level);
            let shifted: Vec<PAdicScalar> = u.iter().zip(&w).map(|(a, b)| a.sub(b)).collect();
            let out_codes = self.reduce(&shifted, level)?;
            let x = self.grid_point(&out_codes, level);
            // x + w = u + m with m in r
            let m: Vec<PAdicScalar> = x
                .iter()
                .zip(&w)
                .zip(&u)
                .map(|((a, b), c)| a.add(b).sub(c))
                .collect();
            let arg = h
                .t
                .add(&self.half.mul(&self.by(&x, &w)))
                .sub(&self.half.mul(&self.by(&m, &u)));
            let phase = self.central_phase(&arg)?;
            let entry = table
                .entry(out_codes)
                .or_insert_with(|| CyclotomicValue::zero(self.prime));
            *entry = entry.add(&phase.mul(val));
        }
        let mut out = LatticeVector { prime: self.prime, level, table };
        out.table.retain(|_, v| !v.is_zero());
        Ok(out)
    }

    /// Does the symplectic map (standard coordinates) stabilize the lattice?
    pub fn stabilizes_lattice(&self, s: &MatK) -> Result<bool> {
        let sy = self.basis_inv.mul(s).mul(&self.lattice.basis);
        Ok(matrix_is_integral(&sy) && matrix_is_integral(&sy.inverse()?))
    }

    /// sigma(s) f = f(s^{-1} .) for s stabilizing the lattice.
    pub fn symplectic_action(&self, s: &MatK, f: &LatticeVector) -> Result<LatticeVector> {
        if !self.stabilizes_lattice(s)? {
            return Err(Error::InvalidInput(
                "symplectic map does not stabilize the model lattice".into(),
            ));
        }
        let sy = self.basis_inv.mul(s).mul(&self.lattice.basis);
        let sy_inv = sy.inverse()?;
        let level = f.level;
        let mut table = BTreeMap::new();
        for codes in f.table.keys() {
            let u = self.grid_point(codes, level);
            let out_codes = self.reduce(&sy.mul_vec(&u), level)?;
            let x = self.grid_point(&out_codes, level);
            let val = f.evaluate(self, &sy_inv.mul_vec(&x))?;
            table.insert(out_codes, val);
        }
        let mut out = LatticeVector { prime: self.prime, level, table };
        out.table.retain(|_, v| !v.is_zero());
        Ok(out)
    }
}

// ----- operators on a fixed coset grid -----

/// Dense matrix of an operator on functions supported on p^{-level} r / r.
#[derive(Clone, Debug)]
pub struct LatticeOperator {
    prime: u64,
    n: usize,
    level: u32,
    mat: Vec<Vec<CyclotomicValue>>,
}

fn code_index(codes: &[u64], prime: u64, level: u32) -> usize {
    let step = pow_u64(prime, level) as usize;
    codes.iter().fold(0usize, |acc, &c| acc * step + c as usize)
}

fn index_code(mut idx: usize, dim: usize, prime: u64, level: u32) -> Vec<u64> {
    let step = pow_u64(prime, level) as usize;
    let mut codes = vec![0u64; dim];
    for slot in codes.iter_mut().rev() {
        *slot = (idx % step) as u64;
        idx /= step;
    }
    codes
}

impl LatticeOperator {
    pub fn dimension(&self) -> usize {
        self.mat.len()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Matrix of a linear map given by its action on basis deltas.  Fails if
    /// the image leaks off the chosen grid.
    pub fn of_map<F>(model: &LatticeModel, level: u32, f: F) -> Result<Self>
    where
        F: Fn(&LatticeVector) -> Result<LatticeVector>,
    {
        let dim = 2 * model.n;
        let size = (pow_u64(model.prime, level) as usize).pow(dim as u32);
        let mut mat = vec![vec![CyclotomicValue::zero(model.prime); size]; size];
        for col in 0..size {
            let codes = index_code(col, dim, model.prime, level);
            let image = f(&LatticeVector::delta(model, level, codes))?;
            let drop = image.level.saturating_sub(level);
            let factor = pow_u64(model.prime, drop);
            for (ic, v) in &image.table {
                if ic.iter().any(|&c| c % factor != 0) {
                    return Err(Error::WindowOutOfRange(
                        "operator image leaves the coset grid; enlarge the level".into(),
                    ));
                }
                let coarse: Vec<u64> = ic.iter().map(|&c| c / factor).collect();
                let row = code_index(&coarse, model.prime, level);
                mat[row][col] = mat[row][col].add(v);
            }
        }
        Ok(LatticeOperator { prime: model.prime, n: model.n, level, mat })
    }

    pub fn identity(model: &LatticeModel, level: u32) -> Self {
        let dim = 2 * model.n;
        let size = (pow_u64(model.prime, level) as usize).pow(dim as u32);
        let mut mat = vec![vec![CyclotomicValue::zero(model.prime); size]; size];
        for (i, row) in mat.iter_mut().enumerate() {
            row[i] = CyclotomicValue::one(model.prime);
        }
        LatticeOperator { prime: model.prime, n: model.n, level, mat }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.level, other.level);
        let size = self.mat.len();
        let mut mat = vec![vec![CyclotomicValue::zero(self.prime); size]; size];
        for i in 0..size {
            for (k, aik) in self.mat[i].iter().enumerate() {
                if aik.is_zero() {
                    continue;
                }
                for (j, bkj) in other.mat[k].iter().enumerate() {
                    if bkj.is_zero() {
                        continue;
                    }
                    mat[i][j] = mat[i][j].add(&aik.mul(bkj));
                }
            }
        }
        LatticeOperator { prime: self.prime, n: self.n, level: self.level, mat }
    }

    pub fn adjoint(&self) -> Self {
        let size = self.mat.len();
        let mut mat = vec![vec![CyclotomicValue::zero(self.prime); size]; size];
        for i in 0..size {
            for j in 0..size {
                mat[i][j] = self.mat[j][i].conj();
            }
        }
        LatticeOperator { prime: self.prime, n: self.n, level: self.level, mat }
    }

    pub fn trace(&self) -> CyclotomicValue {
        let mut acc = CyclotomicValue::zero(self.prime);
        for (i, row) in self.mat.iter().enumerate() {
            acc = acc.add(&row[i]);
        }
        acc
    }

    pub fn apply(&self, model: &LatticeModel, f: &LatticeVector) -> Result<LatticeVector> {
        let g = f.at_level(self.level);
        let dim = 2 * model.n;
        let size = self.mat.len();
        let mut out = LatticeVector { prime: self.prime, level: self.level, table: BTreeMap::new() };
        for (codes, v) in &g.table {
            let col = code_index(codes, self.prime, self.level);
            for row in 0..size {
                let a = &self.mat[row][col];
                if a.is_zero() {
                    continue;
                }
                let rc = index_code(row, dim, self.prime, self.level);
                let entry = out
                    .table
                    .entry(rc)
                    .or_insert_with(|| CyclotomicValue::zero(self.prime));
                *entry = entry.add(&a.mul(v));
            }
        }
        out.table.retain(|_, v| !v.is_zero());
        Ok(out)
    }

    pub fn approx_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.level, other.level);
        let mut best = 0f64;
        for (ra, rb) in self.mat.iter().zip(&other.mat) {
            for (a, b) in ra.iter().zip(rb) {
                best = best.max(a.approx_distance(b));
            }
        }
        best
    }
}

// ----- smeared actions and traces -----

impl LatticeModel {
    /// Partial Fourier transform of a density phi(v, t) on H against the
    /// central character, pulled to lattice coordinates:
    /// returns (phi~ on 2n axes, |det basis| measure factor).
    fn reduced_density(&self, phi: &SchwartzFunction) -> Result<(SchwartzFunction, BigRational)> {
        assert_eq!(phi.dim(), 2 * self.n + 1);
        assert_eq!(phi.prime(), self.prime);
        if !phi.scale().is_one() {
            return Err(Error::InvalidInput(
                "density must carry the self-dual Haar tag".into(),
            ));
        }
        let prec = max_precision(self.prime);
        let dim = 2 * self.n + 1;
        let mut a = MatK::identity(dim, self.prime, prec);
        for i in 0..2 * self.n {
            for j in 0..2 * self.n {
                a.set(i, j, self.lattice.basis.get(i, j).clone());
            }
        }
        let pulled = phi.substitute(&a)?;
        let mut l = vec![PAdicScalar::zero(self.prime); dim];
        l[dim - 1] = self.a0.clone();
        let twisted = pulled.modulate(&l)?;
        let reduced = twisted.integrate_out_last(1, &BigRational::one());
        let det_abs = self.lattice.basis.det()?.abs_p()?;
        Ok((reduced, det_abs))
    }

    /// pi(phi) f = int phi(v, t) pi(v, t) f dv dt as one finite sum.
    pub fn action_of_density(
        &self,
        phi: &SchwartzFunction,
        f: &LatticeVector,
    ) -> Result<LatticeVector> {
        assert_eq!(phi.dim(), 2 * self.n + 1);
        // cells must be fine enough that pi is constant on each: the phases
        // pair cell offsets against the grid, so match the grid level
        let need = (f.level as i32)
            .max(-self.a0.valuation()?.unwrap_or(0) as i32)
            .max(phi.window().inner);
        let w = Window { outer: phi.window().outer, inner: need };
        let g = phi.refine(w);
        let vol = g.coset_volume();
        let mut acc = LatticeVector::zero(self.prime);
        for (codes, val) in g.table() {
            let point = g.rep_point(codes);
            let h = HeisenbergElement {
                v: point[..2 * self.n].to_vec(),
                t: point[2 * self.n].clone(),
            };
            let moved = self.heisenberg_action(&h, f)?;
            acc = acc.add(&moved.scale(&val.scale(&vol)));
        }
        acc.table.retain(|_, v| !v.is_zero());
        Ok(acc)
    }

    /// Matrix of pi(phi) on the level grid.  One pass over the cells of phi:
    /// each pi(w, t) is a phase permutation of the grid, accumulated in place.
    pub fn operator_of_density(
        &self,
        phi: &SchwartzFunction,
        level: u32,
    ) -> Result<LatticeOperator> {
        assert_eq!(phi.dim(), 2 * self.n + 1);
        let need = (level as i32)
            .max(-self.a0.valuation()?.unwrap_or(0) as i32)
            .max(phi.window().inner);
        let w = Window { outer: phi.window().outer, inner: need };
        let g = phi.refine(w);
        let vol = g.coset_volume();
        let dim = 2 * self.n;
        let size = (pow_u64(self.prime, level) as usize).pow(dim as u32);
        let grid: Vec<Vec<PAdicScalar>> = (0..size)
            .map(|i| self.grid_point(&index_code(i, dim, self.prime, level), level))
            .collect();
        let mut mat = vec![vec![CyclotomicValue::zero(self.prime); size]; size];
        for (codes, val) in g.table() {
            let point = g.rep_point(codes);
            let wv = self.lattice_coords(&point[..dim]);
            if wv.iter().any(|x| x.valuation_bound() < -(level as i64)) {
                return Err(Error::WindowOutOfRange(
                    "translation leaves the coset grid; enlarge the level".into(),
                ));
            }
            let t = &point[dim];
            let weight = val.scale(&vol);
            for (col, u) in grid.iter().enumerate() {
                let shifted: Vec<PAdicScalar> =
                    u.iter().zip(&wv).map(|(a, b)| a.sub(b)).collect();
                let out_codes = self.reduce(&shifted, level)?;
                let x = self.grid_point(&out_codes, level);
                let m: Vec<PAdicScalar> = x
                    .iter()
                    .zip(&wv)
                    .zip(u)
                    .map(|((a, b), c)| a.add(b).sub(c))
                    .collect();
                let arg = t
                    .add(&self.half.mul(&self.by(&x, &wv)))
                    .sub(&self.half.mul(&self.by(&m, u)));
                let phase = self.central_phase(&arg)?;
                let row = code_index(&out_codes, self.prime, level);
                mat[row][col] = mat[row][col].add(&phase.mul(&weight));
            }
        }
        Ok(LatticeOperator { prime: self.prime, n: self.n, level, mat })
    }

    /// One shell of the diagonal sum for tr pi(phi): cells of the reduced
    /// density against the grid p^{-level} r / r, where the inner character
    /// sum over the grid collapses to a divisibility condition.
    fn trace_shell(
        &self,
        reduced: &SchwartzFunction,
        det_abs: &BigRational,
        level: u32,
    ) -> Result<CyclotomicValue> {
        // only w in r meets the diagonal: restrict to the integral slice
        // before refining, so the fine table stays small
        let w0 = reduced.window();
        let base = reduced.refine(Window { outer: w0.outer, inner: w0.inner.max(0) });
        let w = base.window();
        let shift = pow_u64(self.prime, w.outer as u32);
        let integral: Vec<(Vec<u64>, CyclotomicValue)> = base
            .table()
            .iter()
            .filter(|(codes, _)| codes.iter().all(|&c| c % shift == 0))
            .map(|(codes, v)| (codes.iter().map(|&c| c / shift).collect(), v.clone()))
            .collect();
        let slice = SchwartzFunction::from_entries(
            self.prime,
            2 * self.n,
            Window { outer: 0, inner: w.inner },
            integral,
        )?;
        let g = slice.refine(Window { outer: 0, inner: w.inner.max(level as i32) });
        let vol = g.coset_volume();
        let mut acc = CyclotomicValue::zero(self.prime);
        for (codes, val) in g.table() {
            let point = g.rep_point(codes);
            let z = self.gram.mul_vec(&point);
            let mut full = true;
            for zi in &z {
                if self.a0.mul(zi).valuation_bound() < level as i64 {
                    full = false;
                    break;
                }
            }
            if !full {
                continue;
            }
            acc = acc.add(val);
        }
        let weight = vol * det_abs * rational_power(self.prime, 2 * self.n as i64 * level as i64);
        Ok(acc.scale(&weight))
    }

    /// tr pi(phi): the diagonal sum over V/r, stabilized over grid levels.
    pub fn trace_of_density(&self, phi: &SchwartzFunction) -> Result<(CyclotomicValue, i32)> {
        let (reduced, det_abs) = self.reduced_density(phi)?;
        if reduced.is_zero() {
            return Ok((CyclotomicValue::zero(self.prime), 0));
        }
        let mut prev = self.trace_shell(&reduced, &det_abs, 1)?;
        for level in 1..TRACE_MAX_LEVEL {
            let next = self.trace_shell(&reduced, &det_abs, level as u32 + 1)?;
            if next == prev {
                return Ok((prev, level));
            }
            prev = next;
        }
        Err(Error::StabilizationFailed(
            "diagonal trace sum did not stabilize".into(),
        ))
    }

    /// tr sigma(s) pi(w, t) as a sum over V/r: the diagonal meets the grid in
    /// the solutions of (1 - s^{-1}) v = w mod r.  When 1 - s^{-1} is a unit
    /// on the lattice the solution is unique and the sum is a single phase.
    /// Integral inverse of 1 - s^{-1} in lattice coordinates, when it exists;
    /// hoisted out of the per-point trace because it never changes per shell.
    fn unit_cayley(&self, sy_inv: &MatK) -> Option<MatK> {
        let prec = max_precision(self.prime);
        let one = MatK::identity(2 * self.n, self.prime, prec);
        let a = one.sub(sy_inv);
        match a.inverse() {
            Ok(inv) if matrix_is_integral(&a) && matrix_is_integral(&inv) => Some(inv),
            _ => None,
        }
    }

    fn twisted_point_trace(
        &self,
        sy_inv: &MatK,
        unit: Option<&MatK>,
        w: &[PAdicScalar],
        t: &PAdicScalar,
        level: u32,
    ) -> Result<CyclotomicValue> {
        let (lev, candidates): (u32, Vec<Vec<u64>>) = match &unit {
            Some(inv) => {
                let sol = inv.mul_vec(w);
                let need = sol
                    .iter()
                    .map(|x| (-x.valuation_bound()).max(0))
                    .max()
                    .unwrap_or(0) as u32;
                let lev = level.max(need);
                (lev, vec![self.reduce(&sol, lev)?])
            }
            None => {
                let dim = 2 * self.n;
                let size = (pow_u64(self.prime, level) as usize).pow(dim as u32);
                (
                    level,
                    (0..size)
                        .map(|i| index_code(i, dim, self.prime, level))
                        .collect(),
                )
            }
        };
        let mut acc = CyclotomicValue::zero(self.prime);
        for codes in candidates {
            let v = self.grid_point(&codes, lev);
            let pre = sy_inv.mul_vec(&v);
            let shifted: Vec<PAdicScalar> = pre.iter().zip(w).map(|(a, b)| a.add(b)).collect();
            if self.reduce(&shifted, lev)? != codes {
                continue;
            }
            let m: Vec<PAdicScalar> = shifted.iter().zip(&v).map(|(a, b)| a.sub(b)).collect();
            let arg = t
                .add(&self.half.mul(&self.by(&pre, w)))
                .sub(&self.half.mul(&self.by(&m, &v)));
            acc = acc.add(&self.central_phase(&arg)?);
        }
        Ok(acc)
    }

    fn twisted_trace_shell(
        &self,
        sy_inv: &MatK,
        unit: Option<&MatK>,
        reduced: &SchwartzFunction,
        det_abs: &BigRational,
        level: u32,
    ) -> Result<CyclotomicValue> {
        let w = reduced.window();
        let g = reduced.refine(Window { outer: w.outer, inner: w.inner.max(level as i32) });
        let vol = g.coset_volume();
        let zero_t = PAdicScalar::zero(self.prime);
        let mut acc = CyclotomicValue::zero(self.prime);
        for (codes, val) in g.table() {
            let point = g.rep_point(codes);
            let phase = self.twisted_point_trace(sy_inv, unit, &point, &zero_t, level)?;
            acc = acc.add(&phase.mul(val));
        }
        Ok(acc.scale(&(vol * det_abs)))
    }

    /// tr sigma(s) pi(phi), stabilized over grid levels.
    pub fn twisted_trace_of_density(
        &self,
        s: &MatK,
        phi: &SchwartzFunction,
    ) -> Result<(CyclotomicValue, i32)> {
        if !self.stabilizes_lattice(s)? {
            return Err(Error::InvalidInput(
                "symplectic map does not stabilize the model lattice".into(),
            ));
        }
        let sy = self.basis_inv.mul(s).mul(&self.lattice.basis);
        let sy_inv = sy.inverse()?;
        let unit = self.unit_cayley(&sy_inv);
        let (reduced, det_abs) = self.reduced_density(phi)?;
        if reduced.is_zero() {
            return Ok((CyclotomicValue::zero(self.prime), 0));
        }
        let mut prev = self.twisted_trace_shell(&sy_inv, unit.as_ref(), &reduced, &det_abs, 1)?;
        for level in 1..TRACE_MAX_LEVEL {
            let next =
                self.twisted_trace_shell(&sy_inv, unit.as_ref(), &reduced, &det_abs, level as u32 + 1)?;
            if next == prev {
                return Ok((prev, level));
            }
            prev = next;
        }
        Err(Error::StabilizationFailed(
            "twisted diagonal trace sum did not stabilize".into(),
        ))
    }
}

// ----- the twisted character and the fixed point identities -----

/// Modulus-one twisted character value with the level at which its defining
/// sum stabilized.
#[derive(Clone, Debug)]
pub struct TwistedCharacterValue {
    pub value: CyclotomicValue,
    pub stabilization_level: i32,
}

impl LatticeModel {
    /// One level of the averaged twisted trace defining the character:
    /// sum over v in p^{shift} r (cells at `level`) of
    /// tr sigma(s) pi((s^{-1} - 1) v, -B(s^{-1} v, v)/2), normalized.
    fn character_shell(
        &self,
        s: &MatK,
        shift: u32,
        level: u32,
    ) -> Result<CyclotomicValue> {
        assert!(level >= shift);
        let sy = self.basis_inv.mul(s).mul(&self.lattice.basis);
        let sy_inv = sy.inverse()?;
        let unit = self.unit_cayley(&sy_inv);
        let prec = max_precision(self.prime);
        let one = MatK::identity(2 * self.n, self.prime, prec);
        let a = sy_inv.sub(&one);
        let dim = 2 * self.n;
        let step = pow_u64(self.prime, level - shift);
        let size = (step as usize).pow(dim as u32);
        let scale = PAdicScalar::uniformizer_pow(shift as i64, self.prime, prec);
        let mut acc = CyclotomicValue::zero(self.prime);
        for i in 0..size {
            let codes = {
                let mut idx = i;
                let mut c = vec![0u64; dim];
                for slot in c.iter_mut().rev() {
                    *slot = (idx % step as usize) as u64;
                    idx /= step as usize;
                }
                c
            };
            let v: Vec<PAdicScalar> = codes
                .iter()
                .map(|&c| {
                    PAdicScalar::from_integer(c as i128, self.prime, prec).mul(&scale)
                })
                .collect();
            let w = a.mul_vec(&v);
            let t = self
                .half
                .mul(&self.by(&sy_inv.mul_vec(&v), &v))
                .neg();
            let phase = self.twisted_point_trace(&sy_inv, unit.as_ref(), &w, &t, level)?;
            acc = acc.add(&phase);
        }
        // int over p^{shift} r of the normalized bump: weight q^{2n shift - 2n level}
        Ok(acc.scale(&rational_power(
            self.prime,
            2 * self.n as i64 * (shift as i64 - level as i64),
        )))
    }

    /// The twisted character at a semisimple s with det(1 - s) != 0: the
    /// averaged twisted trace times |det(1 - s)|^{1/2}.  `shift` picks the
    /// averaging bump p^{shift} r; the value is provably independent of it.
    pub fn twisted_character_with_bump(
        &self,
        s: &MatK,
        shift: u32,
    ) -> Result<TwistedCharacterValue> {
        let prec = max_precision(self.prime);
        let one = MatK::identity(2 * self.n, self.prime, prec);
        let det = one.sub(s).det()?;
        let det_abs = det.abs_p()?;
        if det_abs.is_one() && det.is_zero() {
            return Err(Error::InvalidInput("1 - s is singular".into()));
        }
        let sqrt = CyclotomicValue::sqrt_of_rational(self.prime, &det_abs)?;
        let mut prev = self.character_shell(s, shift, shift + 1)?;
        for k in 1..TRACE_MAX_LEVEL {
            let next = self.character_shell(s, shift, shift + 1 + k as u32)?;
            if next == prev {
                return Ok(TwistedCharacterValue {
                    value: prev.mul(&sqrt),
                    stabilization_level: k,
                });
            }
            prev = next;
        }
        Err(Error::StabilizationFailed(
            "twisted character sum did not stabilize".into(),
        ))
    }

    pub fn twisted_character(&self, s: &MatK) -> Result<TwistedCharacterValue> {
        self.twisted_character_with_bump(s, 0)
    }

    /// First lagrangian of the standard coordinate list that s moves off
    /// itself, usable for the Cayley form.
    fn transversal_lagrangian(&self, s: &MatK) -> Result<Vec<Vec<PAdicScalar>>> {
        let prec = max_precision(self.prime);
        let dim = 2 * self.n;
        if self.n != 1 {
            return Err(Error::InvalidInput(
                "lagrangian search is implemented for 2-dimensional V".into(),
            ));
        }
        let basis = |coeffs: &[i128]| -> Vec<PAdicScalar> {
            coeffs
                .iter()
                .map(|&c| PAdicScalar::from_integer(c, self.prime, prec))
                .collect()
        };
        let candidates: Vec<Vec<PAdicScalar>> =
            vec![basis(&[1, 0]), basis(&[0, 1]), basis(&[1, 1]), basis(&[1, -1])];
        for line in candidates {
            if cayley_form(&self.form, s, std::slice::from_ref(&line)).is_ok() {
                return Ok(vec![line]);
            }
        }
        let _ = dim;
        Err(Error::InvalidInput(
            "no coordinate lagrangian transversal to s".into(),
        ))
    }

    /// The closed character formula: lift sign times the conjugate Weil index
    /// of the Cayley form on a transversal lagrangian.  The sign is explicit
    /// lift metadata, not derived.
    pub fn character_formula(&self, s: &MatK, lift_sign: i32) -> Result<CyclotomicValue> {
        assert!(lift_sign == 1 || lift_sign == -1);
        let lagrangian = self.transversal_lagrangian(s)?;
        let q = cayley_form(&self.form, s, &lagrangian)?;
        let gamma = weil_index(&q, &self.a0)?.value;
        let conj = gamma.conj();
        Ok(if lift_sign == 1 { conj } else { conj.neg() })
    }

    /// Compare the lattice character with the Cayley formula route.  The two
    /// lifts differ by a unit which, for the lattice splitting, is a fourth
    /// root of unity; it is returned as metadata:
    /// (lattice character, conj Weil index, lattice value times index).
    pub fn character_lift_unit(
        &self,
        s: &MatK,
    ) -> Result<(TwistedCharacterValue, CyclotomicValue, CyclotomicValue)> {
        let chr = self.twisted_character(s)?;
        let conj = self.character_formula(s, 1)?;
        // both factors have modulus one, so conj(conj gamma) inverts it
        let ratio = chr.value.mul(&conj.conj());
        Ok((chr, conj, ratio))
    }
}

/// Both sides of the identity trace formula: tr pi(phi) against
/// |a0|^{-n} int phihat(xi, a0) dxi over the hyperplane at the central
/// frequency a0.
pub fn trace_formula_sides(
    model: &LatticeModel,
    phi: &SchwartzFunction,
) -> Result<(CyclotomicValue, CyclotomicValue, i32)> {
    let prime = model.prime;
    let (lhs, level) = model.trace_of_density(phi)?;
    if !phi.scale().is_one() {
        return Err(Error::InvalidInput(
            "density must carry the self-dual Haar tag".into(),
        ));
    }
    let fhat = phi.fourier();
    let w = fhat.window();
    let dim = 2 * model.n;
    let mut acc = CyclotomicValue::zero(prime);
    let mut xi = vec![PAdicScalar::zero(prime); dim + 1];
    xi[dim] = model.a0.clone();
    let cap = pow_u64(prime, w.digits());
    let mut codes = vec![0u64; dim];
    loop {
        for (i, &c) in codes.iter().enumerate() {
            xi[i] = PAdicScalar::from_code(c, w.outer as i64, prime, max_precision(prime));
        }
        acc = acc.add(&fhat.evaluate(&xi)?);
        let mut axis = 0;
        while axis < dim {
            codes[axis] += 1;
            if codes[axis] < cap {
                break;
            }
            codes[axis] = 0;
            axis += 1;
        }
        if axis == dim {
            break;
        }
    }
    let v0 = model
        .a0
        .valuation()?
        .ok_or_else(|| Error::InvalidInput("central parameter a0 = 0".into()))?;
    let weight = rational_power(prime, -(w.inner as i64) * dim as i64)
        * rational_power(prime, model.n as i64 * v0);
    Ok((lhs, acc.scale(&weight), level))
}

/// Both sides of the semisimple fixed point formula, for s stabilizing the
/// lattice with det(1 - s) != 0 and a one-dimensional central density beta:
///
///   lhs = int int ubump(w) beta(c) tr sigma(s) pi((1-s)w, c - B(w, sw)/2)
///   rhs = character(s) |det(1 - s)|^{-1/2} int beta(c) sigma(a0 c) dc.
pub fn twisted_trace_formula_sides(
    model: &LatticeModel,
    s: &MatK,
    beta: &SchwartzFunction,
) -> Result<(CyclotomicValue, CyclotomicValue, TwistedCharacterValue)> {
    assert_eq!(beta.dim(), 1);
    let prime = model.prime;
    let prec = max_precision(prime);
    let n = model.n;
    let sy = model.basis_inv.mul(s).mul(&model.lattice.basis);
    let sy_inv = sy.inverse()?;
    let one = MatK::identity(2 * n, prime, prec);
    let a = one.sub(&sy);
    let unit = model.unit_cayley(&sy_inv);
    // the central phase must be constant on beta cells
    let v0 = model
        .a0
        .valuation()?
        .ok_or_else(|| Error::InvalidInput("central parameter a0 = 0".into()))?;
    let bw = beta.window();
    let beta = beta.refine(Window {
        outer: bw.outer,
        inner: bw.inner.max((-v0).max(0) as i32),
    });
    let bvol = beta.coset_volume();
    let shell = |level: u32| -> Result<CyclotomicValue> {
        let dim = 2 * n;
        let step = pow_u64(prime, level) as usize;
        let size = step.pow(dim as u32);
        let mut acc = CyclotomicValue::zero(prime);
        for i in 0..size {
            let mut idx = i;
            let mut c = vec![0u64; dim];
            for slot in c.iter_mut().rev() {
                *slot = (idx % step) as u64;
                idx /= step;
            }
            let wv: Vec<PAdicScalar> = c
                .iter()
                .map(|&cc| PAdicScalar::from_integer(cc as i128, prime, prec))
                .collect();
            let moved = a.mul_vec(&wv);
            let quad = model.half.mul(&model.by(&wv, &sy.mul_vec(&wv)));
            for (bc, bv) in beta.table() {
                let t = beta.rep_scalar(bc[0]).sub(&quad);
                let phase = model.twisted_point_trace(&sy_inv, unit.as_ref(), &moved, &t, level)?;
                acc = acc.add(&phase.mul(bv));
            }
        }
        Ok(acc.scale(&(rational_power(prime, -(2 * n as i64) * level as i64) * &bvol)))
    };
    let mut prev = shell(1)?;
    let mut lhs = None;
    for level in 1..TRACE_MAX_LEVEL {
        let next = shell(level as u32 + 1)?;
        if next == prev {
            lhs = Some(prev);
            break;
        }
        prev = next;
    }
    let lhs = lhs.ok_or_else(|| {
        Error::StabilizationFailed("smeared twisted trace did not stabilize".into())
    })?;
    let chr = model.twisted_character(s)?;
    let det_abs = MatK::identity(2 * n, prime, prec).sub(s).det()?.abs_p()?;
    let inv_sqrt = CyclotomicValue::sqrt_of_rational(prime, &det_abs.recip())?;
    let central = beta.modulate(&[model.a0.clone()])?.integral();
    let rhs = chr.value.mul(&inv_sqrt).mul(&central);
    Ok((lhs, rhs, chr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schwartz::random_function;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sc(n: i128, d: i128, p: u64) -> PAdicScalar {
        PAdicScalar::from_rational(n, d, p, max_precision(p)).unwrap()
    }

    fn model(p: u64, a0_num: i128) -> LatticeModel {
        LatticeModel::new(1, p, sc(a0_num, 1, p)).unwrap()
    }

    fn diag_s(p: u64, a_num: i128, a_den: i128) -> MatK {
        let mut s = MatK::zero(2, 2, p);
        s.set(0, 0, sc(a_num, a_den, p));
        s.set(1, 1, sc(a_den, a_num, p));
        s
    }

    /// Product indicator of p^{l0} O x p^{l1} O x p^{l2} O.
    fn box_density(p: u64, levels: [i32; 3]) -> SchwartzFunction {
        let outer = levels.iter().map(|&l| (-l).max(0)).max().unwrap();
        let window = Window { outer, inner: 0 };
        let cap = pow_u64(p, window.digits());
        let mut entries = Vec::new();
        let mut codes = vec![0u64; 3];
        loop {
            let ok = codes.iter().zip(&levels).all(|(&c, &l)| {
                // code c encodes c p^{-outer}; membership in p^l O
                let x = PAdicScalar::from_code(c, outer as i64, p, max_precision(p));
                x.valuation_bound() >= l as i64
            });
            if ok {
                entries.push((codes.clone(), CyclotomicValue::one(p)));
            }
            let mut axis = 0;
            while axis < 3 {
                codes[axis] += 1;
                if codes[axis] < cap {
                    break;
                }
                codes[axis] = 0;
                axis += 1;
            }
            if axis == 3 {
                break;
            }
        }
        SchwartzFunction::from_entries(p, 3, window, entries).unwrap()
    }

    #[test]
    fn chosen_lattice_passes_the_direct_duality_test() {
        for p in [3u64, 5] {
            for a0 in [1i128, p as i128, 2, (p * p) as i128] {
                let m = model(p, a0);
                assert!(lattice_is_self_dual(m.form(), &m.lattice().basis, m.central_parameter())
                    .unwrap());
            }
            // a wrongly scaled lattice must fail
            let m = model(p, 1);
            let bad = m.lattice().basis.scale(&sc(p as i128, 1, p));
            assert!(!lattice_is_self_dual(m.form(), &bad, m.central_parameter()).unwrap());
        }
    }

    #[test]
    fn central_elements_act_by_the_central_character() {
        let p = 3;
        for a0 in [1i128, 3] {
            let m = model(p, a0);
            let f = LatticeVector::delta(&m, 1, vec![1, 2]);
            let t = sc(1, 9, p);
            let h = HeisenbergElement { v: vec![sc(0, 1, p), sc(0, 1, p)], t: t.clone() };
            let moved = m.heisenberg_action(&h, &f).unwrap();
            let phase = CyclotomicValue::root_p(
                p,
                m.central_parameter().mul(&t).shifted_code(2, 2).unwrap() as i128,
                2,
            );
            let expect = f.scale(&phase);
            assert!(moved.add(&expect.scale(&CyclotomicValue::from_integer(p, -1))).is_zero());
        }
    }

    #[test]
    fn translation_action_is_a_homomorphism() {
        let p = 3;
        for a0 in [1i128, 3, 2] {
            let m = model(p, a0);
            let f = LatticeVector::delta(&m, 1, vec![1, 0])
                .add(&LatticeVector::delta(&m, 1, vec![2, 2]).scale(&CyclotomicValue::root8(p, 1)));
            let h1 = HeisenbergElement { v: vec![sc(1, 3, p), sc(2, 1, p)], t: sc(1, 9, p) };
            let h2 = HeisenbergElement { v: vec![sc(2, 9, p), sc(1, 3, p)], t: sc(5, 3, p) };
            let lhs = m
                .heisenberg_action(&h1, &m.heisenberg_action(&h2, &f).unwrap())
                .unwrap();
            let rhs = m.heisenberg_action(&m.group_mul(&h1, &h2), &f).unwrap();
            assert!(lhs.add(&rhs.scale(&CyclotomicValue::from_integer(p, -1))).is_zero());
        }
    }

    #[test]
    fn translation_action_is_unitary() {
        let p = 3;
        let m = model(p, 2);
        let f = LatticeVector::delta(&m, 1, vec![1, 0])
            .add(&LatticeVector::delta(&m, 1, vec![0, 2]).scale(&CyclotomicValue::root_p(p, 1, 1)));
        let g = LatticeVector::delta(&m, 1, vec![1, 0]);
        let h = HeisenbergElement { v: vec![sc(1, 9, p), sc(2, 3, p)], t: sc(1, 3, p) };
        let before = f.inner(&g);
        let after = m
            .heisenberg_action(&h, &f)
            .unwrap()
            .inner(&m.heisenberg_action(&h, &g).unwrap());
        assert_eq!(before, after);
    }

    #[test]
    fn symplectic_action_intertwines_translations() {
        let p = 3;
        for a0 in [1i128, 3] {
            let m = model(p, a0);
            let s = diag_s(p, 2, 1);
            let s_inv = s.inverse().unwrap();
            let f = LatticeVector::delta(&m, 1, vec![2, 1]);
            let h = HeisenbergElement { v: vec![sc(1, 3, p), sc(2, 3, p)], t: sc(1, 3, p) };
            let lhs = m
                .symplectic_action(
                    &s,
                    &m.heisenberg_action(&h, &m.symplectic_action(&s_inv, &f).unwrap())
                        .unwrap(),
                )
                .unwrap();
            let moved = HeisenbergElement { v: s.mul_vec(&h.v), t: h.t.clone() };
            let rhs = m.heisenberg_action(&moved, &f).unwrap();
            assert!(lhs.add(&rhs.scale(&CyclotomicValue::from_integer(p, -1))).is_zero());
        }
    }

    #[test]
    fn covariance_of_stored_vectors() {
        let p = 5;
        let m = model(p, 1);
        let f = LatticeVector::delta(&m, 1, vec![2, 3]);
        let y = vec![sc(2, 5, p).add(&sc(4, 1, p)), sc(3, 5, p).add(&sc(1, 1, p))];
        // value at grid point + lattice shift picks up the half-pairing phase
        let direct = f.evaluate(&m, &y).unwrap();
        let base = vec![sc(2, 5, p), sc(3, 5, p)];
        let shift = vec![sc(4, 1, p), sc(1, 1, p)];
        let arg = m.half.mul(&m.by(&base, &shift));
        let expect = m.central_phase(&arg).unwrap();
        assert_eq!(direct, expect);
    }

    #[test]
    fn operator_trace_matches_the_diagonal_sum() {
        let p = 3;
        for (a0, levels) in [(1i128, [-1, 0, 0]), (3, [0, 0, -1])] {
            let m = model(p, a0);
            let phi = box_density(p, levels);
            let (direct, stab) = m.trace_of_density(&phi).unwrap();
            // the partial grid trace equals the full one from the level where
            // the diagonal sum stabilized
            let op = m.operator_of_density(&phi, stab as u32).unwrap();
            assert_eq!(direct, op.trace());
        }
    }

    #[test]
    fn twisted_operator_trace_matches_the_diagonal_sum() {
        let p = 3;
        let m = model(p, 1);
        let s = diag_s(p, 2, 1);
        let phi = box_density(p, [-1, 0, 0]);
        let (direct, stab) = m.twisted_trace_of_density(&s, &phi).unwrap();
        let level = stab as u32;
        let sigma_op = LatticeOperator::of_map(&m, level, |f| m.symplectic_action(&s, f)).unwrap();
        let pi_op = m.operator_of_density(&phi, level).unwrap();
        assert_eq!(direct, sigma_op.mul(&pi_op).trace());
    }

    #[test]
    fn symplectic_operator_is_unitary() {
        let p = 3;
        let m = model(p, 2);
        let s = diag_s(p, 2, 1);
        let level = 1;
        let op = LatticeOperator::of_map(&m, level, |f| m.symplectic_action(&s, f)).unwrap();
        let id = LatticeOperator::identity(&m, level);
        assert!(op.mul(&op.adjoint()).approx_distance(&id) < 1e-12);
    }

    #[test]
    fn identity_trace_formula_on_a_hand_checked_box() {
        // a0 = p^2, lattice p^{-1}O + p^{-1}O, density the box over the
        // lattice times p^{-2}O in the center: both sides equal q^4
        let p = 3;
        let m = model(p, 9);
        let phi = box_density(p, [-1, -1, -2]);
        let (lhs, rhs, _) = trace_formula_sides(&m, &phi).unwrap();
        let expect = CyclotomicValue::from_integer(p, 81);
        assert_eq!(lhs, expect);
        assert_eq!(rhs, expect);
    }

    #[test]
    fn identity_trace_formula_on_seeded_densities() {
        for p in [3u64, 5] {
            for a0 in [1i128, p as i128, 2] {
                let m = model(p, a0);
                for seed in 0..4u64 {
                    let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
                    let phi = random_function(&mut rng, p, 3, 1, 1);
                    let (lhs, rhs, _) = trace_formula_sides(&m, &phi).unwrap();
                    assert_eq!(lhs, rhs, "p={} a0={} seed={}", p, a0, seed);
                }
            }
        }
    }

    #[test]
    fn twisted_character_has_modulus_one_and_a_weil_lift_unit() {
        let p = 3;
        for a0 in [1i128, 3, 2] {
            let m = model(p, a0);
            for a in [2i128, 5, 8] {
                let s = diag_s(p, a, 1);
                let (chr, gamma_conj, unit) = m.character_lift_unit(&s).unwrap();
                assert!((chr.value.approx_abs() - 1.0).abs() < 1e-12);
                assert!((gamma_conj.approx_abs() - 1.0).abs() < 1e-12);
                // the two lifts differ by a fourth root of unity
                let hit = (0..4).any(|k| {
                    let mut probe = CyclotomicValue::one(p);
                    for _ in 0..k {
                        probe = probe.mul(&CyclotomicValue::root8(p, 2));
                    }
                    unit.approx_distance(&probe) < 1e-9
                });
                assert!(hit, "a0={} a={}", a0, a);
            }
        }
    }

    #[test]
    fn character_formula_negates_with_the_lift_sign() {
        let p = 3;
        let m = model(p, 2);
        let s = diag_s(p, 5, 1);
        let plus = m.character_formula(&s, 1).unwrap();
        let minus = m.character_formula(&s, -1).unwrap();
        assert_eq!(plus.neg(), minus);
        assert!((plus.approx_abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twisted_character_is_independent_of_the_averaging_bump() {
        let p = 3;
        let m = model(p, 3);
        let s = diag_s(p, 2, 1);
        let a = m.twisted_character_with_bump(&s, 0).unwrap();
        let b = m.twisted_character_with_bump(&s, 1).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn semisimple_trace_formula_sides_agree() {
        for p in [3u64, 5] {
            let units: [i128; 3] = if p == 3 { [2, 5, 8] } else { [2, 3, 4] };
            for a0 in [1i128, p as i128] {
                let m = model(p, a0);
                for a in units {
                    let s = diag_s(p, a, 1);
                    let beta = SchwartzFunction::lattice_indicator(p, 1, -1);
                    let (lhs, rhs, _) = twisted_trace_formula_sides(&m, &s, &beta).unwrap();
                    assert!(
                        lhs.approx_distance(&rhs) < 1e-9,
                        "p={} a0={} a={}",
                        p,
                        a0,
                        a
                    );
                }
            }
        }
    }
}
