//! Characters and the Plancherel identity for the solvable example group.
//!
//! For each invertible gamma the group of [`crate::solvable`] has an
//! irreducible unitary representation pi_gamma induced from the character
//! sigma(x + gamma y) of the normal subgroup {(1, x, y)}.  It acts on
//! L^2(k^x, |b|^{-1} dm(b)) by
//!
//!   pi_gamma(a, x, y) psi(b) = sigma(b^{-1} x + b gamma y) psi(a^{-1} b).
//!
//! Smearing against a test density phi |a|^{-1} dm^3 gives a finite rank
//! kernel operator with kernel K(b, c) = G(b c^{-1}; b^{-1}, b gamma), where
//! G is the Fourier transform of phi in the last two coordinates.  The
//! character Theta_gamma(phi) is its trace, computed here two independent
//! ways: as the literal matrix trace of the assembled kernel operator on a
//! coset grid of k^x, and as the closed diagonal integral
//!
//!   Theta_gamma(phi) = int_{k^x} G(1; b^{-1}, b gamma) dm(b)/|b|.
//!
//! Three identities are then verified exactly or to reported precision: the
//! orbit picture of the character at the identity (Theta_gamma(phi) equals
//! the integral of (phi o exp)^ over the orbit through f_{0,1,gamma}), the
//! vanishing of Theta_gamma on conjugation tubes around fixed-point-free
//! semisimple elements, and the Plancherel identity
//!
//!   phi(1, 0, 0) = int_{k^x} Theta_gamma(phi) dm(gamma),
//!
//! whose gamma integral is a shell sum closed by an exact
//! arithmetico-geometric tail.

use crate::cyclotomic::{AdditiveCharacter, CyclotomicValue};
use crate::error::Error;
use crate::heisenberg;
use crate::linalg::MatK;
use crate::padic::{max_precision, pow_u64, PAdicScalar};
use crate::schwartz::{rational_power, SchwartzFunction, Window};
use crate::solvable::{
    affine_tail_total, orbital_integral_g, unit_codes, GroupElement,
};
use crate::Result;
use num::One;
use std::collections::BTreeMap;

/// Hard cap on the coset-table digits a pulled-back density may need; beyond
/// this the exponential chart table would not fit desk scale.
const PULLBACK_DIGIT_CAP: u32 = 5;

/// The inducing character sigma(x + gamma y) of the subgroup {(1, x, y)}.
pub fn chi_gamma(
    gamma: &PAdicScalar,
    x: &PAdicScalar,
    y: &PAdicScalar,
) -> Result<CyclotomicValue> {
    AdditiveCharacter::new(gamma.prime()).eval(&x.add(&gamma.mul(y)))
}

fn ensure_off_origin(psi: &SchwartzFunction) -> Result<()> {
    if psi.dim() != 1 {
        return Err(Error::InvalidInput("carrier vectors live on k^x".into()));
    }
    if psi.table().contains_key(&vec![0u64]) {
        return Err(Error::InvalidInput(
            "carrier vector does not vanish near 0".into(),
        ));
    }
    Ok(())
}

/// Action of a group element in the induced representation.  The carrier is
/// a coset table on k that vanishes on the cell of 0; the table is refined
/// until the modulation phase is constant per cell.
pub fn pi_gamma_apply(
    gamma: &PAdicScalar,
    g: &GroupElement,
    psi: &SchwartzFunction,
) -> Result<SchwartzFunction> {
    ensure_off_origin(psi)?;
    let p = psi.prime();
    let chi = AdditiveCharacter::new(p);
    let mut a_inv = MatK::zero(1, 1, p);
    a_inv.set(0, 0, g.a.inverse()?);
    let shifted = psi.substitute(&a_inv)?;
    ensure_off_origin(&shifted)?;
    if shifted.is_zero() {
        return Ok(shifted);
    }
    // deepest shell of the support bounds the refinement the phases need
    let mut j_max = i64::MIN;
    for code in shifted.table().keys() {
        j_max = j_max.max(
            shifted.rep_scalar(code[0])
                .valuation()?
                .expect("support cells avoid 0"),
        );
    }
    let mut inner = shifted.window().inner as i64;
    // valuation lower bounds are safe here: they can only enlarge the level
    let bx = g.x.valuation_bound();
    if bx < i64::MAX / 2 {
        inner = inner.max(2 * j_max - bx);
    }
    let (bg, by) = (gamma.valuation_bound(), g.y.valuation_bound());
    if bg < i64::MAX / 4 && by < i64::MAX / 4 {
        inner = inner.max(-bg - by);
    }
    let fine = shifted.refine(Window {
        outer: shifted.window().outer,
        inner: inner.max(shifted.window().inner as i64) as i32,
    });
    let mut entries = Vec::new();
    for (code, v) in fine.table() {
        let b = fine.rep_scalar(code[0]);
        let phase = b.inverse()?.mul(&g.x).add(&b.mul(gamma).mul(&g.y));
        entries.push((code.clone(), v.mul(&chi.eval(&phase)?)));
    }
    SchwartzFunction::from_entries(p, 1, fine.window(), entries)
}

/// Fourier transform of a density on (a, x, y) in the last two coordinates
/// only, on a square window so that the mixed function stays representable.
pub fn partial_fourier_xy(phi: &SchwartzFunction) -> Result<SchwartzFunction> {
    if phi.dim() != 3 {
        return Err(Error::InvalidInput("test densities live on three coordinates".into()));
    }
    if !phi.scale().is_one() {
        return Err(Error::InvalidInput(
            "test densities carry the unit-normalized measure tag".into(),
        ));
    }
    let p = phi.prime();
    let w = phi.window();
    let s = w.outer.max(w.inner);
    let sq = phi.refine(Window { outer: s, inner: s });
    let k = sq.window().digits();
    let modulus = pow_u64(p, k);
    let roots: Vec<CyclotomicValue> = (0..modulus)
        .map(|t| CyclotomicValue::root_p(p, t as i128, k))
        .collect();
    let mut table: BTreeMap<Vec<u64>, CyclotomicValue> = sq.table().clone();
    for axis in [1usize, 2] {
        let mut groups: BTreeMap<Vec<u64>, Vec<(u64, CyclotomicValue)>> = BTreeMap::new();
        for (code, v) in &table {
            let mut rest = code.clone();
            let c = rest.remove(axis);
            groups.entry(rest).or_default().push((c, v.clone()));
        }
        let mut next = BTreeMap::new();
        for (rest, line) in groups {
            for out_c in 0..modulus {
                let mut acc = CyclotomicValue::zero(p);
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
    let vol = rational_power(p, -2 * s as i64);
    SchwartzFunction::from_entries(
        p,
        3,
        sq.window(),
        table
            .into_iter()
            .map(|(code, v)| (code, v.scale(&vol)))
            .collect(),
    )
}

/// Closed diagonal form of the character: the kernel diagonal integrated
/// over k^x, as an exact shell sum.  `gw` is the partial Fourier transform
/// of the density.
pub fn theta_diagonal(gw: &SchwartzFunction, gamma: &PAdicScalar) -> Result<CyclotomicValue> {
    let p = gw.prime();
    if gw.is_zero() {
        return Ok(CyclotomicValue::zero(p));
    }
    let vg = gamma
        .valuation()?
        .ok_or_else(|| Error::InvalidInput("character parameter must be invertible".into()))?;
    let w = gw.window();
    let (outer, inner) = (w.outer as i64, w.inner as i64);
    let one = PAdicScalar::one(p, max_precision(p));
    let mut acc = CyclotomicValue::zero(p);
    // the second argument b^{-1} confines v(b) below, the third bounds it
    // above; per shell the integrand is constant on unit cosets
    for j in (-outer - vg)..=outer {
        let level = 1.max(inner + j).max(inner - vg - j) as u32;
        let coset = rational_power(p, -(level as i64));
        for u in unit_codes(p, level) {
            let b = PAdicScalar::from_code(u, -j, p, max_precision(p));
            let v = gw.evaluate(&[one.clone(), b.inverse()?, b.mul(gamma)])?;
            if !v.is_zero() {
                acc = acc.add(&v.scale(&coset));
            }
        }
    }
    Ok(acc)
}

/// The smeared operator pi_gamma(phi |a|^{-1} dm^3) as an explicit matrix on
/// the coset grid {p^j u : j in shells, u a unit mod p^level} of k^x; the
/// entries absorb the multiplicative measure of the column cell.
#[derive(Clone, Debug)]
pub struct KernelOperator {
    pub gamma: PAdicScalar,
    pub level: u32,
    pub shells: Vec<i64>,
    pub mat: Vec<Vec<CyclotomicValue>>,
}

pub fn kernel_operator(
    gw: &SchwartzFunction,
    gamma: &PAdicScalar,
    level: u32,
) -> Result<KernelOperator> {
    let p = gw.prime();
    let vg = gamma
        .valuation()?
        .ok_or_else(|| Error::InvalidInput("character parameter must be invertible".into()))?;
    let w = gw.window();
    let outer = w.outer as i64;
    let shells: Vec<i64> = ((-outer - vg)..=outer).collect();
    let mut points = Vec::new();
    for &j in &shells {
        for u in unit_codes(p, level) {
            points.push(PAdicScalar::from_code(u, -j, p, max_precision(p)));
        }
    }
    let meas = rational_power(p, -(level as i64));
    let invs: Vec<PAdicScalar> = points
        .iter()
        .map(|c| c.inverse())
        .collect::<Result<_>>()?;
    let mut mat = Vec::with_capacity(points.len());
    for b in &points {
        let bi = b.inverse()?;
        let bg = b.mul(gamma);
        let mut row = Vec::with_capacity(points.len());
        for ci in &invs {
            let v = gw.evaluate(&[b.mul(ci), bi.clone(), bg.clone()])?;
            row.push(v.scale(&meas));
        }
        mat.push(row);
    }
    Ok(KernelOperator {
        gamma: gamma.clone(),
        level,
        shells,
        mat,
    })
}

impl KernelOperator {
    pub fn trace(&self) -> CyclotomicValue {
        let p = self.gamma.prime();
        let mut acc = CyclotomicValue::zero(p);
        for (i, row) in self.mat.iter().enumerate() {
            acc = acc.add(&row[i]);
        }
        acc
    }

    /// Apply to a coefficient vector over the same grid.
    pub fn apply(&self, coeffs: &[CyclotomicValue]) -> Vec<CyclotomicValue> {
        let p = self.gamma.prime();
        self.mat
            .iter()
            .map(|row| {
                let mut acc = CyclotomicValue::zero(p);
                for (m, c) in row.iter().zip(coeffs) {
                    acc = acc.add(&m.mul(c));
                }
                acc
            })
            .collect()
    }

    /// The grid points indexing rows and columns.
    pub fn grid(&self) -> Vec<PAdicScalar> {
        let p = self.gamma.prime();
        let mut out = Vec::new();
        for &j in &self.shells {
            for u in unit_codes(p, self.level) {
                out.push(PAdicScalar::from_code(u, -j, p, max_precision(p)));
            }
        }
        out
    }
}

/// The character value by both methods.
#[derive(Clone, Debug)]
pub struct CharacterReport {
    pub gamma: PAdicScalar,
    pub kernel_trace: CyclotomicValue,
    pub diagonal_integral: CyclotomicValue,
    pub matrix_size: usize,
}

impl CharacterReport {
    pub fn methods_agree(&self) -> bool {
        self.kernel_trace == self.diagonal_integral
    }
}

pub fn theta_gamma(gamma: &PAdicScalar, phi: &SchwartzFunction) -> Result<CharacterReport> {
    let gw = partial_fourier_xy(phi)?;
    let diagonal = theta_diagonal(&gw, gamma)?;
    let w = gw.window();
    let level = 1.max(w.outer + w.inner) as u32;
    let op = kernel_operator(&gw, gamma, level)?;
    Ok(CharacterReport {
        gamma: gamma.clone(),
        kernel_trace: op.trace(),
        diagonal_integral: diagonal,
        matrix_size: op.mat.len(),
    })
}

/// Pull a density supported in (1 + pO) x O-window back through the
/// exponential chart: F(u, v, w) = phi(e^u, v h(u), w h(-u)).  The output
/// window is refined enough for the chart to map cells to cells.
pub fn pullback_by_exp(phi: &SchwartzFunction) -> Result<SchwartzFunction> {
    use crate::solvable::{exp_scalar, h_scalar};
    if phi.dim() != 3 {
        return Err(Error::InvalidInput("test densities live on three coordinates".into()));
    }
    let p = phi.prime();
    let w = phi.window();
    if w.inner < 1 {
        return Err(Error::InvalidInput(
            "exponential chart needs level >= 1; support must sit in (1 + pO) x k^2".into(),
        ));
    }
    let one = PAdicScalar::one(p, max_precision(p));
    for code in phi.table().keys() {
        let a = phi.rep_scalar(code[0]);
        if a.sub(&one).valuation_bound() < 1 {
            return Err(Error::InvalidInput(
                "exponential chart needs the first coordinate inside 1 + pO".into(),
            ));
        }
    }
    // u varies at level inner + outer so that both e^u and the h-twisted
    // fiber coordinates move inside single cells of phi
    let win = Window {
        outer: w.outer,
        inner: w.inner + w.outer,
    };
    if win.digits() > PULLBACK_DIGIT_CAP {
        return Err(Error::WindowOutOfRange(
            "exponential chart table exceeds the desk-scale digit cap".into(),
        ));
    }
    let cap = pow_u64(p, win.digits());
    // per-axis caches of the chart factors
    let mut chart: Vec<Option<(PAdicScalar, PAdicScalar, PAdicScalar)>> = Vec::new();
    for cu in 0..cap {
        let u = PAdicScalar::from_code(cu, win.outer as i64, p, max_precision(p));
        if u.valuation_bound() < 1 {
            chart.push(None);
            continue;
        }
        chart.push(Some((exp_scalar(&u)?, h_scalar(&u)?, h_scalar(&u.neg())?)));
    }
    let mut entries = Vec::new();
    for (cu, data) in chart.iter().enumerate() {
        let Some((a, hu, hnu)) = data else { continue };
        for cv in 0..cap {
            let v = PAdicScalar::from_code(cv, win.outer as i64, p, max_precision(p));
            let x = v.mul(hu);
            for cw in 0..cap {
                let wv = PAdicScalar::from_code(cw, win.outer as i64, p, max_precision(p));
                let val = phi.evaluate(&[a.clone(), x.clone(), wv.mul(hnu)])?;
                if !val.is_zero() {
                    entries.push((vec![cu as u64, cv, cw], val));
                }
            }
        }
    }
    SchwartzFunction::from_entries(p, 3, win, entries)
}

/// Both sides of the orbit picture of the character at the identity: the
/// character of the smeared operator, and the integral of (phi o exp)^ over
/// the orbit through f_{0, 1, gamma}.
pub fn character_formula_sides_s1(
    gamma: &PAdicScalar,
    phi: &SchwartzFunction,
) -> Result<(CharacterReport, CyclotomicValue)> {
    let report = theta_gamma(gamma, phi)?;
    let f = pullback_by_exp(phi)?;
    let fhat = f.fourier();
    let one = PAdicScalar::one(phi.prime(), max_precision(phi.prime()));
    let orbital = orbital_integral_g(&one, gamma, &fhat)?;
    Ok((report, orbital))
}

/// Indicator of the conjugation-saturated tube {(a, x, y) : a in a0(1 +
/// p^level O), x, y in O} around the semisimple element (a0, 0, 0).
pub fn tube_density(prime: u64, a0: &PAdicScalar, level: u32) -> Result<SchwartzFunction> {
    if a0.valuation()? != Some(0) {
        return Err(Error::InvalidInput("tube base point needs a unit first coordinate".into()));
    }
    let w = Window { outer: 0, inner: level as i32 };
    let cap = pow_u64(prime, level);
    let res = a0.residue(level)?;
    let mut entries = Vec::new();
    for x in 0..cap {
        for y in 0..cap {
            entries.push((vec![res, x, y], CyclotomicValue::one(prime)));
        }
    }
    SchwartzFunction::from_entries(prime, 3, w, entries)
}

/// The Plancherel identity: phi at the group identity against the shell sum
/// of characters over the orbit parameter.
#[derive(Clone, Debug)]
pub struct PlancherelReport {
    pub lhs: CyclotomicValue,
    pub rhs: CyclotomicValue,
    /// Shells below this vanish identically; the one just below is checked.
    pub first_shell: i64,
    pub lower_boundary_vanishes: bool,
    /// First shell the exact affine tail law covers.
    pub tail_start: i64,
}

pub fn plancherel_verify(phi: &SchwartzFunction) -> Result<PlancherelReport> {
    let p = phi.prime();
    let prec = max_precision(p);
    let lhs = phi.evaluate(&[
        PAdicScalar::one(p, prec),
        PAdicScalar::zero(p),
        PAdicScalar::zero(p),
    ])?;
    let gw = partial_fourier_xy(phi)?;
    if gw.is_zero() {
        return Ok(PlancherelReport {
            lhs,
            rhs: CyclotomicValue::zero(p),
            first_shell: 0,
            lower_boundary_vanishes: true,
            tail_start: 0,
        });
    }
    let w = gw.window();
    let (outer, inner) = (w.outer as i64, w.inner as i64);
    // characters are constant on unit classes of gamma at this level,
    // uniformly over the shells
    let lam = 1.max(inner + outer) as u32;
    let shell = |g: i64| -> Result<CyclotomicValue> {
        let meas = rational_power(p, -(g + lam as i64));
        let mut acc = CyclotomicValue::zero(p);
        for u in unit_codes(p, lam) {
            let gamma = PAdicScalar::from_code(u, -g, p, max_precision(p));
            let th = theta_diagonal(&gw, &gamma)?;
            if !th.is_zero() {
                acc = acc.add(&th.scale(&meas));
            }
        }
        Ok(acc)
    };
    let first_shell = -2 * outer;
    let lower_boundary_vanishes = shell(first_shell - 1)?.is_zero();
    let start0 = (2 * inner + 1).max(1);
    let (rhs, tail_start) = affine_tail_total(p, first_shell, start0, shell)?;
    Ok(PlancherelReport {
        lhs,
        rhs,
        first_shell,
        lower_boundary_vanishes,
        tail_start,
    })
}

/// Cross-module consistency: the lattice-model trace of a smeared
/// Heisenberg representation against its orbit-integral form.
pub fn heisenberg_kirillov_sides(
    n: usize,
    prime: u64,
    a0: &PAdicScalar,
    phi: &SchwartzFunction,
) -> Result<(CyclotomicValue, CyclotomicValue, i32)> {
    let model = heisenberg::LatticeModel::new(n, prime, a0.clone())?;
    heisenberg::trace_formula_sides(&model, phi)
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

    fn unit_circle(p: u64) -> SchwartzFunction {
        SchwartzFunction::lattice_indicator(p, 1, 0)
            .add(
                &SchwartzFunction::lattice_indicator(p, 1, 1)
                    .scale_values(&CyclotomicValue::from_integer(p, -1)),
            )
            .unwrap()
    }

    fn fn_eq(f: &SchwartzFunction, g: &SchwartzFunction) -> bool {
        f.add(&g.scale_values(&CyclotomicValue::from_integer(f.prime(), -1)))
            .unwrap()
            .is_zero()
    }

    #[test]
    fn inducing_character_is_a_homomorphism() {
        let p = 5;
        let gamma = sc(3, 1, p);
        for (x1, y1, x2, y2) in [(1, 2, 3, 4), (0, 1, 7, 5), (2, 2, 1, 1)] {
            let joint = chi_gamma(
                &gamma,
                &sc(x1 + x2, 1, p),
                &sc(y1 + y2, 1, p),
            )
            .unwrap();
            let split = chi_gamma(&gamma, &sc(x1, 1, p), &sc(y1, 1, p))
                .unwrap()
                .mul(&chi_gamma(&gamma, &sc(x2, 1, p), &sc(y2, 1, p)).unwrap());
            assert_eq!(joint, split);
        }
    }

    #[test]
    fn induced_action_is_a_homomorphism() {
        let p = 3;
        let gamma = sc(2, 3, p);
        let psi = unit_circle(p);
        let samples = [
            GroupElement::from_integers(p, 2, 1, -1).unwrap(),
            GroupElement::new(sc(1, 3, p), sc(1, 9, p), sc(2, 1, p)).unwrap(),
            GroupElement::from_integers(p, 3, 0, 5).unwrap(),
        ];
        let id = GroupElement::identity(p);
        assert!(fn_eq(&pi_gamma_apply(&gamma, &id, &psi).unwrap(), &psi));
        for g in &samples {
            for h in &samples {
                let joint = pi_gamma_apply(&gamma, &g.mul(h).unwrap(), &psi).unwrap();
                let steps =
                    pi_gamma_apply(&gamma, g, &pi_gamma_apply(&gamma, h, &psi).unwrap()).unwrap();
                assert!(fn_eq(&joint, &steps));
            }
        }
    }

    #[test]
    fn kernel_operator_matches_direct_smearing() {
        let p = 3;
        let gamma = sc(1, 1, p);
        let phi = tube_density(p, &sc(1, 1, p), 1).unwrap();
        let gw = partial_fourier_xy(&phi).unwrap();
        // fine enough that every entry, not only the diagonal, is a constant
        // kernel value on its cell
        let op = kernel_operator(&gw, &gamma, 3).unwrap();
        let psi = unit_circle(p);
        let grid = op.grid();
        let coeffs: Vec<CyclotomicValue> =
            grid.iter().map(|b| psi.evaluate(&[b.clone()]).unwrap()).collect();
        let applied = op.apply(&coeffs);
        // direct smearing: sum phi(cell) pi(rep) psi over the Haar measure
        let m = phi.window().inner as i64;
        let cell = rational_power(p, -3 * m);
        let mut smeared = SchwartzFunction::zero(p, 1);
        for (code, v) in phi.table() {
            let pt = phi.rep_point(code);
            let g = GroupElement::new(pt[0].clone(), pt[1].clone(), pt[2].clone()).unwrap();
            let weight = v.scale(&(g.haar_density().unwrap() * &cell));
            let moved = pi_gamma_apply(&gamma, &g, &psi).unwrap().scale_values(&weight);
            smeared = smeared.add(&moved).unwrap();
        }
        for (b, got) in grid.iter().zip(&applied) {
            let want = smeared.evaluate(&[b.clone()]).unwrap();
            assert_eq!(got, &want, "at b = {}", b);
        }
    }

    #[test]
    fn both_character_methods_agree_on_seeded_densities() {
        for p in [3u64, 5] {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + p);
            for _ in 0..4 {
                let phi = random_function(&mut rng, p, 3, 1, 1);
                for gamma in [sc(1, 1, p), sc(2, 1, p), sc(1, p as i128, p), sc(p as i128, 1, p)] {
                    let rep = theta_gamma(&gamma, &phi).unwrap();
                    assert!(rep.methods_agree(), "p = {p}");
                }
            }
        }
    }

    #[test]
    fn characters_are_locally_constant_in_the_parameter() {
        let p = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phi = random_function(&mut rng, p, 3, 1, 1);
        let gw = partial_fourier_xy(&phi).unwrap();
        let w = gw.window();
        let lam = (w.outer + w.inner).max(1);
        for gamma in [sc(1, 1, p), sc(2, 3, p)] {
            let base = theta_diagonal(&gw, &gamma).unwrap();
            let nudge = sc(1 + (p as i128).pow(lam as u32), 1, p);
            let moved = theta_diagonal(&gw, &gamma.mul(&nudge)).unwrap();
            assert_eq!(base, moved);
        }
    }

    #[test]
    fn character_vanishes_on_a_fixed_point_free_tube_but_not_at_the_identity() {
        for p in [3u64, 5] {
            let away = tube_density(p, &sc(2, 1, p), 1).unwrap();
            let home = tube_density(p, &sc(1, 1, p), 1).unwrap();
            for gamma in [sc(1, 1, p), sc(p as i128, 1, p), sc(1, p as i128, p)] {
                let rep = theta_gamma(&gamma, &away).unwrap();
                assert!(rep.kernel_trace.is_zero(), "p = {p}");
                assert!(rep.diagonal_integral.is_zero(), "p = {p}");
            }
            // the control only sees integral parameters: for v(gamma) < 0
            // the diagonal support condition is empty even near the identity
            for gamma in [sc(1, 1, p), sc(p as i128, 1, p)] {
                let control = theta_gamma(&gamma, &home).unwrap();
                assert!(!control.diagonal_integral.is_zero(), "p = {p}");
            }
        }
    }

    #[test]
    fn identity_neighborhood_character_matches_the_orbital_integral() {
        for p in [3u64, 5] {
            let mut rng = ChaCha8Rng::seed_from_u64(60 + p);
            let ball = tube_density(p, &sc(1, 1, p), 1).unwrap();
            let mut done = 0;
            while done < 3 {
                let raw = random_function(&mut rng, p, 3, 0, 1);
                let phi = raw.pointwise_mul(&ball).unwrap();
                if phi.is_zero() {
                    continue;
                }
                done += 1;
                for gamma in [sc(1, 1, p), sc(p as i128, 1, p), sc(1, p as i128, p)] {
                    let (rep, orbital) = character_formula_sides_s1(&gamma, &phi).unwrap();
                    assert!(rep.methods_agree());
                    assert_eq!(rep.kernel_trace, orbital, "p = {p}");
                }
            }
        }
    }

    #[test]
    fn exponential_pullback_is_stable_under_refinement() {
        let p = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ball = tube_density(p, &sc(1, 1, p), 1).unwrap();
        let phi = loop {
            let draw = random_function(&mut rng, p, 3, 0, 1)
                .pointwise_mul(&ball)
                .unwrap();
            if !draw.is_zero() {
                break draw;
            }
        };
        let f = pullback_by_exp(&phi).unwrap();
        // recompute at one level finer through the refined density
        let wf = phi.window();
        let finer = phi.refine(Window { outer: wf.outer, inner: wf.inner + 1 });
        let f2 = pullback_by_exp(&finer).unwrap();
        assert!(fn_eq(&f, &f2));
    }

    #[test]
    fn plancherel_identity_on_a_normalized_ball() {
        for p in [3u64, 5] {
            // vol-normalized indicator of the ball (1+pO) x pO x pO
            let ball = SchwartzFunction::from_entries(
                p,
                3,
                Window { outer: 0, inner: 1 },
                vec![(vec![1, 0, 0], CyclotomicValue::one(p))],
            )
            .unwrap();
            let phi = ball.scale_rational(&rational_power(p, 3));
            let rep = plancherel_verify(&phi).unwrap();
            assert_eq!(rep.lhs, CyclotomicValue::one(p).scale(&rational_power(p, 3)));
            assert_eq!(rep.lhs, rep.rhs, "p = {p}");
            assert!(rep.lower_boundary_vanishes);
        }
    }

    #[test]
    fn plancherel_identity_on_seeded_densities() {
        for p in [3u64, 5] {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + p);
            for _ in 0..3 {
                let phi = random_function(&mut rng, p, 3, 1, 1);
                let rep = plancherel_verify(&phi).unwrap();
                assert_eq!(rep.lhs, rep.rhs, "p = {p}");
                assert!(rep.lower_boundary_vanishes);
            }
        }
    }

    #[test]
    fn lattice_model_trace_matches_the_orbit_integral_route() {
        let p = 3;
        let a0 = sc(3, 1, p);
        let phi = SchwartzFunction::lattice_indicator(p, 3, 0);
        let (lhs, rhs, _) = heisenberg_kirillov_sides(1, p, &a0, &phi).unwrap();
        assert_eq!(lhs, rhs);
    }
}
