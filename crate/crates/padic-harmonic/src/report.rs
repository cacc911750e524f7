//! Report schema and the verification suites behind each CLI subcommand.
//!
//! Every suite turns a [`RunConfig`](crate::config::RunConfig) into a list
//! of [`Check`]s; a [`Report`] wraps them with the config echo and the
//! conventions (additive character, measure normalizations, lattice
//! choices) the numbers depend on, so a report is auditable on its own.
//! Serialization is deterministic: identical config and seed produce
//! byte-identical output.

use crate::characters::{
    character_formula_sides_s1, plancherel_verify, theta_gamma, tube_density,
};
use crate::config::{nonsquare_unit, RunConfig};
use crate::cyclotomic::CyclotomicValue;
use crate::heisenberg::{trace_formula_sides, twisted_trace_formula_sides, LatticeModel};
use crate::linalg::MatK;
use crate::padic::PAdicScalar;
use crate::schwartz::{random_function, SchwartzFunction};
use crate::solvable::{
    disintegration_sides, fibered_sides, omega_locus, regularity_report, LieAlgebraData,
    LinearForm,
};
use crate::weil::{index_identity_sides, weil_index, QuadraticForm};
use crate::Result;
use num::One;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const REPORT_VERSION: &str = "1.0";

/// One verified identity: both sides rendered exactly, their float
/// distance, and the verdict.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    /// The identity being checked, written out.
    pub identity: String,
    pub lhs: String,
    pub rhs: String,
    pub delta: f64,
    pub pass: bool,
}

/// The conventions every number in a report depends on.
#[derive(Clone, Debug, Serialize)]
pub struct Conventions {
    pub additive_character: &'static str,
    pub additive_haar: &'static str,
    pub multiplicative_haar: &'static str,
    pub heisenberg_lattice: &'static str,
    pub orbit_chart: &'static str,
}

pub fn conventions() -> Conventions {
    Conventions {
        additive_character:
            "sigma(x) = exp(2 pi i {x}), {x} the fractional part of x in Z[1/p]/Z; \
             conductor exactly the ring of integers O",
        additive_haar: "self-dual for sigma: vol(O) = 1 on every axis",
        multiplicative_haar: "dm(b)/|b| on k^x; vol(O^x) = 1 - 1/p",
        heisenberg_lattice:
            "self-dual lattice p^{je} O^n + p^{jf} O^n in hyperbolic coordinates \
             with je + jf = -v(a0), je = floor over the split",
        orbit_chart:
            "orbit of f_{(0,beta,gamma)} charted by a -> f_{(0,beta a, gamma/a)} \
             with measure dm(a)/|a|; the t-fiber carries vol(O) = 1",
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub version: String,
    pub config: RunConfig,
    pub conventions: Conventions,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Report {
    pub fn new(config: RunConfig, checks: Vec<Check>) -> Self {
        let passed = !checks.is_empty() && checks.iter().all(|c| c.pass);
        Report {
            version: REPORT_VERSION.into(),
            config,
            conventions: conventions(),
            checks,
            passed,
        }
    }

    /// Deterministic serialization: struct field order plus ordered maps.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }
}

/// Accumulator for a batch of instances of one identity.
struct Batch {
    total: usize,
    fails: usize,
    max_delta: f64,
    lhs: CyclotomicValue,
    rhs: CyclotomicValue,
}

impl Batch {
    fn new(prime: u64) -> Self {
        Batch {
            total: 0,
            fails: 0,
            max_delta: 0.0,
            lhs: CyclotomicValue::zero(prime),
            rhs: CyclotomicValue::zero(prime),
        }
    }

    fn push(&mut self, lhs: &CyclotomicValue, rhs: &CyclotomicValue, tol: f64) {
        self.total += 1;
        let delta = lhs.approx_distance(rhs);
        self.max_delta = self.max_delta.max(delta);
        if !(lhs == rhs || delta <= tol) {
            self.fails += 1;
        }
        self.lhs = self.lhs.add(lhs);
        self.rhs = self.rhs.add(rhs);
    }

    /// Record an exactness verdict without a numeric pair.
    fn push_flag(&mut self, ok: bool) {
        self.total += 1;
        if !ok {
            self.fails += 1;
            self.max_delta = self.max_delta.max(1.0);
        }
    }

    fn into_check(self, name: String, identity: &str) -> Check {
        Check {
            name,
            identity: identity.into(),
            lhs: format!("sum over {} instances: {}", self.total, self.lhs),
            rhs: format!("sum over {} instances: {}", self.total, self.rhs),
            delta: self.max_delta,
            pass: self.fails == 0 && self.total > 0,
        }
    }

    fn into_count_check(self, name: String, identity: &str) -> Check {
        Check {
            name,
            identity: identity.into(),
            lhs: format!("{} of {} instances exact", self.total - self.fails, self.total),
            rhs: format!("{} instances", self.total),
            delta: self.fails as f64,
            pass: self.fails == 0 && self.total > 0,
        }
    }
}

fn suite_rng(cfg: &RunConfig, tag: u64, prime: u64, slot: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        cfg.seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(tag)
            .wrapping_add(prime.wrapping_mul(1_000_003))
            .wrapping_add(slot.wrapping_mul(7919)),
    )
}

// ----- Fourier analysis suite -----

/// Inversion, reflection, Parseval, and the convolution theorem on seeded
/// functions over p in {3, 5, 7} and dimensions up to 3.
pub fn run_fourier(cfg: &RunConfig, checks: &mut Vec<Check>) -> Result<()> {
    let tol = cfg.tolerance;
    for p in cfg.primes(&[3, 5, 7]) {
        // transformed tables are dense sums of roots, so a repeated
        // transform costs about (digits table size)^2 terms; keep the draw
        // windows smaller as the residue field grows
        let (mo, mi) = if p == 3 { (2, 2) } else { (1, 1) };
        // the corpus leans on the cheap small-prime draws
        let draws = cfg.functions
            * match p {
                3 => 4,
                5 => 2,
                _ => 1,
            };
        for n in 1..=3usize {
            let mut rng = suite_rng(cfg, 0x0f, p, n as u64);
            let mut inv = Batch::new(p);
            let mut refl = Batch::new(p);
            let mut pars = Batch::new(p);
            let mut conv = Batch::new(p);
            for _ in 0..draws {
                let f = random_function(&mut rng, p, n, mo, mi);
                let round = f.fourier().fourier_inverse();
                inv.push(&round.integral(), &f.integral(), tol);
                inv.push_flag(round == f);
                let twice = f.fourier().fourier();
                let refl_f = f.negate_argument();
                refl.push(&twice.integral(), &refl_f.integral(), tol);
                refl.push_flag(
                    twice.window() == refl_f.window() && twice.table() == refl_f.table(),
                );
                pars.push(&norm_sq(&f), &norm_sq(&f.fourier()), tol);
                // convolution factors stay on one-digit windows so the
                // spread-out product keeps a desk-scale dual table; in three
                // dimensions the factors stay integral so the product does too
                let co = if n == 3 { 0 } else { 1 };
                let cf = random_function(&mut rng, p, n, co, 1);
                let cg = random_function(&mut rng, p, n, co, 1);
                let lhs = cf.convolve(&cg)?.fourier();
                let rhs = cf.fourier().pointwise_mul(&cg.fourier())?;
                conv.push(&lhs.integral(), &rhs.integral(), tol);
                conv.push_flag(lhs == rhs);
            }
            checks.push(inv.into_check(
                format!("fourier-inversion p={p} n={n}"),
                "F^{-1}(F phi) = phi",
            ));
            checks.push(refl.into_check(
                format!("fourier-reflection p={p} n={n}"),
                "F(F phi)(x) = phi(-x)",
            ));
            checks.push(pars.into_check(
                format!("fourier-parseval p={p} n={n}"),
                "int |phi|^2 = int |F phi|^2",
            ));
            checks.push(conv.into_check(
                format!("fourier-convolution p={p} n={n}"),
                "F(phi * psi) = (F phi)(F psi)",
            ));
        }
    }
    Ok(())
}

fn norm_sq(f: &SchwartzFunction) -> CyclotomicValue {
    let mut acc = CyclotomicValue::zero(f.prime());
    for v in f.table().values() {
        acc = acc.add(&v.mul(&v.conj()));
    }
    acc.scale(&f.coset_volume())
}

// ----- quadratic form index suite -----

fn diagonal_form(p: u64, prec: u32, entries: &[i128]) -> Result<QuadraticForm> {
    let scalars: Vec<PAdicScalar> = entries
        .iter()
        .map(|&e| PAdicScalar::from_integer(e, p, prec))
        .collect();
    QuadraticForm::diagonal(&scalars)
}

/// Modulus one, multiplicativity over orthogonal sums, and the twisted
/// convolution identity for the normalized index of a quadratic form.
pub fn run_weil(cfg: &RunConfig, checks: &mut Vec<Check>) -> Result<()> {
    let tol = cfg.tolerance;
    for p in cfg.primes(&[3, 5, 7]) {
        let prec = cfg.working_precision(p)?;
        let a0 = cfg.a0_scalar(p)?;
        let u = nonsquare_unit(p) as i128;
        let pi = p as i128;
        let forms: Vec<Vec<i128>> = vec![
            vec![1],
            vec![u],
            vec![pi],
            vec![1, u],
            vec![1, pi],
            vec![1, u, pi],
            vec![1, 1, u, pi],
        ];
        let mut modulus = Batch::new(p);
        let one = CyclotomicValue::one(p);
        for entries in &forms {
            let q = diagonal_form(p, prec, entries)?;
            let idx = weil_index(&q, &a0)?;
            let m2 = idx.value.mul(&idx.value.conj());
            modulus.push(&m2, &one, 1e-12);
            checks.push(Check {
                name: format!(
                    "weil-stabilization p={p} form=diag({entries:?}) level={}",
                    idx.stabilization_level
                ),
                identity: "gauss sums agree on two consecutive lattice levels".into(),
                lhs: format!("level {}", idx.stabilization_level),
                rhs: "finite".into(),
                delta: 0.0,
                pass: true,
            });
        }
        checks.push(modulus.into_check(
            format!("weil-modulus p={p}"),
            "|gamma(a0 Q)| = 1",
        ));

        let mut mult = Batch::new(p);
        for e1 in &forms {
            for e2 in &forms {
                if e1.len() + e2.len() > 4 {
                    continue;
                }
                let q1 = diagonal_form(p, prec, e1)?;
                let q2 = diagonal_form(p, prec, e2)?;
                let sum = q1.direct_sum(&q2)?;
                let lhs = weil_index(&sum, &a0)?.value;
                let rhs = weil_index(&q1, &a0)?.value.mul(&weil_index(&q2, &a0)?.value);
                mult.push(&lhs, &rhs, 0.0);
            }
        }
        checks.push(mult.into_check(
            format!("weil-multiplicativity p={p}"),
            "gamma(a0(Q1 + Q2)) = gamma(a0 Q1) gamma(a0 Q2)",
        ));

        let mut twisted = Batch::new(p);
        let per = 20usize.div_ceil(cfg.primes(&[3, 5, 7]).len());
        let mut rng = suite_rng(cfg, 0x3e, p, 0);
        for _ in 0..per {
            use rand::Rng;
            let dim = rng.gen_range(1..=2usize);
            let entries: Vec<i128> = (0..dim)
                .map(|_| [1, u, pi][rng.gen_range(0..3usize)])
                .collect();
            let q = diagonal_form(p, prec, &entries)?;
            let f = random_function(&mut rng, p, dim, 1, 1);
            let (lhs, rhs) = index_identity_sides(&q, &a0, &f)?;
            twisted.push(&lhs, &rhs, tol);
        }
        checks.push(twisted.into_check(
            format!("weil-twisted-convolution p={p}"),
            "int phi(x) sigma(a0 Q(x)) dx = gamma(a0 Q) |det 2 a0 Q|^{-1/2} \
             int F(phi)(l) sigma(-(a0 Q)^{-1}(l)/4) dl",
        ));
    }
    Ok(())
}

// ----- lattice-model trace suite -----

fn diag_s(p: u64, prec: u32, a: i128) -> Result<MatK> {
    let mut s = MatK::zero(2, 2, p);
    let av = PAdicScalar::from_integer(a, p, prec);
    s.set(0, 0, av.clone());
    s.set(1, 1, av.inverse()?);
    Ok(s)
}

/// Fixed-point trace identity on the two-dimensional lattice model at
/// s = 1 and at diagonal semisimple s with |a - 1| = 1.
pub fn run_heisenberg(cfg: &RunConfig, checks: &mut Vec<Check>) -> Result<()> {
    let tol = cfg.tolerance;
    for p in cfg.primes(&[3, 5]) {
        let prec = cfg.working_precision(p)?;
        let a0s: Vec<(String, i128)> = vec![
            ("1".into(), 1),
            ("p".into(), p as i128),
            ("nonsquare".into(), nonsquare_unit(p) as i128),
        ];
        let semis: Vec<i128> = if p == 3 { vec![2, 5, 8] } else { vec![2, 3, 4] };
        for (label, a0) in &a0s {
            let model = LatticeModel::new(1, p, PAdicScalar::from_integer(*a0, p, prec))?;
            let mut id_batch = Batch::new(p);
            let mut rng = suite_rng(cfg, 0x48, p, *a0 as u64);
            for _ in 0..cfg.functions.min(4) {
                let phi = random_function(&mut rng, p, 3, 1, 1);
                let (lhs, rhs, _) = trace_formula_sides(&model, &phi)?;
                id_batch.push(&lhs, &rhs, tol);
            }
            checks.push(id_batch.into_check(
                format!("lattice-trace-identity p={p} a0={label}"),
                "tr pi(phi) = int phi-hat over the central-twist hyperplane",
            ));
            let mut tw = Batch::new(p);
            for &a in &semis {
                let s = diag_s(p, prec, a)?;
                let beta = SchwartzFunction::lattice_indicator(p, 1, -1);
                let (lhs, rhs, _) = twisted_trace_formula_sides(&model, &s, &beta)?;
                tw.push(&lhs, &rhs, tol);
            }
            checks.push(tw.into_check(
                format!("lattice-trace-semisimple p={p} a0={label}"),
                "tr S(s) pi(beta) = Phi_{a0}(s) |det(1 - s)|^{-1/2} int beta sigma(a0 t) dt",
            ));
        }
    }
    Ok(())
}

// ----- orbit geometry suite -----

/// Regularity loci, disintegration of the dual-space measure over orbits,
/// and the fibered orbital-integral identity.
pub fn run_orbits(cfg: &RunConfig, checks: &mut Vec<Check>) -> Result<()> {
    for p in cfg.primes(&[3, 5]) {
        let alg = LieAlgebraData::gamma_example(p);
        let mut locus = Batch::new(p);
        let pi = p as i128;
        for &al in &[0i128, 1, 2, pi] {
            for &b in &[0i128, 1, 2, pi] {
                for &c in &[0i128, 1, 2, pi] {
                    let f = LinearForm::from_integers(p, &[al, b, c]);
                    let rr = regularity_report(&f, &alg)?;
                    locus.push_flag(rr.strongly_regular == (b != 0 || c != 0));
                    locus.push_flag(omega_locus(&f) == (b != 0 && c != 0));
                }
            }
        }
        checks.push(locus.into_count_check(
            format!("orbit-regularity-locus p={p}"),
            "strongly regular iff (beta, gamma) != (0, 0); \
             closed two-dimensional orbits exactly on {beta != 0, gamma != 0}",
        ));

        let mut dis = Batch::new(p);
        let mut rng = suite_rng(cfg, 0x5b, p, 0);
        let mut done = 0;
        while done < 5 {
            let f = random_function(&mut rng, p, 2, 1, 1);
            if !f.scale().is_one() {
                continue;
            }
            done += 1;
            let rep = disintegration_sides(&f)?;
            dis.push(&rep.direct, &rep.fibered, 0.0);
        }
        checks.push(dis.into_check(
            format!("orbit-disintegration p={p}"),
            "int_{u*} F = int_{k^x} [int over the orbit of f_{(1, gamma)}] dm(gamma)",
        ));

        let mut fib = Batch::new(p);
        let bases: [(i128, i128); 5] = [(1, 1), (1, pi), (pi, 1), (2, 1), (1, 2)];
        let mut rng = suite_rng(cfg, 0x5c, p, 0);
        for (i, &(b, g)) in bases.iter().enumerate() {
            let f = random_function(&mut rng, p, 3, 1, 1);
            let prec = cfg.working_precision(p)?;
            let beta = PAdicScalar::from_integer(b, p, prec);
            let gamma = PAdicScalar::from_integer(g, p, prec);
            let (lhs, rhs) = fibered_sides(&beta, &gamma, &f)?;
            fib.push(&lhs, &rhs, 0.0);
            let _ = i;
        }
        checks.push(fib.into_check(
            format!("orbit-fibered-integral p={p}"),
            "direct (t, a) chart sum = t-integrated then charted orbital integral",
        ));
    }
    Ok(())
}

// ----- character and Plancherel suite -----

/// Character formula at s = 1, vanishing on fixed-point-free tubes, the
/// Plancherel identity, and dual-method consistency on every instance.
pub fn run_plancherel(cfg: &RunConfig, checks: &mut Vec<Check>) -> Result<()> {
    let tol = cfg.tolerance;
    for p in cfg.primes(&[3, 5]) {
        let prec = cfg.working_precision(p)?;
        let gammas: Vec<(i64, PAdicScalar)> = cfg
            .gamma_shells
            .iter()
            .map(|&s| (s, PAdicScalar::from_code(1, -s, p, prec)))
            .collect();
        let mut dual = Batch::new(p);

        // identity-neighborhood character formula, one batch per shell
        let ball = tube_density(p, &PAdicScalar::one(p, prec), 1)?;
        let mut draws = Vec::new();
        let mut rng = suite_rng(cfg, 0x9a, p, 0);
        while draws.len() < cfg.functions {
            let phi = random_function(&mut rng, p, 3, 0, 1).pointwise_mul(&ball)?;
            if !phi.is_zero() {
                draws.push(phi);
            }
        }
        for (shell, gamma) in &gammas {
            let mut batch = Batch::new(p);
            for phi in &draws {
                let (rep, orbital) = character_formula_sides_s1(gamma, phi)?;
                batch.push(&rep.kernel_trace, &orbital, tol);
                dual.push(&rep.kernel_trace, &rep.diagonal_integral, 0.0);
            }
            checks.push(batch.into_check(
                format!("character-formula-s1 p={p} v-gamma={shell}"),
                "Theta_gamma(phi) = int over the orbit of f_{(0,1,gamma)} \
                 of F(phi o exp)",
            ));
        }

        // vanishing on tubes around fixed-point-free semisimple points
        let mut vanish = Batch::new(p);
        for a in 2..p {
            let tube = tube_density(p, &PAdicScalar::from_integer(a as i128, p, prec), 1)?;
            for (_, gamma) in &gammas {
                let rep = theta_gamma(gamma, &tube)?;
                vanish.push_flag(rep.kernel_trace.is_zero() && rep.diagonal_integral.is_zero());
                dual.push(&rep.kernel_trace, &rep.diagonal_integral, 0.0);
            }
        }
        checks.push(vanish.into_count_check(
            format!("character-vanishing p={p}"),
            "Theta_gamma = 0 on the tube around (a, 0, 0), |a - 1| = 1",
        ));

        // Plancherel on seeded densities
        let mut plan = Batch::new(p);
        let mut boundary = Batch::new(p);
        let mut rng = suite_rng(cfg, 0x9b, p, 0);
        for _ in 0..cfg.functions.max(10) {
            let phi = random_function(&mut rng, p, 3, 1, 1);
            let rep = plancherel_verify(&phi)?;
            plan.push(&rep.lhs, &rep.rhs, tol);
            boundary.push_flag(rep.lower_boundary_vanishes);
            for (_, gamma) in &gammas {
                let cr = theta_gamma(gamma, &phi)?;
                dual.push(&cr.kernel_trace, &cr.diagonal_integral, 0.0);
            }
        }
        checks.push(plan.into_check(
            format!("plancherel p={p}"),
            "phi(1, 0, 0) = int_{k^x} Theta_gamma(phi) dm(gamma)",
        ));
        checks.push(boundary.into_count_check(
            format!("plancherel-boundary p={p}"),
            "the shell below the truncation window contributes exactly 0",
        ));
        checks.push(dual.into_check(
            format!("dual-method-consistency p={p}"),
            "kernel-matrix trace = closed diagonal integral on every instance",
        ));
    }
    Ok(())
}

/// Every suite in a fixed order.
pub fn run_all(cfg: &RunConfig, checks: &mut Vec<Check>) -> Result<()> {
    run_fourier(cfg, checks)?;
    run_weil(cfg, checks)?;
    run_heisenberg(cfg, checks)?;
    run_orbits(cfg, checks)?;
    run_plancherel(cfg, checks)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> RunConfig {
        RunConfig {
            prime: Some(3),
            functions: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn fourier_suite_passes_and_reports_deterministically() {
        let cfg = small_cfg();
        let mut checks = Vec::new();
        run_fourier(&cfg, &mut checks).unwrap();
        assert!(checks.iter().all(|c| c.pass));
        let a = Report::new(cfg.clone(), checks).to_json_bytes();
        let mut again = Vec::new();
        run_fourier(&cfg, &mut again).unwrap();
        let b = Report::new(cfg, again).to_json_bytes();
        assert_eq!(a, b);
    }

    #[test]
    fn orbit_suite_passes_on_the_small_config() {
        let cfg = small_cfg();
        let mut checks = Vec::new();
        run_orbits(&cfg, &mut checks).unwrap();
        assert!(!checks.is_empty());
        assert!(checks.iter().all(|c| c.pass), "{checks:#?}");
    }

    #[test]
    fn report_flags_a_failing_check() {
        let cfg = small_cfg();
        let bad = Check {
            name: "x".into(),
            identity: "y".into(),
            lhs: "0".into(),
            rhs: "1".into(),
            delta: 1.0,
            pass: false,
        };
        let rep = Report::new(cfg, vec![bad]);
        assert!(!rep.passed);
    }
}
