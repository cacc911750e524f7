//! The lattice model of the Heisenberg group: smear the representation
//! against a density, take the trace of the resulting finite-rank operator,
//! and compare with the fixed-point side, at s = 1 and at a diagonal
//! semisimple s.

use padic_harmonic::heisenberg::{
    trace_formula_sides, twisted_trace_formula_sides, LatticeModel,
};
use padic_harmonic::linalg::MatK;
use padic_harmonic::padic::{max_precision, PAdicScalar};
use padic_harmonic::schwartz::{random_function, SchwartzFunction};
use padic_harmonic::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let p = 3u64;
    let prec = max_precision(p);
    let a0 = PAdicScalar::from_integer(p as i128, p, prec);
    let model = LatticeModel::new(1, p, a0)?;
    println!(
        "lattice model at p = {p}, central parameter of valuation {:?}",
        model.central_parameter().valuation()?
    );

    // s = 1: trace of the smeared operator vs the hyperplane integral
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let phi = random_function(&mut rng, p, 3, 1, 1);
    let (lhs, rhs, level) = trace_formula_sides(&model, &phi)?;
    println!("identity trace: operator side {lhs}");
    println!("identity trace: orbit side    {rhs} (stable at level {level})");
    assert_eq!(lhs, rhs);

    // s = diag(2, 2^{-1}): 1 - s is invertible, so the trace localizes at
    // the single fixed point and picks up the metaplectic twist
    let mut s = MatK::zero(2, 2, p);
    s.set(0, 0, PAdicScalar::from_integer(2, p, prec));
    s.set(1, 1, PAdicScalar::from_rational(1, 2, p, prec)?);
    let beta = SchwartzFunction::lattice_indicator(p, 1, -1);
    let (lhs, rhs, chr) = twisted_trace_formula_sides(&model, &s, &beta)?;
    println!("twisted trace: operator side {lhs}");
    println!("twisted trace: formula side  {rhs}");
    println!(
        "twist factor has modulus {:.12}, stable from level {}",
        chr.value.approx_abs(),
        chr.stabilization_level
    );
    assert!(lhs.approx_distance(&rhs) < 1e-9);
    Ok(())
}
