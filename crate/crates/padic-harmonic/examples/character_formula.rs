//! Characters of the solvable example group, computed two independent
//! ways, then matched against the orbit integral at the identity and shown
//! to vanish on a tube around a fixed-point-free semisimple element.

use padic_harmonic::characters::{
    character_formula_sides_s1, theta_gamma, tube_density,
};
use padic_harmonic::padic::{max_precision, PAdicScalar};
use padic_harmonic::schwartz::random_function;
use padic_harmonic::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let p = 3u64;
    let prec = max_precision(p);
    let one = PAdicScalar::one(p, prec);
    let gamma = PAdicScalar::from_integer(1, p, prec);

    // a density supported near the identity: the ball (1 + 3 O) x O x O
    // cut by a seeded locally constant factor
    let ball = tube_density(p, &one, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let phi = loop {
        let draw = random_function(&mut rng, p, 3, 0, 1).pointwise_mul(&ball)?;
        if !draw.is_zero() {
            break draw;
        }
    };

    let (rep, orbital) = character_formula_sides_s1(&gamma, &phi)?;
    println!("kernel-matrix trace      = {}", rep.kernel_trace);
    println!("closed diagonal integral = {}", rep.diagonal_integral);
    println!("orbit integral of F(phi o exp) = {orbital}");
    assert!(rep.methods_agree());
    assert_eq!(rep.kernel_trace, orbital);
    println!("the character at the identity is the orbit integral, exactly");

    // around (2, 0, 0) the conjugation action has no fixed vectors and the
    // character integral dies cell by cell
    let away = tube_density(p, &PAdicScalar::from_integer(2, p, prec), 1)?;
    let rep = theta_gamma(&gamma, &away)?;
    println!(
        "on the tube around (2, 0, 0): trace = {}, diagonal integral = {}",
        rep.kernel_trace, rep.diagonal_integral
    );
    assert!(rep.kernel_trace.is_zero() && rep.diagonal_integral.is_zero());
    Ok(())
}
