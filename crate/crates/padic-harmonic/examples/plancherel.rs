//! The Plancherel identity for the solvable example group: the value of a
//! test density at the group identity equals the integral of its characters
//! over the orbit parameter, computed as an exact shell sum with an exact
//! arithmetico-geometric tail.

use padic_harmonic::characters::{plancherel_verify, theta_gamma};
use padic_harmonic::padic::{max_precision, PAdicScalar};
use padic_harmonic::schwartz::random_function;
use padic_harmonic::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let p = 3u64;
    let prec = max_precision(p);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let phi = random_function(&mut rng, p, 3, 1, 1);
    println!("test density on window {:?}, {} cells", phi.window(), phi.support_size());

    let rep = plancherel_verify(&phi)?;
    println!("phi at the identity        = {}", rep.lhs);
    println!("character integral (shells) = {}", rep.rhs);
    println!(
        "shells start at v(gamma) = {}, tail law from {}; the boundary \
         shell below contributes {}",
        rep.first_shell,
        rep.tail_start,
        if rep.lower_boundary_vanishes { "exactly 0" } else { "a residue" }
    );
    assert_eq!(rep.lhs, rep.rhs);

    // each character is itself computed two ways; sample one parameter
    let gamma = PAdicScalar::from_integer(1, p, prec);
    let cr = theta_gamma(&gamma, &phi)?;
    println!(
        "at gamma = 1: kernel trace {} on a {} x {} grid agrees with the \
         diagonal integral {}",
        cr.kernel_trace, cr.matrix_size, cr.matrix_size, cr.diagonal_integral
    );
    assert!(cr.methods_agree());
    Ok(())
}
