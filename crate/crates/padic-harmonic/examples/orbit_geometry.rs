//! Coadjoint orbits of the three-dimensional solvable group (a, x, y):
//! stabilizers and regularity of linear forms, invariance of the orbit
//! chart measure, and the disintegration of the dual-space measure over
//! the orbit space.

use padic_harmonic::padic::{max_precision, PAdicScalar};
use padic_harmonic::schwartz::random_function;
use padic_harmonic::solvable::{
    chart_integral, disintegration_sides, omega_locus, regularity_report,
    GroupElement, LieAlgebraData, LinearForm,
};
use padic_harmonic::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let p = 3u64;
    let prec = max_precision(p);
    let alg = LieAlgebraData::gamma_example(p);

    for coeffs in [[1, 0, 0], [0, 1, 0], [2, 1, 3], [0, 1, 1]] {
        let f = LinearForm::from_integers(p, &coeffs.map(|c| c as i128));
        let rr = regularity_report(&f, &alg)?;
        println!(
            "form {coeffs:?}: stabilizer dim {}, strongly regular {}, \
             closed 2d orbit {}",
            rr.stabilizer_dim,
            rr.strongly_regular,
            omega_locus(&f)
        );
    }

    // the chart measure dm(a)/|a| is invariant under the group action on
    // the orbit through f_{(0, beta, gamma)}
    let sc = |n: i128| PAdicScalar::from_integer(n, p, prec);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let f2 = random_function(&mut rng, p, 2, 1, 1);
    let direct = chart_integral(&sc(1), &sc(1), &f2)?;
    let g = GroupElement::from_integers(p, 2, 1, 0)?;
    let moved = chart_integral(&g.a.inverse()?.mul(&sc(1)), &g.a.mul(&sc(1)), &f2)?;
    println!("orbit integral          = {direct}");
    println!("after moving base point = {moved}");
    assert_eq!(direct, moved);

    // integrating over the dual of the abelian radical equals integrating
    // each orbit and then the orbit space, tail closed in exact arithmetic
    let rep = disintegration_sides(&f2)?;
    println!("direct integral  = {}", rep.direct);
    println!("orbit-fibered    = {} (tail law from shell {})", rep.fibered, rep.tail_start);
    assert_eq!(rep.direct, rep.fibered);
    Ok(())
}
