//! Normalized Gauss sums of quadratic forms: modulus one, stabilization,
//! multiplicativity over orthogonal sums, and the twisted convolution
//! identity relating a form to its inverse form.

use padic_harmonic::padic::{max_precision, PAdicScalar};
use padic_harmonic::schwartz::SchwartzFunction;
use padic_harmonic::weil::{index_identity_sides, weil_index, QuadraticForm};
use padic_harmonic::Result;

fn main() -> Result<()> {
    let p = 3u64;
    let prec = max_precision(p);
    let sc = |n: i128| PAdicScalar::from_integer(n, p, prec);
    let a0 = sc(1);

    let q1 = QuadraticForm::diagonal(&[sc(1)])?;
    let q2 = QuadraticForm::diagonal(&[sc(2), sc(3)])?;
    for (label, q) in [("diag(1)", &q1), ("diag(2, 3)", &q2)] {
        let idx = weil_index(q, &a0)?;
        println!(
            "gamma({label}) = {} (|.| = {:.12}, stable from level {})",
            idx.value,
            idx.value.approx_abs(),
            idx.stabilization_level
        );
    }

    // the index is multiplicative over orthogonal sums
    let sum = q1.direct_sum(&q2)?;
    let lhs = weil_index(&sum, &a0)?.value;
    let rhs = weil_index(&q1, &a0)?.value.mul(&weil_index(&q2, &a0)?.value);
    assert_eq!(lhs, rhs);
    println!("gamma(Q1 + Q2) = gamma(Q1) gamma(Q2) = {lhs}");

    // twisted convolution: integrating phi against sigma(a0 Q) equals the
    // index times a dual integral against the inverse form
    let phi = SchwartzFunction::lattice_indicator(p, 2, -1);
    let (l, r) = index_identity_sides(&q2, &a0, &phi)?;
    println!("twisted integral  = {l}");
    println!("index * dual side = {r}");
    assert!(l.approx_distance(&r) < 1e-9);
    Ok(())
}
