//! Fourier analysis on coset tables: build a locally constant function of
//! compact support, transform it, and watch the classical identities hold
//! exactly.

use padic_harmonic::cyclotomic::CyclotomicValue;
use padic_harmonic::padic::{max_precision, PAdicScalar};
use padic_harmonic::schwartz::{SchwartzFunction, Window};
use padic_harmonic::Result;

fn main() -> Result<()> {
    let p = 5u64;
    let prec = max_precision(p);

    // f = indicator of 2 + 5 O, modulated by sigma(3 x / 25)
    let base = SchwartzFunction::from_entries(
        p,
        1,
        Window { outer: 0, inner: 1 },
        vec![(vec![2], CyclotomicValue::one(p))],
    )?;
    let f = base.modulate(&[PAdicScalar::from_rational(3, 25, p, prec)?])?;
    println!("f lives on window {:?} with {} cells", f.window(), f.support_size());

    let fh = f.fourier();
    println!("F f lives on window {:?} with {} cells", fh.window(), fh.support_size());

    // inversion is exact, not approximate
    let round = fh.fourier_inverse();
    assert_eq!(round, f);
    println!("F^-1 F f = f exactly");

    // the double transform reflects the argument
    let twice = fh.fourier();
    assert_eq!(twice.table(), f.negate_argument().table());
    println!("F F f = f(-x) exactly");

    // Parseval: the two L^2 norms agree as cyclotomic numbers
    let norm = |g: &SchwartzFunction| {
        let mut acc = CyclotomicValue::zero(p);
        for v in g.table().values() {
            acc = acc.add(&v.mul(&v.conj()));
        }
        acc.scale(&g.coset_volume())
    };
    assert_eq!(norm(&f), norm(&fh));
    println!("||f||^2 = ||F f||^2 = {}", norm(&f));

    // convolution theorem against a second function
    let g = SchwartzFunction::lattice_indicator(p, 1, 0);
    let lhs = f.convolve(&g)?.fourier();
    let rhs = fh.pointwise_mul(&g.fourier())?;
    assert_eq!(lhs, rhs);
    println!("F(f * g) = (F f)(F g) exactly");
    Ok(())
}
