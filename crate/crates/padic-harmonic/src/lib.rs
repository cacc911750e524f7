//! Exact harmonic analysis over the p-adic numbers.
//!
//! The crate computes with four layers, each exact:
//!
//! * [`padic`]: scalars of Q_p at a fixed digit precision, with tagged zero
//!   and the standard additive character trivial on Z_p.
//! * [`cyclotomic`]: character values in Q(zeta_8, zeta_{p^inf}), stored on a
//!   canonical basis so equality is literal comparison.
//! * [`schwartz`]: locally constant compactly supported functions as finite
//!   coset tables, with Fourier transform, convolution and fiber integration.
//! * On top of these: Weil indices of quadratic forms ([`weil`]), the lattice
//!   model of the Heisenberg group with its metaplectic intertwiners
//!   ([`heisenberg`]), coadjoint orbits of a three-dimensional solvable group
//!   ([`solvable`]) and character / Plancherel identities for its principal
//!   series ([`characters`]).
//!
//! Every integral that appears is a finite sum plus, where a tail survives,
//! an exact geometric or arithmetico-geometric closed form; floating point
//! only enters when a report wants a human-readable magnitude.
//!
//! See the `examples/` directory for one runnable walkthrough per capability,
//! and the `padic-harmonic` binary for the batch verification interface.

pub mod characters;
pub mod config;
pub mod cyclotomic;
pub mod heisenberg;
pub mod linalg;
pub mod padic;
pub mod report;
pub mod schwartz;
pub mod solvable;
pub mod weil;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
