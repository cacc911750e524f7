//! Run configuration: a documented structured-text schema plus flag
//! overrides.
//!
//! Configs are TOML.  Every field is optional and falls back to the default
//! shown; command line flags override file fields.  Identical config plus
//! seed produces byte-identical reports.
//!
//! ```toml
//! prime = 3                  # restrict every suite to this odd prime
//! precision = 0              # working digits for inputs; 0 = widest that
//!                            #   fits a machine word at the chosen prime
//! a0 = "1"                   # central / twisting parameter for the
//!                            #   quadratic form suite: "2", "p", "2*p^3",
//!                            #   or "nonsquare" (least non-residue unit)
//! tolerance = 1e-9           # acceptance threshold for inexact checks
//! seed = 17                  # RNG seed for every sampled test density
//! preset = "gamma-example"   # built-in group/algebra preset
//! gamma-shells = [-1, 0, 1]  # valuations of the character parameter samples
//! functions = 10             # seeded test densities per suite instance
//! out = "report.json"        # report path; omitted = stdout only
//! ```

use crate::cyclotomic::legendre;
use crate::error::Error;
use crate::padic::{max_precision, PAdicScalar};
use crate::Result;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_SEED: u64 = 17;
pub const PRESET_NAME: &str = "gamma-example";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// Restrict every suite to one odd prime; unset runs each suite's
    /// built-in prime list.
    pub prime: Option<u64>,
    /// Working digits for inputs constructed by the suites; 0 picks the
    /// widest precision that fits a machine word at the prime in play.
    pub precision: u32,
    /// Twisting parameter for the quadratic form suite, see the grammar in
    /// the module doc.
    pub a0: String,
    pub tolerance: f64,
    pub seed: u64,
    /// Group/algebra preset; only `gamma-example` ships.
    pub preset: String,
    /// Valuations v(gamma) at which the character suites sample the orbit
    /// parameter.
    pub gamma_shells: Vec<i64>,
    /// Seeded test densities per suite instance.
    pub functions: usize,
    /// Report output path; `None` prints to stdout only.
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            prime: None,
            precision: 0,
            a0: "1".into(),
            tolerance: DEFAULT_TOLERANCE,
            seed: DEFAULT_SEED,
            preset: PRESET_NAME.into(),
            gamma_shells: vec![-1, 0, 1],
            functions: 10,
            out: None,
        }
    }
}

/// Parsed form of the `a0` field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum A0Spec {
    /// `unit * p^pow`.
    Literal { unit: i128, pow: u32 },
    /// The least quadratic non-residue unit of the prime in play.
    NonSquare,
}

fn parse_a0(s: &str) -> Result<A0Spec> {
    let s = s.trim();
    if s == "nonsquare" {
        return Ok(A0Spec::NonSquare);
    }
    let mut unit: i128 = 1;
    let mut pow: u32 = 0;
    let mut seen_unit = false;
    let mut seen_p = false;
    for part in s.split('*') {
        let part = part.trim();
        if let Some(rest) = part.strip_prefix('p') {
            if seen_p {
                return Err(Error::Parse(format!("a0 `{s}`: repeated p factor")));
            }
            seen_p = true;
            pow = if rest.is_empty() {
                1
            } else {
                let rest = rest.strip_prefix('^').ok_or_else(|| {
                    Error::Parse(format!("a0 `{s}`: expected p or p^k"))
                })?;
                rest.parse::<u32>()
                    .map_err(|e| Error::Parse(format!("a0 `{s}`: {e}")))?
            };
        } else {
            if seen_unit {
                return Err(Error::Parse(format!("a0 `{s}`: repeated integer factor")));
            }
            seen_unit = true;
            unit = part
                .parse::<i128>()
                .map_err(|e| Error::Parse(format!("a0 `{s}`: {e}")))?;
        }
    }
    if unit == 0 {
        return Err(Error::Parse("a0 must be nonzero".into()));
    }
    Ok(A0Spec::Literal { unit, pow })
}

fn is_odd_prime(n: u64) -> bool {
    if n < 3 || n % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Structural validation; all violations are config errors.
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.prime {
            if !is_odd_prime(p) {
                return Err(Error::Parse(format!("prime {p} is not an odd prime")));
            }
            if self.precision != 0 && self.precision > max_precision(p) {
                return Err(Error::Parse(format!(
                    "precision {} exceeds the machine-word bound {} at p = {p}",
                    self.precision,
                    max_precision(p)
                )));
            }
        }
        if self.precision != 0 && self.precision < 8 {
            return Err(Error::Parse(
                "precision below 8 digits leaves no room for cancellation".into(),
            ));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::Parse("tolerance must be a positive float".into()));
        }
        if self.preset != PRESET_NAME {
            return Err(Error::Parse(format!(
                "unknown preset `{}`; only `{PRESET_NAME}` ships",
                self.preset
            )));
        }
        if self.gamma_shells.is_empty() {
            return Err(Error::Parse("gamma-shells must be nonempty".into()));
        }
        if self.gamma_shells.iter().any(|s| s.abs() > 4) {
            return Err(Error::Parse(
                "gamma-shells beyond |v| = 4 exceed the desk-scale windows".into(),
            ));
        }
        if self.functions == 0 || self.functions > 1000 {
            return Err(Error::Parse("functions must lie in 1..=1000".into()));
        }
        parse_a0(&self.a0)?;
        Ok(())
    }

    /// The primes a suite should run at: the configured one, or the suite's
    /// built-in list.
    pub fn primes(&self, defaults: &[u64]) -> Vec<u64> {
        match self.prime {
            Some(p) => vec![p],
            None => defaults.to_vec(),
        }
    }

    pub fn working_precision(&self, prime: u64) -> Result<u32> {
        if self.precision == 0 {
            return Ok(max_precision(prime));
        }
        if self.precision > max_precision(prime) {
            return Err(Error::Parse(format!(
                "precision {} exceeds the machine-word bound {} at p = {prime}",
                self.precision,
                max_precision(prime)
            )));
        }
        Ok(self.precision)
    }

    pub fn a0_spec(&self) -> Result<A0Spec> {
        parse_a0(&self.a0)
    }

    /// Resolve the `a0` field at a prime.
    pub fn a0_scalar(&self, prime: u64) -> Result<PAdicScalar> {
        let prec = self.working_precision(prime)?;
        match self.a0_spec()? {
            A0Spec::Literal { unit, pow } => {
                let mut v = unit;
                for _ in 0..pow {
                    v = v
                        .checked_mul(prime as i128)
                        .ok_or_else(|| Error::Parse("a0 overflows".into()))?;
                }
                Ok(PAdicScalar::from_integer(v, prime, prec))
            }
            A0Spec::NonSquare => Ok(PAdicScalar::from_integer(
                nonsquare_unit(prime) as i128,
                prime,
                prec,
            )),
        }
    }
}

/// Least unit that is not a square mod p.
pub fn nonsquare_unit(prime: u64) -> u64 {
    (2..prime)
        .find(|&u| legendre(u, prime) == -1)
        .expect("every odd prime has a non-residue")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip_through_toml() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.gamma_shells, cfg.gamma_shells);
    }

    #[test]
    fn a0_grammar_accepts_the_documented_forms() {
        for (s, want) in [
            ("1", A0Spec::Literal { unit: 1, pow: 0 }),
            ("-3", A0Spec::Literal { unit: -3, pow: 0 }),
            ("p", A0Spec::Literal { unit: 1, pow: 1 }),
            ("p^2", A0Spec::Literal { unit: 1, pow: 2 }),
            ("2*p", A0Spec::Literal { unit: 2, pow: 1 }),
            ("2 * p^3", A0Spec::Literal { unit: 2, pow: 3 }),
            ("nonsquare", A0Spec::NonSquare),
        ] {
            assert_eq!(parse_a0(s).unwrap(), want, "{s}");
        }
        for bad in ["", "0", "p^", "q", "2*2", "p*p"] {
            assert!(parse_a0(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn validation_rejects_malformed_fields() {
        let mut cfg = RunConfig::default();
        cfg.prime = Some(9);
        assert!(cfg.validate().is_err());
        cfg.prime = Some(7);
        cfg.validate().unwrap();
        cfg.tolerance = 0.0;
        assert!(cfg.validate().is_err());
        cfg.tolerance = 1e-9;
        cfg.preset = "other".into();
        assert!(cfg.validate().is_err());
        cfg.preset = PRESET_NAME.into();
        cfg.precision = 4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn nonsquare_units_are_non_residues() {
        assert_eq!(nonsquare_unit(3), 2);
        assert_eq!(nonsquare_unit(5), 2);
        assert_eq!(nonsquare_unit(7), 3);
    }
}
