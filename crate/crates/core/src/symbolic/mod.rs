//! Exact arithmetic: symbolic constants, quadratic surds, polynomials and closed forms.

pub mod constexpr;
pub mod exppoly;
pub mod surd;
pub mod sympoly;
pub mod varpoly;

use std::sync::Arc;

pub use constexpr::{rational_to_decimal, rational_to_f64, ConstExpr};
pub use exppoly::{ExpPoly, ExpTerm};
pub use surd::Surd;
pub use sympoly::SymPoly;
pub use varpoly::{Monomial, VarPolynomial};

/// Interned identifier for program variables and symbolic constants.
pub type Name = Arc<str>;

/// Arbitrary-precision rational number.
pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SymbolicError {
    #[error("values from different quadratic fields sqrt({0}) and sqrt({1}) cannot be combined")]
    MixedSurds(u64, u64),
}

/// Parses `a`, `-a`, or `a/b` into a rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: num_bigint::BigInt = n.trim().parse().ok()?;
        let d: num_bigint::BigInt = d.trim().parse().ok()?;
        if num_traits::Zero::is_zero(&d) {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((i, f)) = s.split_once('.') {
        let neg = i.starts_with('-');
        let digits = format!("{}{}", i.trim_start_matches('-'), f);
        let n: num_bigint::BigInt = digits.parse().ok()?;
        let d = num_traits::pow(num_bigint::BigInt::from(10), f.len());
        let r = Rational::new(n, d);
        return Some(if neg { -r } else { r });
    }
    Some(Rational::from_integer(s.parse().ok()?))
}
