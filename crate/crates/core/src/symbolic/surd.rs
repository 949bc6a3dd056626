//! Quadratic surds `a + b*sqrt(d)` over the constant field.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use super::constexpr::{rational_to_decimal, rational_to_f64, ConstExpr};
use super::{Name, Rational};

/// `a + b*sqrt(d)` with `d` a squarefree positive integer; `b = 0` implies `d = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Surd {
    d: u64,
    a: ConstExpr,
    b: ConstExpr,
}

fn squarefree_split(n: u64) -> (u64, u64) {
    // n = k^2 * s with s squarefree
    let mut k = 1u64;
    let mut s = 1u64;
    let mut m = n;
    let mut p = 2u64;
    while p * p <= m {
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        k *= p.pow(e / 2);
        if e % 2 == 1 {
            s *= p;
        }
        p += 1;
    }
    s *= m;
    (k, s)
}

impl Surd {
    pub fn new(a: ConstExpr, b: ConstExpr, d: u64) -> Surd {
        if d == 0 || b.is_zero() {
            return Surd { a, b: ConstExpr::zero(), d: 1 };
        }
        let (k, s) = squarefree_split(d);
        let b = if k == 1 { b } else { &b * &ConstExpr::int(k as i64) };
        if s == 1 {
            Surd { a: &a + &b, b: ConstExpr::zero(), d: 1 }
        } else {
            Surd { a, b, d: s }
        }
    }

    pub fn from_const(a: ConstExpr) -> Surd {
        Surd { a, b: ConstExpr::zero(), d: 1 }
    }

    pub fn rational(r: Rational) -> Surd {
        Surd::from_const(ConstExpr::Rat(r))
    }

    pub fn int(i: i64) -> Surd {
        Surd::from_const(ConstExpr::int(i))
    }

    pub fn zero() -> Surd {
        Surd::int(0)
    }

    pub fn one() -> Surd {
        Surd::int(1)
    }

    /// `sqrt(r)` for a non-negative rational `r`.
    pub fn sqrt_rational(r: &Rational) -> Option<Surd> {
        if r.is_negative() {
            return None;
        }
        // sqrt(p/q) = sqrt(p*q)/q
        let pq = (r.numer() * r.denom()).to_u64()?;
        let q = Rational::from_integer(r.denom().clone());
        Some(Surd::new(
            ConstExpr::zero(),
            ConstExpr::Rat(q.recip()),
            pq,
        ))
    }

    pub fn a(&self) -> &ConstExpr {
        &self.a
    }

    pub fn b(&self) -> &ConstExpr {
        &self.b
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.a.is_one() && self.b.is_zero()
    }

    pub fn is_plain(&self) -> bool {
        self.b.is_zero()
    }

    pub fn as_const(&self) -> Option<&ConstExpr> {
        self.is_plain().then_some(&self.a)
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        self.as_const().and_then(ConstExpr::as_rational)
    }

    pub fn is_rational_valued(&self) -> bool {
        self.a.is_rational() && self.b.is_rational()
    }

    pub fn compatible(&self, other: &Surd) -> bool {
        self.d == 1 || other.d == 1 || self.d == other.d
    }

    fn joint_d(&self, other: &Surd) -> Option<u64> {
        match (self.d, other.d) {
            (1, e) | (e, 1) => Some(e),
            (d, e) if d == e => Some(d),
            _ => None,
        }
    }

    pub fn checked_add(&self, other: &Surd) -> Option<Surd> {
        let d = self.joint_d(other)?;
        Some(Surd::new(&self.a + &other.a, &self.b + &other.b, d))
    }

    pub fn checked_sub(&self, other: &Surd) -> Option<Surd> {
        self.checked_add(&-other)
    }

    pub fn checked_mul(&self, other: &Surd) -> Option<Surd> {
        let d = self.joint_d(other)?;
        let dd = ConstExpr::int(d as i64);
        let a = &(&self.a * &other.a) + &(&(&self.b * &other.b) * &dd);
        let b = &(&self.a * &other.b) + &(&self.b * &other.a);
        Some(Surd::new(a, b, d))
    }

    pub fn conj(&self) -> Surd {
        Surd { a: self.a.clone(), b: -&self.b, d: self.d }
    }

    /// Field norm `a^2 - d*b^2`.
    pub fn norm(&self) -> ConstExpr {
        &(&self.a * &self.a) - &(&(&self.b * &self.b) * &ConstExpr::int(self.d as i64))
    }

    pub fn recip(&self) -> Option<Surd> {
        let n = self.norm();
        let inv = n.recip()?;
        let c = self.conj();
        Some(Surd::new(&c.a * &inv, &c.b * &inv, self.d))
    }

    pub fn checked_div(&self, other: &Surd) -> Option<Surd> {
        self.checked_mul(&other.recip()?)
    }

    pub fn pow(&self, e: u32) -> Surd {
        let mut acc = Surd::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Exact sign; `None` when symbols are involved.
    pub fn sign(&self) -> Option<Ordering> {
        let a = self.a.as_rational()?;
        let b = self.b.as_rational()?;
        if b.is_zero() {
            return Some(a.cmp(&Rational::zero()));
        }
        let sa = a.cmp(&Rational::zero());
        let sb = b.cmp(&Rational::zero());
        if sa == sb || sa == Ordering::Equal {
            return Some(sb);
        }
        // Signs differ: compare a^2 with d*b^2.
        let a2 = a * a;
        let bd = b * b * Rational::from_integer(BigInt::from(self.d));
        match a2.cmp(&bd) {
            Ordering::Greater => Some(sa),
            Ordering::Less => Some(sb),
            Ordering::Equal => Some(Ordering::Equal),
        }
    }

    pub fn abs(&self) -> Option<Surd> {
        match self.sign()? {
            Ordering::Less => Some(-self),
            _ => Some(self.clone()),
        }
    }

    /// Exact comparison of real values; `None` for symbolic or incompatible surds.
    pub fn cmp_value(&self, other: &Surd) -> Option<Ordering> {
        self.checked_sub(other)?.sign()
    }

    pub fn bind(&self, bindings: &BTreeMap<Name, Rational>) -> Surd {
        Surd::new(self.a.bind(bindings), self.b.bind(bindings), self.d)
    }

    pub fn substitute(&self, map: &BTreeMap<Name, ConstExpr>) -> Surd {
        Surd::new(self.a.substitute(map), self.b.substitute(map), self.d)
    }

    pub fn to_f64(&self) -> Option<f64> {
        let a = rational_to_f64(self.a.as_rational()?);
        let b = rational_to_f64(self.b.as_rational()?);
        Some(a + b * (self.d as f64).sqrt())
    }

    /// Decimal rendering with `digits` fractional digits, computed exactly by
    /// bracketing `sqrt(d)` with integer square roots.
    pub fn to_decimal(&self, digits: usize) -> Option<String> {
        let a = self.a.as_rational()?;
        let b = self.b.as_rational()?;
        if b.is_zero() {
            return Some(rational_to_decimal(a, digits));
        }
        let guard = digits + 10;
        let scale = num_traits::pow(BigInt::from(10), guard);
        let s = (BigInt::from(self.d) * &scale * &scale).sqrt();
        let root = Rational::new(s, scale);
        Some(rational_to_decimal(&(a + b * root), digits))
    }
}

impl From<ConstExpr> for Surd {
    fn from(c: ConstExpr) -> Self {
        Surd::from_const(c)
    }
}

impl From<Rational> for Surd {
    fn from(r: Rational) -> Self {
        Surd::rational(r)
    }
}

impl<'a> Add<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn add(self, o: &Surd) -> Surd {
        self.checked_add(o).expect("mixed quadratic fields")
    }
}

impl<'a> Sub<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn sub(self, o: &Surd) -> Surd {
        self.checked_sub(o).expect("mixed quadratic fields")
    }
}

impl<'a> Mul<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn mul(self, o: &Surd) -> Surd {
        self.checked_mul(o).expect("mixed quadratic fields")
    }
}

impl Neg for &Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd { a: -&self.a, b: -&self.b, d: self.d }
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        -&self
    }
}

fn needs_parens(c: &ConstExpr) -> bool {
    let s = c.to_string();
    s.contains(' ') || s.contains('/')
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            return write!(f, "{}", self.a);
        }
        let b_str = if self.b.is_one() {
            format!("sqrt({})", self.d)
        } else if (&self.b + &ConstExpr::one()).is_zero() {
            format!("-sqrt({})", self.d)
        } else if needs_parens(&self.b) && !self.b.is_rational() {
            format!("({})*sqrt({})", self.b, self.d)
        } else {
            format!("{}*sqrt({})", self.b, self.d)
        };
        if self.a.is_zero() {
            return write!(f, "{b_str}");
        }
        match b_str.strip_prefix('-') {
            Some(rest) => write!(f, "{} - {rest}", self.a),
            None => write!(f, "{} + {b_str}", self.a),
        }
    }
}

impl Serialize for Surd {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl Surd {
    pub fn is_minus_one(&self) -> bool {
        self.as_rational().is_some_and(|r| *r == -Rational::one())
    }

    pub fn is_one_value(&self) -> bool {
        self.as_rational().is_some_and(One::is_one)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn sqrt_normalizes() {
        let s = Surd::sqrt_rational(&r(3, 2)).unwrap();
        assert_eq!(s.d(), 6);
        assert_eq!(s.b(), &ConstExpr::ratio(1, 2));
        let t = Surd::sqrt_rational(&r(9, 4)).unwrap();
        assert_eq!(t, Surd::rational(r(3, 2)));
    }

    #[test]
    fn arithmetic_roundtrip() {
        let s = Surd::new(ConstExpr::int(1), ConstExpr::int(2), 5);
        let inv = s.recip().unwrap();
        assert!((&s * &inv).is_one());
        assert_eq!(s.pow(2), Surd::new(ConstExpr::int(21), ConstExpr::int(4), 5));
    }

    #[test]
    fn sign_of_differences() {
        let s = Surd::new(ConstExpr::int(2), ConstExpr::int(-1), 3);
        assert_eq!(s.sign(), Some(Ordering::Greater));
        let t = Surd::new(ConstExpr::int(1), ConstExpr::int(-1), 3);
        assert_eq!(t.sign(), Some(Ordering::Less));
    }

    #[test]
    fn decimals() {
        let s = Surd::sqrt_rational(&r(2, 1)).unwrap();
        assert_eq!(s.to_decimal(10).unwrap(), "1.4142135624");
    }

    #[test]
    fn mixed_fields_are_rejected() {
        let a = Surd::sqrt_rational(&r(2, 1)).unwrap();
        let b = Surd::sqrt_rational(&r(3, 1)).unwrap();
        assert!(a.checked_add(&b).is_none());
    }
}
