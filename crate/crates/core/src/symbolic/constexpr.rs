//! Exact constants: rationals or canonical rational functions of symbolic constants.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use super::sympoly::{gcd, rational_sqrt, SymPoly};
use super::{Name, Rational};

/// Reduced quotient of two polynomials whose denominator has a monic leading term
/// and is not constant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RatFunc {
    num: SymPoly,
    den: SymPoly,
}

impl RatFunc {
    pub fn numer(&self) -> &SymPoly {
        &self.num
    }

    pub fn denom(&self) -> &SymPoly {
        &self.den
    }
}

/// Element of the field Q(symbols), always in canonical form.
///
/// Structural equality is semantic equality: rationals are stored as `Rat`,
/// everything else as a gcd-reduced fraction with a monic denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstExpr {
    Rat(Rational),
    Sym(Box<RatFunc>),
}

impl Default for ConstExpr {
    fn default() -> Self {
        ConstExpr::zero()
    }
}

impl ConstExpr {
    pub fn zero() -> Self {
        ConstExpr::Rat(Rational::zero())
    }

    pub fn one() -> Self {
        ConstExpr::Rat(Rational::one())
    }

    pub fn int(i: i64) -> Self {
        ConstExpr::Rat(Rational::from_integer(i.into()))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        ConstExpr::Rat(Rational::new(n.into(), d.into()))
    }

    pub fn symbol(name: impl Into<Name>) -> Self {
        ConstExpr::Sym(Box::new(RatFunc {
            num: SymPoly::symbol(name.into()),
            den: SymPoly::one(),
        }))
    }

    pub fn from_poly(p: SymPoly) -> Self {
        Self::from_parts(p, SymPoly::one())
    }

    /// Builds `num / den` in canonical form. Panics if `den` is zero.
    pub fn from_parts(num: SymPoly, den: SymPoly) -> Self {
        assert!(!den.is_zero(), "division by zero constant");
        if num.is_zero() {
            return ConstExpr::zero();
        }
        if let Some(d) = den.as_constant() {
            let num = num.scale(&d.recip());
            return match num.as_constant() {
                Some(c) => ConstExpr::Rat(c),
                None => ConstExpr::Sym(Box::new(RatFunc { num, den: SymPoly::one() })),
            };
        }
        let g = gcd(&num, &den);
        let (mut num, mut den) = if g.is_constant() {
            (num, den)
        } else {
            (
                num.div_exact(&g).expect("gcd divides numerator"),
                den.div_exact(&g).expect("gcd divides denominator"),
            )
        };
        let lc = den.leading_coefficient();
        if !lc.is_one() {
            let inv = lc.recip();
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        if let Some(d) = den.as_constant() {
            let num = num.scale(&d.recip());
            return match num.as_constant() {
                Some(c) => ConstExpr::Rat(c),
                None => ConstExpr::Sym(Box::new(RatFunc { num, den: SymPoly::one() })),
            };
        }
        ConstExpr::Sym(Box::new(RatFunc { num, den }))
    }

    fn parts(&self) -> (SymPoly, SymPoly) {
        match self {
            ConstExpr::Rat(r) => (SymPoly::constant(r.clone()), SymPoly::one()),
            ConstExpr::Sym(f) => (f.num.clone(), f.den.clone()),
        }
    }

    pub fn numer_poly(&self) -> SymPoly {
        self.parts().0
    }

    pub fn denom_poly(&self) -> SymPoly {
        self.parts().1
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            ConstExpr::Rat(r) => Some(r),
            ConstExpr::Sym(_) => None,
        }
    }

    /// The polynomial if the denominator is trivial.
    pub fn as_poly(&self) -> Option<SymPoly> {
        let (n, d) = self.parts();
        d.as_constant().map(|c| n.scale(&c.recip()))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ConstExpr::Rat(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, ConstExpr::Rat(r) if r.is_one())
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, ConstExpr::Rat(_))
    }

    pub fn symbols(&self) -> BTreeSet<Name> {
        match self {
            ConstExpr::Rat(_) => BTreeSet::new(),
            ConstExpr::Sym(f) => {
                let mut s = f.num.symbols();
                s.extend(f.den.symbols());
                s
            }
        }
    }

    pub fn checked_div(&self, other: &ConstExpr) -> Option<ConstExpr> {
        if other.is_zero() {
            return None;
        }
        if let (ConstExpr::Rat(a), ConstExpr::Rat(b)) = (self, other) {
            return Some(ConstExpr::Rat(a / b));
        }
        let (an, ad) = self.parts();
        let (bn, bd) = other.parts();
        Some(Self::from_parts(an.mul(&bd), ad.mul(&bn)))
    }

    pub fn recip(&self) -> Option<ConstExpr> {
        ConstExpr::one().checked_div(self)
    }

    /// Integer power; negative exponents need a nonzero base.
    pub fn pow(&self, e: i64) -> ConstExpr {
        if e < 0 {
            return self
                .recip()
                .expect("negative power of zero")
                .pow(-e);
        }
        match self {
            ConstExpr::Rat(r) => ConstExpr::Rat(num_traits::pow(r.clone(), e as usize)),
            ConstExpr::Sym(f) => ConstExpr::Sym(Box::new(RatFunc {
                num: f.num.pow(e as u32),
                den: f.den.pow(e as u32),
            })),
        }
    }

    /// Exact square root when numerator and denominator are both perfect squares.
    pub fn sqrt(&self) -> Option<ConstExpr> {
        match self {
            ConstExpr::Rat(r) => rational_sqrt(r).map(ConstExpr::Rat),
            ConstExpr::Sym(f) => {
                let n = f.num.sqrt()?;
                let d = f.den.sqrt()?;
                Some(Self::from_parts(n, d))
            }
        }
    }

    /// Sign for rationals; `None` when symbols are present.
    pub fn sign(&self) -> Option<std::cmp::Ordering> {
        self.as_rational().map(|r| r.cmp(&Rational::zero()))
    }

    pub fn substitute(&self, map: &BTreeMap<Name, ConstExpr>) -> ConstExpr {
        let ConstExpr::Sym(f) = self else {
            return self.clone();
        };
        let mut num = ConstExpr::zero();
        for (m, c) in f.num.terms() {
            num = &num + &monomial_value(m, c, map);
        }
        let mut den = ConstExpr::zero();
        for (m, c) in f.den.terms() {
            den = &den + &monomial_value(m, c, map);
        }
        num.checked_div(&den)
            .expect("substitution made a denominator vanish")
    }

    /// Substitutes rational values and returns a rational if every symbol is bound.
    pub fn eval(&self, bindings: &BTreeMap<Name, Rational>) -> Option<Rational> {
        match self {
            ConstExpr::Rat(r) => Some(r.clone()),
            ConstExpr::Sym(f) => {
                let n = f.num.eval(bindings)?;
                let d = f.den.eval(bindings)?;
                (!d.is_zero()).then(|| n / d)
            }
        }
    }

    pub fn bind(&self, bindings: &BTreeMap<Name, Rational>) -> ConstExpr {
        if bindings.is_empty() || self.is_rational() {
            return self.clone();
        }
        let map = bindings
            .iter()
            .map(|(k, v)| (k.clone(), ConstExpr::Rat(v.clone())))
            .collect();
        self.substitute(&map)
    }

    pub fn to_f64(&self) -> Option<f64> {
        self.as_rational().map(rational_to_f64)
    }
}

fn monomial_value(
    m: &super::sympoly::SymMonomial,
    c: &Rational,
    map: &BTreeMap<Name, ConstExpr>,
) -> ConstExpr {
    let mut t = ConstExpr::Rat(c.clone());
    for (n, e) in m.factors() {
        let v = map.get(n).cloned().unwrap_or_else(|| ConstExpr::symbol(n.clone()));
        t = &t * &v.pow(*e as i64);
    }
    t
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        // Fall back to scaled division for huge operands.
        let n = r.numer().bits() as i64;
        let d = r.denom().bits() as i64;
        let shift = (n - d).clamp(-1000, 1000);
        let scaled = if shift > 0 {
            Rational::new(r.numer().clone(), r.denom() << shift as usize)
        } else {
            Rational::new(r.numer() << (-shift) as usize, r.denom().clone())
        };
        scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
    })
}

impl From<Rational> for ConstExpr {
    fn from(r: Rational) -> Self {
        ConstExpr::Rat(r)
    }
}

impl From<i64> for ConstExpr {
    fn from(i: i64) -> Self {
        ConstExpr::int(i)
    }
}

impl<'a> Add<&'a ConstExpr> for &'a ConstExpr {
    type Output = ConstExpr;
    fn add(self, other: &ConstExpr) -> ConstExpr {
        match (self, other) {
            (ConstExpr::Rat(a), ConstExpr::Rat(b)) => ConstExpr::Rat(a + b),
            _ if self.is_zero() => other.clone(),
            _ if other.is_zero() => self.clone(),
            _ => {
                let (an, ad) = self.parts();
                let (bn, bd) = other.parts();
                if ad == bd {
                    ConstExpr::from_parts(an.add(&bn), ad)
                } else {
                    ConstExpr::from_parts(an.mul(&bd).add(&bn.mul(&ad)), ad.mul(&bd))
                }
            }
        }
    }
}

impl<'a> Sub<&'a ConstExpr> for &'a ConstExpr {
    type Output = ConstExpr;
    fn sub(self, other: &ConstExpr) -> ConstExpr {
        self + &(-other)
    }
}

impl<'a> Mul<&'a ConstExpr> for &'a ConstExpr {
    type Output = ConstExpr;
    fn mul(self, other: &ConstExpr) -> ConstExpr {
        match (self, other) {
            (ConstExpr::Rat(a), ConstExpr::Rat(b)) => ConstExpr::Rat(a * b),
            _ if self.is_zero() || other.is_zero() => ConstExpr::zero(),
            _ if self.is_one() => other.clone(),
            _ if other.is_one() => self.clone(),
            _ => {
                let (an, ad) = self.parts();
                let (bn, bd) = other.parts();
                ConstExpr::from_parts(an.mul(&bn), ad.mul(&bd))
            }
        }
    }
}

impl<'a> Div<&'a ConstExpr> for &'a ConstExpr {
    type Output = ConstExpr;
    fn div(self, other: &ConstExpr) -> ConstExpr {
        self.checked_div(other).expect("division by zero constant")
    }
}

impl Neg for &ConstExpr {
    type Output = ConstExpr;
    fn neg(self) -> ConstExpr {
        match self {
            ConstExpr::Rat(r) => ConstExpr::Rat(-r),
            ConstExpr::Sym(f) => ConstExpr::Sym(Box::new(RatFunc {
                num: f.num.neg(),
                den: f.den.clone(),
            })),
        }
    }
}

impl Neg for ConstExpr {
    type Output = ConstExpr;
    fn neg(self) -> ConstExpr {
        -&self
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<ConstExpr> for ConstExpr {
            type Output = ConstExpr;
            fn $m(self, o: ConstExpr) -> ConstExpr { (&self).$m(&o) }
        }
        impl<'a> $tr<&'a ConstExpr> for ConstExpr {
            type Output = ConstExpr;
            fn $m(self, o: &ConstExpr) -> ConstExpr { (&self).$m(o) }
        }
        impl<'a> $tr<ConstExpr> for &'a ConstExpr {
            type Output = ConstExpr;
            fn $m(self, o: ConstExpr) -> ConstExpr { self.$m(&o) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul, Div div);

fn fmt_factor(p: &SymPoly, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if p.terms().count() > 1 {
        write!(f, "({p})")
    } else {
        write!(f, "{p}")
    }
}

impl fmt::Display for ConstExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstExpr::Rat(r) => write!(f, "{r}"),
            ConstExpr::Sym(rf) if rf.den.is_constant() => write!(f, "{}", rf.num),
            ConstExpr::Sym(rf) => {
                fmt_factor(&rf.num, f)?;
                write!(f, "/")?;
                fmt_factor(&rf.den, f)
            }
        }
    }
}

impl Serialize for ConstExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Renders a rational as a decimal string with `digits` fractional digits (rounded).
pub fn rational_to_decimal(r: &Rational, digits: usize) -> String {
    use num_bigint::BigInt;
    let neg = r.is_negative();
    let a = r.abs();
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (a * Rational::from_integer(scale.clone()) + Rational::new(1.into(), 2.into())).floor();
    let n = scaled.to_integer();
    let int_part = &n / &scale;
    let frac = &n % &scale;
    let mut out = String::new();
    if neg && !n.is_zero() {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    if digits > 0 {
        let fs = frac.to_string();
        out.push('.');
        out.push_str(&"0".repeat(digits - fs.len()));
        out.push_str(&fs);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancels_common_factors() {
        let p = ConstExpr::symbol("p");
        let one = ConstExpr::one();
        let a = &(&p * &p) - &one;
        let b = &p - &one;
        assert_eq!(&a / &b, &p + &one);
    }

    #[test]
    fn rational_functions_collapse_to_rationals() {
        let p = ConstExpr::symbol("p");
        let q = ConstExpr::symbol("q");
        let x = &(&p + &q) / &(&q + &p);
        assert_eq!(x, ConstExpr::one());
        assert!(x.is_rational());
    }

    #[test]
    fn denominator_is_monic() {
        let p = ConstExpr::symbol("p");
        let x = &ConstExpr::one() / &(&p * &ConstExpr::int(-2));
        let ConstExpr::Sym(f) = &x else { panic!() };
        assert_eq!(f.denom().leading_coefficient(), Rational::one());
        assert_eq!(x.to_string(), "-1/2/p");
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(rational_to_decimal(&Rational::new((-1).into(), 3.into()), 4), "-0.3333");
        assert_eq!(rational_to_decimal(&Rational::new(2.into(), 3.into()), 2), "0.67");
    }

    #[test]
    fn substitution() {
        let p = ConstExpr::symbol("p");
        let e = &(&p * &p) / &(&p + &ConstExpr::one());
        let mut b = BTreeMap::new();
        b.insert(Name::from("p"), Rational::new(1.into(), 2.into()));
        assert_eq!(e.eval(&b), Some(Rational::new(1.into(), 6.into())));
    }
}
