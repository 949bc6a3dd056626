//! Polynomials in program variables with constant coefficients.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use super::constexpr::ConstExpr;
use super::Name;

/// Power product of program variables, sorted by name, all exponents positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial(Vec<(Name, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(name: impl Into<Name>) -> Self {
        Monomial(vec![(name.into(), 1)])
    }

    pub fn var_pow(name: impl Into<Name>, e: u32) -> Self {
        if e == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(name.into(), e)])
        }
    }

    pub fn from_powers(iter: impl IntoIterator<Item = (Name, u32)>) -> Self {
        let mut map: BTreeMap<Name, u32> = BTreeMap::new();
        for (n, e) in iter {
            *map.entry(n).or_default() += e;
        }
        Monomial(map.into_iter().filter(|(_, e)| *e > 0).collect())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn powers(&self) -> &[(Name, u32)] {
        &self.0
    }

    pub fn degree_in(&self, v: &str) -> u32 {
        self.0.iter().find(|(n, _)| &**n == v).map_or(0, |(_, e)| *e)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn vars(&self) -> impl Iterator<Item = &Name> {
        self.0.iter().map(|(n, _)| n)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::from_powers(self.0.iter().chain(other.0.iter()).cloned())
    }

    pub fn without(&self, v: &str) -> Monomial {
        Monomial(self.0.iter().filter(|(n, _)| &**n != v).cloned().collect())
    }

    pub fn with_power(&self, v: &Name, e: u32) -> Monomial {
        let mut m = self.without(v);
        if e > 0 {
            m = m.mul(&Monomial::var_pow(v.clone(), e));
        }
        m
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, (n, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{n}")?;
            } else {
                write!(f, "{n}^{e}")?;
            }
        }
        Ok(())
    }
}

impl Serialize for Monomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (n, e) in &self.0 {
            m.serialize_entry(&**n, e)?;
        }
        m.end()
    }
}

/// Sparse polynomial over program variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct VarPolynomial {
    terms: BTreeMap<Monomial, ConstExpr>,
}

impl VarPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(ConstExpr::one())
    }

    pub fn constant(c: ConstExpr) -> Self {
        Self::term(Monomial::one(), c)
    }

    pub fn var(name: impl Into<Name>) -> Self {
        Self::term(Monomial::var(name), ConstExpr::one())
    }

    pub fn term(m: Monomial, c: ConstExpr) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &ConstExpr)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> BTreeMap<Monomial, ConstExpr> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> ConstExpr {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    pub fn as_constant(&self) -> Option<ConstExpr> {
        match self.terms.len() {
            0 => Some(ConstExpr::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn add_term(&mut self, m: Monomial, c: ConstExpr) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &VarPolynomial) -> VarPolynomial {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &VarPolynomial) -> VarPolynomial {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }

    pub fn neg(&self) -> VarPolynomial {
        VarPolynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, k: &ConstExpr) -> VarPolynomial {
        if k.is_zero() {
            return Self::zero();
        }
        VarPolynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn mul(&self, other: &VarPolynomial) -> VarPolynomial {
        let mut out = Self::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> VarPolynomial {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        self.terms.keys().flat_map(|m| m.vars().cloned()).collect()
    }

    pub fn degree_in(&self, v: &str) -> u32 {
        self.terms.keys().map(|m| m.degree_in(v)).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::total_degree).max().unwrap_or(0)
    }

    /// Replaces every occurrence of `v` with `replacement`.
    pub fn substitute(&self, v: &str, replacement: &VarPolynomial) -> VarPolynomial {
        let deg = self.degree_in(v);
        if deg == 0 {
            return self.clone();
        }
        let mut powers = vec![VarPolynomial::one()];
        for i in 1..=deg as usize {
            let next = powers[i - 1].mul(replacement);
            powers.push(next);
        }
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.degree_in(v) as usize;
            if e == 0 {
                out.add_term(m.clone(), c.clone());
                continue;
            }
            let rest = m.without(v);
            for (m2, c2) in &powers[e].terms {
                out.add_term(rest.mul(m2), c * c2);
            }
        }
        out
    }

    /// Applies `f` to each coefficient, dropping zeros.
    pub fn map_coeffs(&self, f: impl Fn(&ConstExpr) -> ConstExpr) -> VarPolynomial {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    /// Evaluates with constant values for every variable.
    pub fn eval(&self, values: &BTreeMap<Name, ConstExpr>) -> Option<ConstExpr> {
        let mut acc = ConstExpr::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (n, e) in m.powers() {
                t = &t * &values.get(n)?.pow(*e as i64);
            }
            acc = &acc + &t;
        }
        Some(acc)
    }
}

impl fmt::Display for VarPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let cs = c.to_string();
            let compound = cs.contains(' ');
            let (neg, body) = match cs.strip_prefix('-') {
                Some(rest) if !compound => (true, rest.to_string()),
                _ => (false, cs.clone()),
            };
            if i > 0 {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            } else if neg {
                write!(f, "-")?;
            }
            let body = if compound { format!("({body})") } else { body };
            if m.is_one() {
                write!(f, "{body}")?;
            } else if body == "1" {
                write!(f, "{m}")?;
            } else {
                write!(f, "{body}*{m}")?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct TermJson<'a> {
    monomial: &'a Monomial,
    coeff: &'a ConstExpr,
}

impl Serialize for VarPolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let terms: Vec<_> = self
            .terms
            .iter()
            .map(|(m, c)| TermJson { monomial: m, coeff: c })
            .collect();
        terms.serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_expands() {
        let x = VarPolynomial::var("x");
        let y = VarPolynomial::var("y");
        let p = x.pow(2).add(&y);
        let r = x.add(&VarPolynomial::one());
        let q = p.substitute("x", &r);
        assert_eq!(q, x.pow(2).add(&x.scale(&ConstExpr::int(2))).add(&VarPolynomial::one()).add(&y));
    }

    #[test]
    fn display() {
        let x = VarPolynomial::var("x");
        let p = x.pow(2).scale(&ConstExpr::ratio(-1, 2)).add(&VarPolynomial::one());
        assert_eq!(p.to_string(), "-1/2*x^2 + 1");
    }
}
