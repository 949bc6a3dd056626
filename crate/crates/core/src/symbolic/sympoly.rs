//! Sparse multivariate polynomials over Q in the symbolic constants.
//!
//! Monomials are compared lexicographically with the alphabetically
//! smallest symbol most significant, so the last key of the term map is the
//! leading term.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use super::{Name, Rational};

/// Power product of symbolic constants, kept sorted by name with positive powers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct SymMonomial(Vec<(Name, u32)>);

impl SymMonomial {
    pub fn one() -> Self {
        SymMonomial(Vec::new())
    }

    pub fn var(name: Name) -> Self {
        SymMonomial(vec![(name, 1)])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(Name, u32)] {
        &self.0
    }

    pub fn degree_in(&self, sym: &str) -> u32 {
        self.0
            .iter()
            .find(|(n, _)| &**n == sym)
            .map_or(0, |(_, e)| *e)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn mul(&self, other: &SymMonomial) -> SymMonomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        SymMonomial(out)
    }

    /// `self / other` if every exponent of `other` is dominated.
    pub fn div(&self, other: &SymMonomial) -> Option<SymMonomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (name, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 < *name {
                return None;
            }
            if j < other.0.len() && other.0[j].0 == *name {
                let f = other.0[j].1;
                j += 1;
                match e.cmp(&f) {
                    Ordering::Less => return None,
                    Ordering::Equal => {}
                    Ordering::Greater => out.push((name.clone(), e - f)),
                }
            } else {
                out.push((name.clone(), *e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(SymMonomial(out))
    }

    fn without(&self, sym: &str) -> SymMonomial {
        SymMonomial(self.0.iter().filter(|(n, _)| &**n != sym).cloned().collect())
    }

    fn with_power(&self, sym: &Name, e: u32) -> SymMonomial {
        if e == 0 {
            return self.clone();
        }
        self.mul(&SymMonomial(vec![(sym.clone(), e)]))
    }
}

impl Ord for SymMonomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), other.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((a, ea)), Some((b, eb))) => match a.cmp(b) {
                    // `a` is absent from `other`, so `self` has the larger exponent there.
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        if ea != eb {
                            return ea.cmp(eb);
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for SymMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SymMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
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

/// Polynomial in the symbolic constants with rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SymPoly {
    terms: BTreeMap<SymMonomial, Rational>,
}

impl SymPoly {
    pub fn zero() -> Self {
        SymPoly::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(SymMonomial::one(), c);
        }
        SymPoly { terms }
    }

    pub fn symbol(name: Name) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(SymMonomial::var(name), Rational::one());
        SymPoly { terms }
    }

    pub fn from_term(m: SymMonomial, c: Rational) -> Self {
        let mut p = SymPoly::zero();
        p.add_term(m, c);
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&SymMonomial, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value if the polynomial has no symbols.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn leading_term(&self) -> Option<(&SymMonomial, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coefficient(&self) -> Rational {
        self.leading_term()
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn symbols(&self) -> BTreeSet<Name> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(n, _)| n.clone()))
            .collect()
    }

    pub fn degree_in(&self, sym: &str) -> u32 {
        self.terms.keys().map(|m| m.degree_in(sym)).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(SymMonomial::total_degree)
            .max()
            .unwrap_or(0)
    }

    fn add_term(&mut self, m: SymMonomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &SymPoly) -> SymPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &SymPoly) -> SymPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }

    pub fn neg(&self) -> SymPoly {
        SymPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, k: &Rational) -> SymPoly {
        if k.is_zero() {
            return SymPoly::zero();
        }
        SymPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn mul(&self, other: &SymPoly) -> SymPoly {
        if let Some(k) = other.as_constant() {
            return self.scale(&k);
        }
        if let Some(k) = self.as_constant() {
            return other.scale(&k);
        }
        let mut out = SymPoly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> SymPoly {
        let mut acc = SymPoly::one();
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

    /// Divides by the leading coefficient so the leading term is monic.
    pub fn monic(&self) -> SymPoly {
        match self.leading_term() {
            None => SymPoly::zero(),
            Some((_, c)) if c.is_one() => self.clone(),
            Some((_, c)) => {
                let inv = c.recip();
                self.scale(&inv)
            }
        }
    }

    /// Exact quotient `self / divisor`, or `None` if the division leaves a remainder.
    pub fn div_exact(&self, divisor: &SymPoly) -> Option<SymPoly> {
        let (lm, lc) = divisor.leading_term()?;
        if let Some(k) = divisor.as_constant() {
            return Some(self.scale(&k.recip()));
        }
        let (lm, lc) = (lm.clone(), lc.clone());
        let mut rem = self.clone();
        let mut quot = SymPoly::zero();
        while let Some((m, c)) = rem.leading_term() {
            let qm = m.div(&lm)?;
            let qc = c / &lc;
            let step = SymPoly::from_term(qm, qc);
            rem = rem.sub(&divisor.mul(&step));
            quot = quot.add(&step);
        }
        Some(quot)
    }

    /// Coefficients of `self` as a polynomial in `sym` (index = power).
    pub fn to_univariate(&self, sym: &Name) -> Vec<SymPoly> {
        let deg = self.degree_in(sym) as usize;
        let mut out = vec![SymPoly::zero(); deg + 1];
        for (m, c) in &self.terms {
            let e = m.degree_in(sym) as usize;
            out[e].add_term(m.without(sym), c.clone());
        }
        out
    }

    pub fn from_univariate(coeffs: &[SymPoly], sym: &Name) -> SymPoly {
        let mut out = SymPoly::zero();
        for (e, c) in coeffs.iter().enumerate() {
            for (m, k) in &c.terms {
                out.add_term(m.with_power(sym, e as u32), k.clone());
            }
        }
        out
    }

    fn min_symbol(&self) -> Option<Name> {
        self.terms
            .keys()
            .filter_map(|m| m.0.first().map(|(n, _)| n.clone()))
            .min()
    }

    /// Replaces symbols by polynomials; symbols not in the map are kept.
    pub fn substitute(&self, map: &BTreeMap<Name, SymPoly>) -> SymPoly {
        let mut out = SymPoly::zero();
        for (m, c) in &self.terms {
            let mut term = SymPoly::constant(c.clone());
            let mut rest = Vec::new();
            for (n, e) in &m.0 {
                match map.get(n) {
                    Some(p) => term = term.mul(&p.pow(*e)),
                    None => rest.push((n.clone(), *e)),
                }
            }
            if !rest.is_empty() {
                term = term.mul(&SymPoly::from_term(SymMonomial(rest), Rational::one()));
            }
            out = out.add(&term);
        }
        out
    }

    /// Exact square root if `self` is the square of a polynomial with rational coefficients.
    pub fn sqrt(&self) -> Option<SymPoly> {
        if self.is_zero() {
            return Some(SymPoly::zero());
        }
        let (lm, lc) = self.leading_term()?;
        let root_m = SymMonomial(
            lm.0.iter()
                .map(|(n, e)| (e % 2 == 0).then(|| (n.clone(), e / 2)))
                .collect::<Option<Vec<_>>>()?,
        );
        let root_c = rational_sqrt(lc)?;
        let mut root = SymPoly::from_term(root_m.clone(), root_c.clone());
        let two_lead = SymPoly::from_term(root_m, root_c * Rational::from_integer(2.into()));
        // Newton-style term-by-term extraction; degree bounds the number of steps.
        let bound = self.terms.len() * 4 + 8;
        for _ in 0..bound {
            let rem = self.sub(&root.mul(&root));
            let Some((m, c)) = rem.leading_term() else {
                return Some(root);
            };
            let (tm, tc) = two_lead.leading_term().unwrap();
            let qm = m.div(tm)?;
            let next = SymPoly::from_term(qm, c / tc);
            if next.leading_term().map(|(m, _)| m) >= root.leading_term().map(|(m, _)| m) {
                return None;
            }
            root = root.add(&next);
        }
        (self.sub(&root.mul(&root))).is_zero().then_some(root)
    }

    pub fn eval(&self, bindings: &BTreeMap<Name, Rational>) -> Option<Rational> {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (n, e) in &m.0 {
                let v = bindings.get(n)?;
                t *= num_traits::pow(v.clone(), *e as usize);
            }
            acc += t;
        }
        Some(acc)
    }
}

/// Exact square root of a non-negative rational, if it is a perfect square.
pub fn rational_sqrt(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| Rational::new(n, d))
}

fn content(coeffs: &[SymPoly]) -> SymPoly {
    let mut g = SymPoly::zero();
    for c in coeffs.iter().filter(|c| !c.is_zero()) {
        g = gcd(&g, c);
        if g.is_constant() {
            return SymPoly::one();
        }
    }
    g
}

fn primitive(coeffs: Vec<SymPoly>, cont: &SymPoly) -> Vec<SymPoly> {
    if cont.is_constant() {
        return coeffs;
    }
    coeffs
        .into_iter()
        .map(|c| c.div_exact(cont).expect("content divides every coefficient"))
        .collect()
}

fn trim(v: &mut Vec<SymPoly>) {
    while v.len() > 1 && v.last().is_some_and(SymPoly::is_zero) {
        v.pop();
    }
}

fn pseudo_rem(p: &[SymPoly], q: &[SymPoly]) -> Vec<SymPoly> {
    let dq = q.len() - 1;
    let lc = &q[dq];
    let mut r = p.to_vec();
    trim(&mut r);
    while r.len() > dq && !(r.len() == 1 && r[0].is_zero()) {
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        let shift = dr - dq;
        for c in r.iter_mut() {
            *c = c.mul(lc);
        }
        for (i, qc) in q.iter().enumerate() {
            r[i + shift] = r[i + shift].sub(&lr.mul(qc));
        }
        debug_assert!(r[dr].is_zero());
        r.pop();
        trim(&mut r);
        if r.is_empty() {
            r.push(SymPoly::zero());
        }
    }
    // Keep rational coefficients small.
    let lead = r.iter().rev().find(|c| !c.is_zero()).map(SymPoly::leading_coefficient);
    if let Some(l) = lead {
        let inv = l.recip();
        for c in r.iter_mut() {
            *c = c.scale(&inv);
        }
    }
    r
}

/// Greatest common divisor, normalized to a monic leading term. `gcd(0, 0) = 0`.
pub fn gcd(a: &SymPoly, b: &SymPoly) -> SymPoly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return SymPoly::one();
    }
    if a == b {
        return a.monic();
    }
    let v = match (a.min_symbol(), b.min_symbol()) {
        (Some(x), Some(y)) => x.min(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => return SymPoly::one(),
    };
    let ua = a.to_univariate(&v);
    let ub = b.to_univariate(&v);
    if ua.len() == 1 {
        return gcd(a, &content(&ub));
    }
    if ub.len() == 1 {
        return gcd(&content(&ua), b);
    }
    let ca = content(&ua);
    let cb = content(&ub);
    let g = gcd(&ca, &cb);
    let mut p = primitive(ua, &ca);
    let mut q = primitive(ub, &cb);
    if p.len() < q.len() {
        std::mem::swap(&mut p, &mut q);
    }
    loop {
        let r = pseudo_rem(&p, &q);
        if r.iter().all(SymPoly::is_zero) {
            break;
        }
        if r.len() == 1 {
            q = vec![SymPoly::one()];
            break;
        }
        let cr = content(&r);
        p = q;
        q = primitive(r, &cr);
    }
    let prim = SymPoly::from_univariate(&q, &v);
    prim.mul(&g).monic()
}

impl fmt::Display for SymPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{abs}*{m}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(s: &str) -> SymPoly {
        SymPoly::symbol(Name::from(s))
    }

    fn int(i: i64) -> SymPoly {
        SymPoly::constant(Rational::from_integer(i.into()))
    }

    #[test]
    fn lex_order_puts_smallest_symbol_first() {
        let a = SymMonomial::var(Name::from("a"));
        let b2 = SymMonomial(vec![(Name::from("b"), 2)]);
        assert!(a > b2);
        assert!(b2 > SymMonomial::one());
    }

    #[test]
    fn gcd_of_products() {
        let p = sym("p");
        let q = sym("q");
        let f = p.add(&int(1)).mul(&q.sub(&p));
        let g = p.add(&int(1)).mul(&q.add(&int(2)));
        let d = gcd(&f, &g);
        assert_eq!(d, p.add(&int(1)));
    }

    #[test]
    fn gcd_univariate_with_multiplicity() {
        let x = sym("x");
        let a = x.sub(&int(1)).pow(3).mul(&x.add(&int(2)));
        let b = x.sub(&int(1)).pow(2).mul(&x.sub(&int(5)));
        assert_eq!(gcd(&a, &b), x.sub(&int(1)).pow(2));
    }

    #[test]
    fn exact_division_detects_remainder() {
        let x = sym("x");
        let y = sym("y");
        let a = x.mul(&y).add(&x);
        assert_eq!(a.div_exact(&x), Some(y.add(&int(1))));
        assert_eq!(a.div_exact(&y), None);
    }

    #[test]
    fn polynomial_sqrt() {
        let p = sym("p");
        let q = sym("q");
        let s = p.add(&q).sub(&int(3));
        assert_eq!(s.pow(2).sqrt().map(|r| r.pow(2)), Some(s.pow(2)));
        assert_eq!(p.sqrt(), None);
        assert!(p.pow(2).add(&int(1)).sqrt().is_none());
    }
}
