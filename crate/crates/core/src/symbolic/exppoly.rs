//! Exponential polynomials `sum_i q_i(n) * u_i^n` plus finitely many point corrections.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::constexpr::ConstExpr;
use super::surd::Surd;
use super::{Name, Rational, SymbolicError};

/// One summand `q(n) * base^n`; `coeffs[i]` multiplies `n^i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExpTerm {
    pub coeffs: Vec<Surd>,
    pub base: Surd,
}

/// Closed form of a sequence. Terms have pairwise distinct nonzero bases and
/// `corrections[n]` is added to the value at index `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ExpPoly {
    terms: Vec<ExpTerm>,
    corrections: BTreeMap<u64, Surd>,
}

fn binom(n: usize, k: usize) -> i64 {
    let mut r: i64 = 1;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

fn poly_eval(coeffs: &[Surd], n: u64) -> Surd {
    let nn = Surd::int(n as i64);
    let mut acc = Surd::zero();
    for c in coeffs.iter().rev() {
        acc = &(&acc * &nn) + c;
    }
    acc
}

fn poly_trim(mut v: Vec<Surd>) -> Vec<Surd> {
    while v.last().is_some_and(Surd::is_zero) {
        v.pop();
    }
    v
}

fn check(a: &Surd, b: &Surd) -> Result<(), SymbolicError> {
    if a.compatible(b) {
        Ok(())
    } else {
        Err(SymbolicError::MixedSurds(a.d(), b.d()))
    }
}

fn poly_add(a: &[Surd], b: &[Surd]) -> Result<Vec<Surd>, SymbolicError> {
    let len = a.len().max(b.len());
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let x = a.get(i).cloned().unwrap_or_else(Surd::zero);
        let y = b.get(i).cloned().unwrap_or_else(Surd::zero);
        check(&x, &y)?;
        out.push(&x + &y);
    }
    Ok(poly_trim(out))
}

fn poly_mul(a: &[Surd], b: &[Surd]) -> Result<Vec<Surd>, SymbolicError> {
    if a.is_empty() || b.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = vec![Surd::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            check(x, y)?;
            let p = x * y;
            check(&out[i + j], &p)?;
            out[i + j] = &out[i + j] + &p;
        }
    }
    Ok(poly_trim(out))
}

/// Coefficients of `q(n + k)`.
fn poly_shift(a: &[Surd], k: u64) -> Vec<Surd> {
    let mut out = vec![Surd::zero(); a.len()];
    let kk = Surd::int(k as i64);
    for (i, c) in a.iter().enumerate() {
        // c * (n + k)^i = c * sum_j C(i, j) k^(i-j) n^j
        for (j, slot) in out.iter_mut().enumerate().take(i + 1) {
            let f = &Surd::int(binom(i, j)) * &kk.pow((i - j) as u32);
            *slot = &*slot + &(c * &f);
        }
    }
    poly_trim(out)
}

impl ExpPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Surd) -> Self {
        Self::from_parts(vec![ExpTerm { coeffs: vec![c], base: Surd::one() }], BTreeMap::new())
            .expect("single term is always consistent")
    }

    /// Builds and canonicalizes; fails when coefficients live in different quadratic fields.
    pub fn from_parts(
        terms: Vec<ExpTerm>,
        corrections: BTreeMap<u64, Surd>,
    ) -> Result<Self, SymbolicError> {
        let mut merged: BTreeMap<Surd, Vec<Surd>> = BTreeMap::new();
        let mut corr: BTreeMap<u64, Surd> = BTreeMap::new();
        let mut field = Surd::one();
        let mut note = |s: &Surd| -> Result<(), SymbolicError> {
            check(&field, s)?;
            if s.d() != 1 {
                field = s.clone();
            }
            Ok(())
        };
        for t in terms {
            note(&t.base)?;
            for c in &t.coeffs {
                note(c)?;
            }
            if t.base.is_zero() {
                // 0^n contributes q(0) at n = 0 only.
                if let Some(c0) = t.coeffs.first() {
                    let e = corr.entry(0).or_insert_with(Surd::zero);
                    *e = &*e + c0;
                }
                continue;
            }
            let slot = merged.entry(t.base).or_default();
            *slot = poly_add(slot, &t.coeffs)?;
        }
        for (n, v) in corrections {
            note(&v)?;
            let e = corr.entry(n).or_insert_with(Surd::zero);
            *e = &*e + &v;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| !c.is_empty())
            .map(|(base, coeffs)| ExpTerm { coeffs, base })
            .collect();
        corr.retain(|_, v| !v.is_zero());
        Ok(ExpPoly { terms, corrections: corr })
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn corrections(&self) -> &BTreeMap<u64, Surd> {
        &self.corrections
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.corrections.is_empty()
    }

    /// Square-free radicand shared by all coefficients (1 if rational-only).
    pub fn field_d(&self) -> u64 {
        self.terms
            .iter()
            .flat_map(|t| t.coeffs.iter().chain(std::iter::once(&t.base)))
            .chain(self.corrections.values())
            .map(Surd::d)
            .find(|d| *d != 1)
            .unwrap_or(1)
    }

    /// Value without the point corrections.
    pub fn eval_main(&self, n: u64) -> Surd {
        let mut acc = Surd::zero();
        for t in &self.terms {
            acc = &acc + &(&poly_eval(&t.coeffs, n) * &t.base.pow(n as u32));
        }
        acc
    }

    pub fn eval(&self, n: u64) -> Surd {
        let main = self.eval_main(n);
        match self.corrections.get(&n) {
            Some(c) => &main + c,
            None => main,
        }
    }

    pub fn add(&self, other: &ExpPoly) -> Result<ExpPoly, SymbolicError> {
        let terms = self.terms.iter().chain(other.terms.iter()).cloned().collect();
        let mut corr = self.corrections.clone();
        for (n, v) in &other.corrections {
            let e = corr.entry(*n).or_insert_with(Surd::zero);
            check(e, v)?;
            *e = &*e + v;
        }
        ExpPoly::from_parts(terms, corr)
    }

    pub fn neg(&self) -> ExpPoly {
        ExpPoly {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm { coeffs: t.coeffs.iter().map(|c| -c).collect(), base: t.base.clone() })
                .collect(),
            corrections: self.corrections.iter().map(|(n, v)| (*n, -v)).collect(),
        }
    }

    pub fn sub(&self, other: &ExpPoly) -> Result<ExpPoly, SymbolicError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &Surd) -> Result<ExpPoly, SymbolicError> {
        let mut terms = Vec::new();
        for t in &self.terms {
            let mut coeffs = Vec::new();
            for c in &t.coeffs {
                check(c, k)?;
                coeffs.push(c * k);
            }
            terms.push(ExpTerm { coeffs, base: t.base.clone() });
        }
        let mut corr = BTreeMap::new();
        for (n, v) in &self.corrections {
            check(v, k)?;
            corr.insert(*n, v * k);
        }
        ExpPoly::from_parts(terms, corr)
    }

    pub fn mul(&self, other: &ExpPoly) -> Result<ExpPoly, SymbolicError> {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                check(&a.base, &b.base)?;
                terms.push(ExpTerm { coeffs: poly_mul(&a.coeffs, &b.coeffs)?, base: &a.base * &b.base });
            }
        }
        let main = ExpPoly::from_parts(terms, BTreeMap::new())?;
        // Corrections: recompute exact values at every corrected index.
        let mut idx: Vec<u64> = self.corrections.keys().chain(other.corrections.keys()).copied().collect();
        idx.sort_unstable();
        idx.dedup();
        let mut corr = BTreeMap::new();
        for n in idx {
            let x = self.eval(n);
            let y = other.eval(n);
            check(&x, &y)?;
            let full = &x * &y;
            let m = main.eval_main(n);
            check(&full, &m)?;
            corr.insert(n, &full - &m);
        }
        ExpPoly::from_parts(main.terms, corr)
    }

    /// Sequence `n -> self(n + k)`.
    pub fn shift(&self, k: u64) -> ExpPoly {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let f = t.base.pow(k as u32);
                ExpTerm {
                    coeffs: poly_shift(&t.coeffs, k).iter().map(|c| c * &f).collect(),
                    base: t.base.clone(),
                }
            })
            .collect();
        let corrections = self
            .corrections
            .iter()
            .filter(|(n, _)| **n >= k)
            .map(|(n, v)| (n - k, v.clone()))
            .collect();
        ExpPoly::from_parts(terms, corrections).expect("shift stays in one field")
    }

    pub fn map_surds(&self, f: impl Fn(&Surd) -> Surd) -> Result<ExpPoly, SymbolicError> {
        let terms = self
            .terms
            .iter()
            .map(|t| ExpTerm { coeffs: t.coeffs.iter().map(&f).collect(), base: f(&t.base) })
            .collect();
        let corr = self.corrections.iter().map(|(n, v)| (*n, f(v))).collect();
        ExpPoly::from_parts(terms, corr)
    }

    pub fn bind(&self, bindings: &BTreeMap<Name, Rational>) -> Result<ExpPoly, SymbolicError> {
        self.map_surds(|s| s.bind(bindings))
    }

    /// Symbolic constants appearing anywhere.
    pub fn symbols(&self) -> std::collections::BTreeSet<Name> {
        let mut out = std::collections::BTreeSet::new();
        let mut add = |s: &Surd| {
            out.extend(s.a().symbols());
            out.extend(s.b().symbols());
        };
        for t in &self.terms {
            add(&t.base);
            t.coeffs.iter().for_each(&mut add);
        }
        self.corrections.values().for_each(add);
        out
    }

    /// The largest index carrying a correction, if any.
    pub fn last_correction(&self) -> Option<u64> {
        self.corrections.keys().next_back().copied()
    }

    /// Terms ordered for display: larger magnitude bases first, base 1 leading.
    fn display_order(&self) -> Vec<&ExpTerm> {
        let mut v: Vec<&ExpTerm> = self.terms.iter().collect();
        v.sort_by(|a, b| {
            let key = |t: &ExpTerm| (t.base.is_one_value(), t.base.to_f64().map(f64::abs));
            let (ao, am) = key(a);
            let (bo, bm) = key(b);
            bo.cmp(&ao)
                .then_with(|| match (am, bm) {
                    (Some(x), Some(y)) => y.partial_cmp(&x).unwrap_or(Ordering::Equal),
                    _ => Ordering::Equal,
                })
                .then_with(|| b.base.sign().cmp(&a.base.sign()))
                .then_with(|| a.base.cmp(&b.base))
        });
        v
    }
}

fn is_compound(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    body.contains(" + ") || body.contains(" - ")
}

fn factor(s: &str) -> String {
    if is_compound(s) {
        format!("({s})")
    } else {
        s.to_string()
    }
}

/// Renders `r^n` for a rational r, using `k^(-n)` for unit fractions.
fn rational_power(r: &Rational, var: &str) -> String {
    use num_traits::{One, Signed};
    if r.is_integer() && r.is_positive() {
        return format!("{r}^{var}");
    }
    if r.is_positive() && r.numer().is_one() {
        return format!("{}^(-{var})", r.denom());
    }
    format!("({r})^{var}")
}

fn base_power(base: &Surd) -> String {
    if let Some(r) = base.as_rational() {
        return rational_power(r, "n");
    }
    if let Some(c) = base.as_const() {
        let s = c.to_string();
        return if s.chars().all(|ch| ch.is_alphanumeric() || ch == '_') {
            format!("{s}^n")
        } else {
            format!("({s})^n")
        };
    }
    if base.a().is_zero() {
        let radical = format!("{}^(n/2)", base.d());
        return match base.b().as_rational() {
            Some(b) if num_traits::One::is_one(b) => radical,
            Some(b) => format!("{}*{radical}", rational_power(b, "n")),
            None => format!("({})^n*{radical}", base.b()),
        };
    }
    format!("({base})^n")
}

fn coeff_poly(coeffs: &[Surd]) -> String {
    let mut pieces = Vec::new();
    for (i, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let cs = c.to_string();
        let nn = match i {
            0 => String::new(),
            1 => "n".to_string(),
            _ => format!("n^{i}"),
        };
        pieces.push(if nn.is_empty() {
            cs
        } else if cs == "1" {
            nn
        } else if cs == "-1" {
            format!("-{nn}")
        } else {
            format!("{}*{nn}", factor(&cs))
        });
    }
    join_sum(&pieces)
}

fn join_sum(pieces: &[String]) -> String {
    if pieces.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, p) in pieces.iter().enumerate() {
        if i == 0 {
            out.push_str(p);
        } else if let Some(rest) = p.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(p);
        }
    }
    out
}

impl fmt::Display for ExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut pieces = Vec::new();
        for t in self.display_order() {
            let poly = coeff_poly(&t.coeffs);
            if t.base.is_one_value() {
                pieces.push(poly);
                continue;
            }
            let b = base_power(&t.base);
            pieces.push(match poly.as_str() {
                "1" => b,
                "-1" => format!("-{b}"),
                _ => format!("{}*{b}", factor(&poly)),
            });
        }
        write!(f, "{}", join_sum(&pieces))?;
        if !self.corrections.is_empty() {
            let vals: Vec<String> = self
                .corrections
                .keys()
                .map(|n| format!("n={n}: {}", self.eval(*n)))
                .collect();
            write!(f, "  [except {}]", vals.join(", "))?;
        }
        Ok(())
    }
}

impl Serialize for ExpTerm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ExpTerm", 2)?;
        st.serialize_field("base", &self.base)?;
        st.serialize_field("coeffs", &self.coeffs)?;
        st.end()
    }
}

impl Serialize for ExpPoly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ExpPoly", 3)?;
        st.serialize_field("text", &self.to_string())?;
        st.serialize_field("terms", &self.terms)?;
        let corr: BTreeMap<String, String> = self
            .corrections
            .keys()
            .map(|n| (n.to_string(), self.eval(*n).to_string()))
            .collect();
        st.serialize_field("values_at", &corr)?;
        st.end()
    }
}

/// Convenience: a rational constant as a one-term ExpPoly.
pub fn rational_const(r: Rational) -> ExpPoly {
    if r.is_zero() {
        return ExpPoly::zero();
    }
    ExpPoly::constant(Surd::rational(r))
}

/// Convenience: `c * base^n`.
pub fn geometric(c: ConstExpr, base: ConstExpr) -> ExpPoly {
    ExpPoly::from_parts(
        vec![ExpTerm { coeffs: vec![Surd::from_const(c)], base: Surd::from_const(base) }],
        BTreeMap::new(),
    )
    .expect("rational coefficients share a field")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Surd {
        Surd::rational(Rational::new(n.into(), d.into()))
    }

    #[test]
    fn toggle_closed_form() {
        // 1/2 - 1/2 * (-1)^n
        let e = ExpPoly::from_parts(
            vec![
                ExpTerm { coeffs: vec![r(1, 2)], base: r(1, 1) },
                ExpTerm { coeffs: vec![r(-1, 2)], base: r(-1, 1) },
            ],
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(e.eval(0), r(0, 1));
        assert_eq!(e.eval(3), r(1, 1));
        assert_eq!(e.to_string(), "1/2 - 1/2*(-1)^n");
    }

    #[test]
    fn shift_matches_pointwise() {
        let e = ExpPoly::from_parts(
            vec![ExpTerm { coeffs: vec![r(1, 1), r(2, 1), r(3, 1)], base: r(1, 2) }],
            [(1u64, r(5, 1))].into_iter().collect(),
        )
        .unwrap();
        let s = e.shift(1);
        for n in 0..6 {
            assert_eq!(s.eval(n), e.eval(n + 1));
        }
    }

    #[test]
    fn zero_base_becomes_correction() {
        let e = ExpPoly::from_parts(
            vec![ExpTerm { coeffs: vec![r(2, 1), r(7, 1)], base: r(0, 1) }],
            BTreeMap::new(),
        )
        .unwrap();
        assert!(e.terms().is_empty());
        assert_eq!(e.eval(0), r(2, 1));
        assert_eq!(e.eval(1), r(0, 1));
    }

    #[test]
    fn products_agree_pointwise() {
        let a = geometric(ConstExpr::int(3), ConstExpr::ratio(1, 4));
        let b = a.add(&rational_const(Rational::from_integer(1.into()))).unwrap();
        let p = b.mul(&b).unwrap();
        for n in 0..5 {
            assert_eq!(p.eval(n), &b.eval(n) * &b.eval(n));
        }
        assert_eq!(a.to_string(), "3*4^(-n)");
    }
}
