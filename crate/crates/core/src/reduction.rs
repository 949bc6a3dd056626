//! Power reduction for finite-valued variables and indicator polynomials for
//! conditions over them.

use std::collections::BTreeMap;
use std::sync::Mutex;

use crate::finiteness::{for_each_assignment, FiniteTypes};
use crate::normalizer::Cond;
use crate::symbolic::{ConstExpr, Monomial, Name, VarPolynomial};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReductionError {
    #[error("support values {0} and {1} are not provably distinct")]
    DegenerateSupport(String, String),
    #[error("condition reads `{0}`, which is not finite")]
    NonFiniteCondition(Name),
    #[error("cannot decide `{0}` over symbolic support values")]
    IncomparableSupport(String),
}

/// Elementary symmetric polynomials e_0..e_n of `vals`.
fn elementary_symmetric(vals: &[ConstExpr]) -> Vec<ConstExpr> {
    let mut e = vec![ConstExpr::one()];
    for v in vals {
        let mut next = e.clone();
        next.push(ConstExpr::zero());
        for k in 1..next.len() {
            next[k] = &next[k] + &(&e[k - 1] * v);
        }
        e = next;
    }
    e
}

fn check_distinct(a: &[ConstExpr]) -> Result<(), ReductionError> {
    for (i, x) in a.iter().enumerate() {
        for y in &a[i + 1..] {
            let d = x - y;
            if d.is_zero() || !d.is_rational() {
                return Err(ReductionError::DegenerateSupport(x.to_string(), y.to_string()));
            }
        }
    }
    Ok(())
}

/// The Vandermonde matrix `M[i][j] = a_j^i`.
pub fn vandermonde(a: &[ConstExpr]) -> Vec<Vec<ConstExpr>> {
    (0..a.len()).map(|i| a.iter().map(|x| x.pow(i as i64)).collect()).collect()
}

/// Inverse of the Vandermonde matrix from the closed formula
/// `N[i][j] = -(-1)^(j+1) e_{m-j-1}(A without a_i) / prod_{a != a_i} (a - a_i)`
/// (zero-based indices).
pub fn inverse_via_symmetric_polys(a: &[ConstExpr]) -> Result<Vec<Vec<ConstExpr>>, ReductionError> {
    check_distinct(a)?;
    let m = a.len();
    let mut out = Vec::with_capacity(m);
    for (i, ai) in a.iter().enumerate() {
        let others: Vec<ConstExpr> = a.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x.clone()).collect();
        let e = elementary_symmetric(&others);
        let denom = others.iter().fold(ConstExpr::one(), |acc, x| &acc * &(x - ai));
        let row = (0..m)
            .map(|j| {
                // One-based j' = j + 1: -(-1)^{j'} e_{m-j'}.
                let sign = if j % 2 == 0 { ConstExpr::one() } else { ConstExpr::int(-1) };
                &(&sign * &e[m - 1 - j]) / &denom
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

/// Precomputed reduction data for one support.
#[derive(Clone, Debug)]
pub struct ReductionTable {
    pub support: Vec<ConstExpr>,
    pub inverse: Vec<Vec<ConstExpr>>,
}

impl ReductionTable {
    pub fn new(support: Vec<ConstExpr>) -> Result<ReductionTable, ReductionError> {
        let inverse = inverse_via_symmetric_polys(&support)?;
        Ok(ReductionTable { support, inverse })
    }

    pub fn matrix(&self) -> Vec<Vec<ConstExpr>> {
        vandermonde(&self.support)
    }

    /// Coefficients `c_0..c_{m-1}` with `X^k = sum c_i X^i` on the support.
    pub fn reduce(&self, k: u32) -> Vec<ConstExpr> {
        let m = self.support.len();
        if (k as usize) < m {
            return (0..m).map(|i| if i == k as usize { ConstExpr::one() } else { ConstExpr::zero() }).collect();
        }
        let powers: Vec<ConstExpr> = self.support.iter().map(|a| a.pow(k as i64)).collect();
        (0..m)
            .map(|j| {
                powers
                    .iter()
                    .zip(&self.inverse)
                    .fold(ConstExpr::zero(), |acc, (p, row)| &acc + &(p * &row[j]))
            })
            .collect()
    }
}

pub fn reduce_power(support: &[ConstExpr], k: u32) -> Result<Vec<ConstExpr>, ReductionError> {
    Ok(ReductionTable::new(support.to_vec())?.reduce(k))
}

/// Rewrites polynomials so every finite variable appears below its support size.
#[derive(Debug)]
pub struct Reducer {
    tables: BTreeMap<Name, ReductionTable>,
    cache: Mutex<BTreeMap<(Name, u32), VarPolynomial>>,
}

impl Reducer {
    pub fn new(types: &FiniteTypes) -> Result<Reducer, ReductionError> {
        let mut tables = BTreeMap::new();
        for v in types.finite_vars() {
            let support: Vec<ConstExpr> = types.support(&v).unwrap().iter().cloned().collect();
            tables.insert(v, ReductionTable::new(support)?);
        }
        Ok(Reducer { tables, cache: Mutex::new(BTreeMap::new()) })
    }

    pub fn support_size(&self, v: &str) -> Option<usize> {
        self.tables.get(v).map(|t| t.support.len())
    }

    pub fn table(&self, v: &str) -> Option<&ReductionTable> {
        self.tables.get(v)
    }

    fn power(&self, v: &Name, e: u32) -> VarPolynomial {
        let key = (v.clone(), e);
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return p.clone();
        }
        let coeffs = self.tables[v].reduce(e);
        let mut p = VarPolynomial::zero();
        for (i, c) in coeffs.into_iter().enumerate() {
            p.add_term(Monomial::var_pow(v.clone(), i as u32), c);
        }
        self.cache.lock().unwrap().insert(key, p.clone());
        p
    }

    pub fn reduce_monomial(&self, m: &Monomial) -> VarPolynomial {
        let needs = m
            .powers()
            .iter()
            .any(|(v, e)| self.tables.get(v).is_some_and(|t| *e as usize >= t.support.len()));
        if !needs {
            return VarPolynomial::term(m.clone(), ConstExpr::one());
        }
        let mut rest = Vec::new();
        let mut acc = VarPolynomial::one();
        for (v, e) in m.powers() {
            match self.tables.get(v) {
                Some(t) if *e as usize >= t.support.len() => acc = acc.mul(&self.power(v, *e)),
                _ => rest.push((v.clone(), *e)),
            }
        }
        acc.mul(&VarPolynomial::term(Monomial::from_powers(rest), ConstExpr::one()))
    }

    pub fn reduce(&self, p: &VarPolynomial) -> VarPolynomial {
        let mut out = VarPolynomial::zero();
        for (m, c) in p.terms() {
            out = out.add(&self.reduce_monomial(m).scale(c));
        }
        out
    }

    /// Product followed by reduction.
    pub fn mul(&self, a: &VarPolynomial, b: &VarPolynomial) -> VarPolynomial {
        self.reduce(&a.mul(b))
    }

    /// Indicator polynomial of `c`: 1 where it holds, 0 elsewhere on the
    /// joint support of the finite variables it reads.
    pub fn indicator(&self, c: &Cond) -> Result<VarPolynomial, ReductionError> {
        match c {
            Cond::True => Ok(VarPolynomial::one()),
            Cond::False => Ok(VarPolynomial::zero()),
            Cond::Not(a) => Ok(VarPolynomial::one().sub(&self.indicator(a)?)),
            Cond::And(a, b) => Ok(self.mul(&self.indicator(a)?, &self.indicator(b)?)),
            Cond::Or(a, b) => {
                let na = VarPolynomial::one().sub(&self.indicator(a)?);
                let nb = VarPolynomial::one().sub(&self.indicator(b)?);
                Ok(VarPolynomial::one().sub(&self.mul(&na, &nb)))
            }
            Cond::Cmp(..) => self.comparison(c),
        }
    }

    /// `[x = v]` as the Lagrange basis polynomial over x's support.
    pub fn equals(&self, x: &Name, v: &ConstExpr) -> Result<VarPolynomial, ReductionError> {
        let t = self.tables.get(x).ok_or_else(|| ReductionError::NonFiniteCondition(x.clone()))?;
        let mut p = VarPolynomial::one();
        for d in &t.support {
            if d == v {
                continue;
            }
            let denom = (v - d).recip().expect("distinct support values");
            let factor = VarPolynomial::var(x.clone()).sub(&VarPolynomial::constant(d.clone())).scale(&denom);
            p = p.mul(&factor);
        }
        Ok(p)
    }

    /// A comparison is expanded into a sum over its satisfying joint values.
    fn comparison(&self, c: &Cond) -> Result<VarPolynomial, ReductionError> {
        let vars: Vec<Name> = c.vars().into_iter().collect();
        let mut sets = Vec::new();
        for v in &vars {
            let t = self.tables.get(v).ok_or_else(|| ReductionError::NonFiniteCondition(v.clone()))?;
            sets.push(t.support.clone());
        }
        let mut points = Vec::new();
        let mut undecided = false;
        for_each_assignment(&vars, &sets, &mut |env| match c.eval(env) {
            Some(true) => points.push(env.clone()),
            Some(false) => {}
            None => undecided = true,
        });
        if undecided {
            return Err(ReductionError::IncomparableSupport(c.to_string()));
        }
        let mut out = VarPolynomial::zero();
        for env in points {
            let mut term = VarPolynomial::one();
            for (x, v) in &env {
                term = term.mul(&self.equals(x, v)?);
            }
            out = out.add(&term);
        }
        Ok(self.reduce(&out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::finiteness::infer;
    use crate::linalg::{identity, mat_mul};
    use crate::normalizer::normalize;

    fn ints(v: &[i64]) -> Vec<ConstExpr> {
        v.iter().map(|&i| ConstExpr::int(i)).collect()
    }

    #[test]
    fn tenth_power_over_four_points() {
        let c = reduce_power(&ints(&[-2, 0, 1, 3]), 10).unwrap();
        assert_eq!(c, ints(&[0, -4038, 2105, 1934]));
    }

    #[test]
    fn closed_form_inverse_is_exact() {
        let inv = inverse_via_symmetric_polys(&ints(&[-2, 0, 1, 3])).unwrap();
        let q = ConstExpr::ratio;
        // e_1({0, 1, 3}) / ((0 + 2)(1 + 2)(3 + 2)) = 4/30.
        let expected = vec![
            vec![q(0, 1), q(-1, 10), q(2, 15), q(-1, 30)],
            vec![q(1, 1), q(-5, 6), q(-1, 3), q(1, 6)],
            vec![q(0, 1), q(1, 1), q(1, 6), q(-1, 6)],
            vec![q(0, 1), q(-1, 15), q(1, 30), q(1, 30)],
        ];
        assert_eq!(inv, expected);
        assert_eq!(mat_mul(&vandermonde(&ints(&[-2, 0, 1, 3])), &inv).unwrap(), identity(4));
    }

    #[test]
    fn binary_and_trivial_cases() {
        for k in 1..8 {
            assert_eq!(reduce_power(&ints(&[0, 1]), k).unwrap(), ints(&[0, 1]));
        }
        assert_eq!(reduce_power(&ints(&[5, 7, 9]), 1).unwrap(), ints(&[0, 1, 0]));
        assert_eq!(inverse_via_symmetric_polys(&ints(&[4])).unwrap(), vec![ints(&[1])]);
        assert_eq!(inverse_via_symmetric_polys(&ints(&[0, 1])).unwrap(), vec![ints(&[1, -1]), ints(&[0, 1])]);
        assert!(matches!(reduce_power(&ints(&[1, 1]), 3), Err(ReductionError::DegenerateSupport(..))));
    }

    #[test]
    fn indicators() {
        let p = normalize(&parse("t, c = 0, 0\nwhile true: t = 1 - t; c = DiscreteUniform(0, 3) end").unwrap()).unwrap();
        let r = Reducer::new(&infer(&p)).unwrap();
        let is_var = |_: &str| true;
        let cond = |s: &str| Cond::from_bool(&crate::dsl::parse_bool(s).unwrap(), &is_var).unwrap();
        assert_eq!(r.indicator(&cond("t == 0")).unwrap().to_string(), "-t + 1");
        assert_eq!(r.indicator(&cond("t != 0")).unwrap().to_string(), "t");
        let ge = r.indicator(&cond("c >= 2")).unwrap();
        for v in 0..4 {
            let env = [(Name::from("c"), ConstExpr::int(v))].into();
            assert_eq!(ge.eval(&env).unwrap(), ConstExpr::int(i64::from(v >= 2)));
        }
        assert!(matches!(r.indicator(&cond("z < 1")), Err(ReductionError::NonFiniteCondition(_))));
    }
}
