use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::dsl::printer::{bool_to_string, expr_to_string};
use crate::dsl::{BoolExpr, CmpOp, Expr};
use crate::symbolic::{ConstExpr, Monomial, Name, Rational, SymPoly, VarPolynomial};

/// Boolean condition over polynomials in program variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Cond {
    True,
    False,
    Cmp(CmpOp, VarPolynomial, VarPolynomial),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Cond {
    pub fn and(a: Cond, b: Cond) -> Cond {
        match (a, b) {
            (Cond::True, x) | (x, Cond::True) => x,
            (Cond::False, _) | (_, Cond::False) => Cond::False,
            (x, y) => Cond::And(Box::new(x), Box::new(y)),
        }
    }

    pub fn negate(a: Cond) -> Cond {
        match a {
            Cond::True => Cond::False,
            Cond::False => Cond::True,
            Cond::Not(x) => *x,
            x => Cond::Not(Box::new(x)),
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Cond::True)
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Name>) {
        match self {
            Cond::True | Cond::False => {}
            Cond::Cmp(_, a, b) => {
                out.extend(a.vars());
                out.extend(b.vars());
            }
            Cond::Not(a) => a.collect_vars(out),
            Cond::And(a, b) | Cond::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn mentions(&self, v: &str) -> bool {
        self.vars().iter().any(|x| &**x == v)
    }

    /// Replaces variable `v` by `to`.
    pub fn rename(&self, v: &str, to: &Name) -> Cond {
        let r = VarPolynomial::var(to.clone());
        self.map_polys(&|p| p.substitute(v, &r))
    }

    pub fn map_polys(&self, f: &dyn Fn(&VarPolynomial) -> VarPolynomial) -> Cond {
        match self {
            Cond::True | Cond::False => self.clone(),
            Cond::Cmp(op, a, b) => Cond::Cmp(*op, f(a), f(b)),
            Cond::Not(a) => Cond::Not(Box::new(a.map_polys(f))),
            Cond::And(a, b) => Cond::And(Box::new(a.map_polys(f)), Box::new(b.map_polys(f))),
            Cond::Or(a, b) => Cond::Or(Box::new(a.map_polys(f)), Box::new(b.map_polys(f))),
        }
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<Cond> {
        match self {
            Cond::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            Cond::True => Vec::new(),
            x => vec![x.clone()],
        }
    }

    pub fn conjunction(parts: impl IntoIterator<Item = Cond>) -> Cond {
        parts.into_iter().fold(Cond::True, Cond::and)
    }

    /// Evaluates under a total assignment of the mentioned variables; `None` if some
    /// comparison cannot be decided (symbolic values).
    pub fn eval(&self, values: &BTreeMap<Name, ConstExpr>) -> Option<bool> {
        Some(match self {
            Cond::True => true,
            Cond::False => false,
            Cond::Cmp(op, a, b) => {
                let d = &a.eval(values)? - &b.eval(values)?;
                op.holds(d.sign()?)
            }
            Cond::Not(a) => !a.eval(values)?,
            Cond::And(a, b) => a.eval(values)? && b.eval(values)?,
            Cond::Or(a, b) => a.eval(values)? || b.eval(values)?,
        })
    }

    pub fn from_bool(b: &BoolExpr, is_var: &dyn Fn(&str) -> bool) -> Result<Cond, String> {
        Ok(match b {
            BoolExpr::True => Cond::True,
            BoolExpr::False => Cond::False,
            BoolExpr::Cmp(op, l, r) => Cond::Cmp(*op, l.to_poly(is_var)?, r.to_poly(is_var)?),
            BoolExpr::Not(a) => Cond::Not(Box::new(Cond::from_bool(a, is_var)?)),
            BoolExpr::And(a, c) => {
                Cond::And(Box::new(Cond::from_bool(a, is_var)?), Box::new(Cond::from_bool(c, is_var)?))
            }
            BoolExpr::Or(a, c) => {
                Cond::Or(Box::new(Cond::from_bool(a, is_var)?), Box::new(Cond::from_bool(c, is_var)?))
            }
        })
    }

    pub fn to_bool(&self) -> BoolExpr {
        match self {
            Cond::True => BoolExpr::True,
            Cond::False => BoolExpr::False,
            Cond::Cmp(op, a, b) => BoolExpr::Cmp(*op, poly_to_expr(a), poly_to_expr(b)),
            Cond::Not(a) => BoolExpr::Not(Box::new(a.to_bool())),
            Cond::And(a, b) => BoolExpr::And(Box::new(a.to_bool()), Box::new(b.to_bool())),
            Cond::Or(a, b) => BoolExpr::Or(Box::new(a.to_bool()), Box::new(b.to_bool())),
        }
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bool_to_string(&self.to_bool()))
    }
}

/// A draw from a named distribution with constant parameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct DistCall {
    pub name: Name,
    pub params: Vec<ConstExpr>,
}

impl fmt::Display for DistCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self.params.iter().map(|p| expr_to_string(&const_to_expr(p))).collect();
        write!(f, "{}({})", self.name, ps.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Rhs {
    /// Probabilistic choice; probabilities are explicit and sum to one.
    Categorical(Vec<(VarPolynomial, ConstExpr)>),
    Dist(DistCall),
}

impl Rhs {
    pub fn poly(p: VarPolynomial) -> Rhs {
        Rhs::Categorical(vec![(p, ConstExpr::one())])
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        match self {
            Rhs::Categorical(o) => o.iter().flat_map(|(p, _)| p.vars()).collect(),
            Rhs::Dist(_) => BTreeSet::new(),
        }
    }

    pub fn polys(&self) -> Vec<&VarPolynomial> {
        match self {
            Rhs::Categorical(o) => o.iter().map(|(p, _)| p).collect(),
            Rhs::Dist(_) => Vec::new(),
        }
    }

    pub fn map_polys(&self, f: &dyn Fn(&VarPolynomial) -> VarPolynomial) -> Rhs {
        match self {
            Rhs::Categorical(o) => Rhs::Categorical(o.iter().map(|(p, q)| (f(p), q.clone())).collect()),
            Rhs::Dist(_) => self.clone(),
        }
    }

    /// The single deterministic value, if this is not a random choice.
    pub fn as_deterministic(&self) -> Option<&VarPolynomial> {
        match self {
            Rhs::Categorical(o) if o.len() == 1 => Some(&o[0].0),
            _ => None,
        }
    }
}

impl fmt::Display for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rhs::Dist(d) => write!(f, "{d}"),
            Rhs::Categorical(o) => {
                for (i, (p, q)) in o.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{}", expr_to_string(&poly_to_expr(p)))?;
                    if o.len() > 1 && i + 1 < o.len() {
                        write!(f, " {{{}}}", expr_to_string(&const_to_expr(q)))?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// `target = rhs [guard] default`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct GuardedAssignment {
    pub target: Name,
    pub rhs: Rhs,
    pub guard: Cond,
    pub default: Name,
}

impl GuardedAssignment {
    pub fn plain(target: Name, rhs: Rhs) -> Self {
        GuardedAssignment { default: target.clone(), target, rhs, guard: Cond::True }
    }

    /// Variables read by this assignment (rhs, guard and default when relevant).
    pub fn reads(&self) -> BTreeSet<Name> {
        let mut s = self.rhs.vars();
        if !self.guard.is_true() {
            s.extend(self.guard.vars());
            s.insert(self.default.clone());
        }
        s
    }

    pub fn rename_reads(&self, v: &str, to: &Name) -> GuardedAssignment {
        let r = VarPolynomial::var(to.clone());
        GuardedAssignment {
            target: self.target.clone(),
            rhs: self.rhs.map_polys(&|p| p.substitute(v, &r)),
            guard: self.guard.rename(v, to),
            default: if &*self.default == v { to.clone() } else { self.default.clone() },
        }
    }
}

impl fmt::Display for GuardedAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.target, self.rhs)?;
        if !self.guard.is_true() || self.default != self.target {
            write!(f, " [{}] {}", self.guard, self.default)?;
        }
        Ok(())
    }
}

/// A loop in normal form: flat guarded single assignments, each body variable assigned once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NormalizedProgram {
    pub init: Vec<GuardedAssignment>,
    pub body: Vec<GuardedAssignment>,
    /// Variables of the source program.
    pub original_vars: Vec<Name>,
    /// Every variable, source ones first, then auxiliaries in creation order.
    pub variables: Vec<Name>,
    pub constants: BTreeSet<Name>,
    /// Loop guard of a guarded loop, kept for after-termination queries.
    pub loop_guard: Option<Cond>,
}

impl NormalizedProgram {
    pub fn is_variable(&self, v: &str) -> bool {
        self.variables.iter().any(|x| &**x == v)
    }

    pub fn body_assignment(&self, v: &str) -> Option<&GuardedAssignment> {
        self.body.iter().find(|a| &*a.target == v)
    }

    /// Position of `v`'s assignment in the body.
    pub fn body_index(&self, v: &str) -> Option<usize> {
        self.body.iter().position(|a| &*a.target == v)
    }

    pub fn body_targets(&self) -> Vec<Name> {
        self.body.iter().map(|a| a.target.clone()).collect()
    }

    /// Renders in the surface syntax extended with `[guard] default` clauses.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for a in &self.init {
            out.push_str(&format!("{a}\n"));
        }
        out.push_str("while true:\n");
        for a in &self.body {
            out.push_str(&format!("  {a}\n"));
        }
        out.push_str("end\n");
        out
    }
}

impl fmt::Display for NormalizedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_source())
    }
}

fn rat_expr(r: &Rational) -> Expr {
    if r.is_negative() {
        Expr::Neg(Box::new(Expr::Num(-r.clone())))
    } else {
        Expr::Num(r.clone())
    }
}

fn product(factors: Vec<Expr>) -> Option<Expr> {
    factors.into_iter().reduce(|a, b| Expr::Mul(Box::new(a), Box::new(b)))
}

fn power(name: &Name, e: u32) -> Expr {
    let v = Expr::Ident(name.clone());
    if e == 1 {
        v
    } else {
        Expr::Pow(Box::new(v), e)
    }
}

/// Sum of `coef * monomial` terms with signs folded into subtraction.
fn sum_terms(terms: Vec<(Rational, Option<Expr>)>) -> Expr {
    let mut acc: Option<Expr> = None;
    for (c, m) in terms {
        let neg = c.is_negative();
        let abs = c.abs();
        let term = match m {
            None => Expr::Num(abs),
            Some(m) if abs.is_one() => m,
            Some(m) => Expr::Mul(Box::new(Expr::Num(abs)), Box::new(m)),
        };
        acc = Some(match acc {
            None if neg => Expr::Neg(Box::new(term)),
            None => term,
            Some(a) if neg => Expr::Sub(Box::new(a), Box::new(term)),
            Some(a) => Expr::Add(Box::new(a), Box::new(term)),
        });
    }
    acc.unwrap_or_else(|| Expr::num(0))
}

fn sympoly_to_expr(p: &SymPoly) -> Expr {
    let mut terms: Vec<(Rational, Option<Expr>)> = p
        .terms()
        .map(|(m, c)| (c.clone(), product(m.factors().iter().map(|(n, e)| power(n, *e)).collect())))
        .collect();
    terms.reverse();
    sum_terms(terms)
}

pub fn const_to_expr(c: &ConstExpr) -> Expr {
    match c {
        ConstExpr::Rat(r) => rat_expr(r),
        ConstExpr::Sym(f) => {
            let n = sympoly_to_expr(f.numer());
            if f.denom().as_constant().is_some_and(|d| d.is_one()) {
                n
            } else {
                Expr::Div(Box::new(n), Box::new(sympoly_to_expr(f.denom())))
            }
        }
    }
}

fn monomial_expr(m: &Monomial) -> Option<Expr> {
    product(m.powers().iter().map(|(n, e)| power(n, *e)).collect())
}

/// Converts a polynomial back into an expression tree (highest terms first).
pub fn poly_to_expr(p: &VarPolynomial) -> Expr {
    if p.is_zero() {
        return Expr::num(0);
    }
    let mut acc: Option<Expr> = None;
    let mut items: Vec<_> = p.terms().collect();
    items.reverse();
    for (m, c) in items {
        let mono = monomial_expr(m);
        let (neg, body) = match c {
            ConstExpr::Rat(r) => {
                let abs = r.abs();
                let e = match mono {
                    None => Expr::Num(abs),
                    Some(m) if abs.is_one() => m,
                    Some(m) => Expr::Mul(Box::new(Expr::Num(abs)), Box::new(m)),
                };
                (r.is_negative(), e)
            }
            sym => {
                let ce = const_to_expr(sym);
                let e = match mono {
                    None => ce,
                    Some(m) => Expr::Mul(Box::new(ce), Box::new(m)),
                };
                (false, e)
            }
        };
        acc = Some(match acc {
            None if neg => Expr::Neg(Box::new(body)),
            None => body,
            Some(a) if neg => Expr::Sub(Box::new(a), Box::new(body)),
            Some(a) => Expr::Add(Box::new(a), Box::new(body)),
        });
    }
    acc.unwrap_or_else(|| Expr::Num(Rational::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_expr;

    #[test]
    fn poly_expr_roundtrip() {
        let is_var = |s: &str| s != "c";
        for src in ["x**2 - 3*x*y + 1/2", "c*x - (c + 1)/(c - 2)", "-x", "0"] {
            let p = parse_expr(src).unwrap().to_poly(&is_var).unwrap();
            let back = poly_to_expr(&p).to_poly(&is_var).unwrap();
            assert_eq!(p, back, "{src}");
        }
    }

    #[test]
    fn cond_eval() {
        let is_var = |_: &str| true;
        let c = Cond::from_bool(&crate::dsl::parse_bool("x < 2 and not y == 1").unwrap(), &is_var).unwrap();
        let mut vals = BTreeMap::new();
        vals.insert(Name::from("x"), ConstExpr::int(1));
        vals.insert(Name::from("y"), ConstExpr::int(0));
        assert_eq!(c.eval(&vals), Some(true));
        vals.insert(Name::from("y"), ConstExpr::int(1));
        assert_eq!(c.eval(&vals), Some(false));
    }
}
