use std::collections::BTreeSet;

use serde::Serialize;

use crate::symbolic::{ConstExpr, Name, Rational, VarPolynomial};

/// Polynomial (or constant) expression tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Expr {
    #[serde(serialize_with = "ser_rational")]
    Num(Rational),
    Ident(Name),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Division; the divisor must be constant except inside `Exponential(c/p)`.
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Gt => ord == Greater,
            CmpOp::Le => ord != Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BoolExpr {
    True,
    False,
    Cmp(CmpOp, Expr, Expr),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

/// Right-hand side of a single assignment target.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum AssignRhs {
    /// `v1 {p1} v2 {p2} ... vl [{pl}]`; only the last probability may be omitted.
    Categorical(Vec<(Expr, Option<Expr>)>),
    Dist { name: Name, params: Vec<Expr> },
}

impl AssignRhs {
    pub fn expr(e: Expr) -> Self {
        AssignRhs::Categorical(vec![(e, None)])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Statement {
    /// `x1, ..., xk = r1, ..., rk`, or `x = r [cond] d` when `guard` is set.
    Assign { targets: Vec<Name>, rhs: Vec<AssignRhs>, guard: Option<(BoolExpr, Name)> },
    If {
        branches: Vec<(BoolExpr, Vec<Statement>)>,
        else_branch: Option<Vec<Statement>>,
    },
}

/// A parsed probabilistic loop.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProgramAst {
    pub init: Vec<Statement>,
    pub guard: BoolExpr,
    pub body: Vec<Statement>,
    /// Assigned identifiers in order of first appearance.
    pub variables: Vec<Name>,
    /// Identifiers that are never assigned.
    pub constants: BTreeSet<Name>,
}

/// Distributions understood by the analyzer.
pub const DISTRIBUTIONS: &[&str] = &[
    "Bernoulli",
    "Binomial",
    "DiscreteUniform",
    "Uniform",
    "Normal",
    "Laplace",
    "Exponential",
    "Beta",
];

pub fn is_distribution(name: &str) -> bool {
    DISTRIBUTIONS.contains(&name)
}

pub fn dist_arity(name: &str) -> usize {
    match name {
        "Bernoulli" | "Exponential" => 1,
        _ => 2,
    }
}

impl Expr {
    pub fn num(i: i64) -> Expr {
        Expr::Num(Rational::from_integer(i.into()))
    }

    pub fn ident(n: impl Into<Name>) -> Expr {
        Expr::Ident(n.into())
    }

    pub fn identifiers(&self, out: &mut BTreeSet<Name>) {
        match self {
            Expr::Num(_) => {}
            Expr::Ident(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.identifiers(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.identifiers(out);
                b.identifiers(out);
            }
        }
    }

    pub fn mentions(&self, v: &str) -> bool {
        let mut s = BTreeSet::new();
        self.identifiers(&mut s);
        s.contains(v)
    }

    /// Converts to a polynomial; identifiers satisfying `is_var` become variables,
    /// all others symbolic constants. Fails on division by a non-constant.
    pub fn to_poly(&self, is_var: &dyn Fn(&str) -> bool) -> Result<VarPolynomial, String> {
        Ok(match self {
            Expr::Num(r) => VarPolynomial::constant(ConstExpr::Rat(r.clone())),
            Expr::Ident(n) if is_var(n) => VarPolynomial::var(n.clone()),
            Expr::Ident(n) => VarPolynomial::constant(ConstExpr::symbol(n.clone())),
            Expr::Neg(a) => a.to_poly(is_var)?.neg(),
            Expr::Add(a, b) => a.to_poly(is_var)?.add(&b.to_poly(is_var)?),
            Expr::Sub(a, b) => a.to_poly(is_var)?.sub(&b.to_poly(is_var)?),
            Expr::Mul(a, b) => a.to_poly(is_var)?.mul(&b.to_poly(is_var)?),
            Expr::Pow(a, e) => a.to_poly(is_var)?.pow(*e),
            Expr::Div(a, b) => {
                let d = b
                    .to_poly(is_var)?
                    .as_constant()
                    .ok_or_else(|| "division by a non-constant expression".to_string())?;
                let inv = d.recip().ok_or_else(|| "division by zero".to_string())?;
                a.to_poly(is_var)?.scale(&inv)
            }
        })
    }

    /// Converts a variable-free expression to a constant.
    pub fn to_const(&self) -> Result<ConstExpr, String> {
        self.to_poly(&|_| true)?
            .as_constant()
            .ok_or_else(|| "expression is not constant".to_string())
    }

    /// Constant value treating every identifier as a symbolic constant.
    pub fn to_symbolic_const(&self) -> Result<ConstExpr, String> {
        self.to_poly(&|_| false)?
            .as_constant()
            .ok_or_else(|| "expression is not constant".to_string())
    }

    /// Replaces identifier `v` by `by` everywhere.
    pub fn rename(&self, v: &str, by: &Expr) -> Expr {
        match self {
            Expr::Num(_) => self.clone(),
            Expr::Ident(n) if &**n == v => by.clone(),
            Expr::Ident(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.rename(v, by))),
            Expr::Pow(a, e) => Expr::Pow(Box::new(a.rename(v, by)), *e),
            Expr::Add(a, b) => Expr::Add(Box::new(a.rename(v, by)), Box::new(b.rename(v, by))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.rename(v, by)), Box::new(b.rename(v, by))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.rename(v, by)), Box::new(b.rename(v, by))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.rename(v, by)), Box::new(b.rename(v, by))),
        }
    }
}

impl BoolExpr {
    pub fn identifiers(&self, out: &mut BTreeSet<Name>) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Cmp(_, a, b) => {
                a.identifiers(out);
                b.identifiers(out);
            }
            BoolExpr::Not(a) => a.identifiers(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.identifiers(out);
                b.identifiers(out);
            }
        }
    }

    pub fn mentions(&self, v: &str) -> bool {
        let mut s = BTreeSet::new();
        self.identifiers(&mut s);
        s.contains(v)
    }

    pub fn rename(&self, v: &str, by: &Expr) -> BoolExpr {
        match self {
            BoolExpr::True | BoolExpr::False => self.clone(),
            BoolExpr::Cmp(op, a, b) => BoolExpr::Cmp(*op, a.rename(v, by), b.rename(v, by)),
            BoolExpr::Not(a) => BoolExpr::Not(Box::new(a.rename(v, by))),
            BoolExpr::And(a, b) => BoolExpr::And(Box::new(a.rename(v, by)), Box::new(b.rename(v, by))),
            BoolExpr::Or(a, b) => BoolExpr::Or(Box::new(a.rename(v, by)), Box::new(b.rename(v, by))),
        }
    }

    /// Conjunction that drops trivial `true` operands.
    pub fn and(a: BoolExpr, b: BoolExpr) -> BoolExpr {
        match (a, b) {
            (BoolExpr::True, x) | (x, BoolExpr::True) => x,
            (x, y) => BoolExpr::And(Box::new(x), Box::new(y)),
        }
    }

    pub fn not(a: BoolExpr) -> BoolExpr {
        match a {
            BoolExpr::True => BoolExpr::False,
            BoolExpr::False => BoolExpr::True,
            x => BoolExpr::Not(Box::new(x)),
        }
    }
}

impl AssignRhs {
    pub fn identifiers(&self, out: &mut BTreeSet<Name>) {
        match self {
            AssignRhs::Categorical(opts) => {
                for (e, p) in opts {
                    e.identifiers(out);
                    if let Some(p) = p {
                        p.identifiers(out);
                    }
                }
            }
            AssignRhs::Dist { params, .. } => params.iter().for_each(|p| p.identifiers(out)),
        }
    }

    pub fn mentions(&self, v: &str) -> bool {
        let mut s = BTreeSet::new();
        self.identifiers(&mut s);
        s.contains(v)
    }

    pub fn rename(&self, v: &str, by: &Expr) -> AssignRhs {
        match self {
            AssignRhs::Categorical(opts) => AssignRhs::Categorical(
                opts.iter()
                    .map(|(e, p)| (e.rename(v, by), p.as_ref().map(|p| p.rename(v, by))))
                    .collect(),
            ),
            AssignRhs::Dist { name, params } => AssignRhs::Dist {
                name: name.clone(),
                params: params.iter().map(|p| p.rename(v, by)).collect(),
            },
        }
    }
}

impl Statement {
    /// Every variable assigned in this statement, including nested branches.
    pub fn assigned(&self, out: &mut Vec<Name>) {
        match self {
            Statement::Assign { targets, .. } => {
                for t in targets {
                    if !out.contains(t) {
                        out.push(t.clone());
                    }
                }
            }
            Statement::If { branches, else_branch } => {
                for (_, b) in branches {
                    b.iter().for_each(|s| s.assigned(out));
                }
                if let Some(e) = else_branch {
                    e.iter().for_each(|s| s.assigned(out));
                }
            }
        }
    }

    pub fn identifiers(&self, out: &mut BTreeSet<Name>) {
        match self {
            Statement::Assign { targets, rhs, guard } => {
                out.extend(targets.iter().cloned());
                rhs.iter().for_each(|r| r.identifiers(out));
                if let Some((c, d)) = guard {
                    c.identifiers(out);
                    out.insert(d.clone());
                }
            }
            Statement::If { branches, else_branch } => {
                for (c, b) in branches {
                    c.identifiers(out);
                    b.iter().for_each(|s| s.identifiers(out));
                }
                if let Some(e) = else_branch {
                    e.iter().for_each(|s| s.identifiers(out));
                }
            }
        }
    }
}

impl ProgramAst {
    /// Builds a program and computes the variable / constant classification.
    pub fn new(init: Vec<Statement>, guard: BoolExpr, body: Vec<Statement>) -> ProgramAst {
        let mut variables = Vec::new();
        init.iter().chain(body.iter()).for_each(|s| s.assigned(&mut variables));
        let mut ids = BTreeSet::new();
        init.iter().chain(body.iter()).for_each(|s| s.identifiers(&mut ids));
        guard.identifiers(&mut ids);
        let constants = ids.into_iter().filter(|i| !variables.contains(i)).collect();
        ProgramAst { init, guard, body, variables, constants }
    }

    pub fn is_variable(&self, n: &str) -> bool {
        self.variables.iter().any(|v| &**v == n)
    }

    /// Variables assigned in the loop body.
    pub fn body_variables(&self) -> Vec<Name> {
        let mut out = Vec::new();
        self.body.iter().for_each(|s| s.assigned(&mut out));
        out
    }
}
