//! Loop-guard encoding and the Bernoulli approximation of conditions over
//! variables with infinite support.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dsl::{AssignRhs, BoolExpr, CmpOp, Expr, ProgramAst, Statement};
use crate::symbolic::Name;

/// `while φ: body` becomes `while true: if φ: body end`. Returns the rewritten
/// program together with `φ` when the guard was not already `true`.
pub fn encode_guard(p: &ProgramAst) -> (ProgramAst, Option<BoolExpr>) {
    if p.guard == BoolExpr::True {
        return (p.clone(), None);
    }
    let body = vec![Statement::If { branches: vec![(p.guard.clone(), p.body.clone())], else_branch: None }];
    (ProgramAst::new(p.init.clone(), BoolExpr::True, body), Some(p.guard.clone()))
}

/// A condition that may not satisfy the assumptions behind the approximation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssumptionWarning {
    pub condition: String,
    pub variable: Name,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Approximation {
    pub program: ProgramAst,
    /// Fresh probability symbols introduced, with the condition they stand for.
    pub symbols: Vec<(Name, String)>,
    pub warnings: Vec<AssumptionWarning>,
}

fn conjuncts(b: &BoolExpr, out: &mut Vec<BoolExpr>) {
    match b {
        BoolExpr::And(l, r) => {
            conjuncts(l, out);
            conjuncts(r, out);
        }
        other => out.push(other.clone()),
    }
}

fn symbol_for(cond: &str, taken: &BTreeSet<Name>) -> Name {
    let mut s = String::from("p_");
    for w in cond.split_whitespace() {
        let w = match w {
            "<" => "lt",
            "<=" => "le",
            ">" => "gt",
            ">=" => "ge",
            "==" => "eq",
            "!=" => "ne",
            w => w,
        };
        if !s.ends_with('_') {
            s.push('_');
        }
        for c in w.chars() {
            if c.is_alphanumeric() {
                s.push(c);
            } else if !s.ends_with('_') {
                s.push('_');
            }
        }
    }
    let base = s.trim_end_matches('_').to_string();
    let mut name = base.clone();
    let mut k = 1;
    while taken.contains(name.as_str()) {
        k += 1;
        name = format!("{base}_{k}");
    }
    name.into()
}

struct Rewriter<'a> {
    is_finite: &'a dyn Fn(&str) -> bool,
    is_var: &'a dyn Fn(&str) -> bool,
    taken: BTreeSet<Name>,
    symbols: Vec<(Name, String)>,
    pending: Vec<(BoolExpr, Vec<Name>)>,
    coins: Vec<Name>,
    counter: usize,
}

impl Rewriter<'_> {
    fn fresh(&mut self, prefix: &str) -> Name {
        loop {
            self.counter += 1;
            let n: Name = format!("{prefix}{}", self.counter).into();
            if self.taken.insert(n.clone()) {
                return n;
            }
        }
    }

    /// Rewrites `c`, pushing the Bernoulli draw it needs (if any) onto `out`.
    fn condition(&mut self, c: &BoolExpr, out: &mut Vec<Statement>) -> BoolExpr {
        let mut parts = Vec::new();
        conjuncts(c, &mut parts);
        let (fin, inf): (Vec<_>, Vec<_>) = parts.into_iter().partition(|p| {
            let mut ids = BTreeSet::new();
            p.identifiers(&mut ids);
            ids.iter().all(|v| !(self.is_var)(v) || (self.is_finite)(v))
        });
        let Some(inf_cond) = inf.into_iter().reduce(BoolExpr::and) else {
            return c.clone();
        };
        let text = crate::dsl::printer::bool_to_string(&inf_cond);
        let sym = symbol_for(&text, &self.taken);
        self.taken.insert(sym.clone());
        let coin = self.fresh("_b");
        self.coins.push(coin.clone());
        out.push(Statement::Assign {
            targets: vec![coin.clone()],
            rhs: vec![AssignRhs::Dist { name: "Bernoulli".into(), params: vec![Expr::Ident(sym.clone())] }],
            guard: None,
        });
        let mut ids = BTreeSet::new();
        inf_cond.identifiers(&mut ids);
        let vars = ids.into_iter().filter(|v| (self.is_var)(v)).collect();
        self.pending.push((inf_cond, vars));
        self.symbols.push((sym, text));
        let coin_true = BoolExpr::Cmp(CmpOp::Eq, Expr::Ident(coin), Expr::num(1));
        fin.into_iter().rev().fold(coin_true, |acc, f| BoolExpr::and(f, acc))
    }

    fn block(&mut self, stmts: &[Statement]) -> Vec<Statement> {
        let mut out = Vec::new();
        for s in stmts {
            match s {
                Statement::Assign { targets, rhs, guard: Some((c, d)) } => {
                    let c = self.condition(c, &mut out);
                    out.push(Statement::Assign {
                        targets: targets.clone(),
                        rhs: rhs.clone(),
                        guard: Some((c, d.clone())),
                    });
                }
                Statement::Assign { .. } => out.push(s.clone()),
                Statement::If { branches, else_branch } => {
                    let mut new_branches = Vec::new();
                    for (c, b) in branches {
                        let c = self.condition(c, &mut out);
                        new_branches.push((c, self.block(b)));
                    }
                    let else_branch = else_branch.as_ref().map(|e| self.block(e));
                    out.push(Statement::If { branches: new_branches, else_branch });
                }
            }
        }
        out
    }
}

fn count_assignments(stmts: &[Statement], v: &str) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            Statement::Assign { targets, .. } => targets.iter().filter(|t| &***t == v).count(),
            Statement::If { branches, else_branch } => {
                branches.iter().map(|(_, b)| count_assignments(b, v)).sum::<usize>()
                    + else_branch.as_deref().map_or(0, |e| count_assignments(e, v))
            }
        })
        .sum()
}

/// Conservative checks that a replaced condition behaves like an independent
/// coin with a fixed bias: each variable it reads is redrawn unconditionally at
/// the top level of the body, from a distribution that reads no state, before
/// the condition is evaluated.
fn check_assumptions(p: &ProgramAst, cond: &BoolExpr, vars: &[Name], is_var: &dyn Fn(&str) -> bool) -> Vec<AssumptionWarning> {
    let text = crate::dsl::printer::bool_to_string(cond);
    let mut warnings = Vec::new();
    let first_use = p.body.iter().position(|s| match s {
        Statement::If { branches, .. } => branches.iter().any(|(c, _)| vars.iter().any(|v| c.mentions(v))),
        Statement::Assign { guard: Some((c, _)), .. } => vars.iter().any(|v| c.mentions(v)),
        Statement::Assign { .. } => false,
    });
    for v in vars {
        let warn = |reason: &str| AssumptionWarning { condition: text.clone(), variable: v.clone(), reason: reason.into() };
        let top: Vec<(usize, &Statement)> = p
            .body
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Statement::Assign { targets, guard: None, .. } if targets.contains(v)))
            .collect();
        if top.len() != 1 || count_assignments(&p.body, v) != 1 {
            warnings.push(warn("not redrawn exactly once per iteration"));
            continue;
        }
        let (idx, stmt) = top[0];
        let Statement::Assign { rhs, .. } = stmt else { unreachable!() };
        let mut ids = BTreeSet::new();
        rhs.iter().for_each(|r| r.identifiers(&mut ids));
        if ids.iter().any(|i| is_var(i)) {
            warnings.push(warn("depends on program state"));
        }
        if first_use.is_some_and(|u| u < idx) {
            warnings.push(warn("read before it is redrawn"));
        }
    }
    warnings
}

/// Replaces every conjunct that reads an infinite-support variable by a test on
/// a fresh Bernoulli draw with a symbolic bias.
pub fn approximate_infinite_conditions(p: &ProgramAst, is_finite: &dyn Fn(&str) -> bool) -> Approximation {
    let is_var = |v: &str| p.is_variable(v);
    let mut taken: BTreeSet<Name> = p.variables.iter().cloned().collect();
    taken.extend(p.constants.iter().cloned());
    let mut rw = Rewriter { is_finite, is_var: &is_var, taken, symbols: Vec::new(), pending: Vec::new(), coins: Vec::new(), counter: 0 };
    let mut init = rw.block(&p.init);
    let first_body_coin = rw.coins.len();
    let body = rw.block(&p.body);
    // Coins drawn in the body start at a concrete value so they stay finite.
    for coin in &rw.coins[first_body_coin..] {
        init.push(Statement::Assign { targets: vec![coin.clone()], rhs: vec![AssignRhs::expr(Expr::num(0))], guard: None });
    }
    let warnings = rw
        .pending
        .iter()
        .flat_map(|(c, vars)| check_assumptions(p, c, vars, &is_var))
        .collect();
    Approximation { program: ProgramAst::new(init, p.guard.clone(), body), symbols: rw.symbols, warnings }
}
