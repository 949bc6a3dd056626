//! The distribution-preserving rewrite rules, applied one site at a time.

use std::collections::BTreeSet;

use serde::Serialize;

use super::ir::{Cond, DistCall, GuardedAssignment, NormalizedProgram, Rhs};
use super::NormalizeError;
use crate::dsl::{AssignRhs, Expr, ProgramAst, Statement};
use crate::symbolic::{ConstExpr, Name, VarPolynomial};

/// Right-hand side before distribution parameters are made constant.
#[derive(Clone, Debug, PartialEq)]
pub enum WRhs {
    Categorical(Vec<(VarPolynomial, ConstExpr)>),
    Dist { name: Name, params: Vec<VarPolynomial> },
    /// `Exponential(rate / scale)` with a non-constant `scale`.
    ScaledExponential { rate: ConstExpr, scale: VarPolynomial },
}

impl WRhs {
    fn vars(&self) -> BTreeSet<Name> {
        match self {
            WRhs::Categorical(o) => o.iter().flat_map(|(p, _)| p.vars()).collect(),
            WRhs::Dist { params, .. } => params.iter().flat_map(|p| p.vars()).collect(),
            WRhs::ScaledExponential { scale, .. } => scale.vars(),
        }
    }

    fn rename(&self, v: &str, to: &Name) -> WRhs {
        let r = VarPolynomial::var(to.clone());
        match self {
            WRhs::Categorical(o) => {
                WRhs::Categorical(o.iter().map(|(p, q)| (p.substitute(v, &r), q.clone())).collect())
            }
            WRhs::Dist { name, params } => WRhs::Dist {
                name: name.clone(),
                params: params.iter().map(|p| p.substitute(v, &r)).collect(),
            },
            WRhs::ScaledExponential { rate, scale } => {
                WRhs::ScaledExponential { rate: rate.clone(), scale: scale.substitute(v, &r) }
            }
        }
    }

    /// A distribution call whose parameters still mention variables.
    fn is_nontrivial_dist(&self) -> bool {
        match self {
            WRhs::Dist { params, .. } => params.iter().any(|p| p.as_constant().is_none()),
            WRhs::ScaledExponential { .. } => true,
            WRhs::Categorical(_) => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WStmt {
    Simultaneous { targets: Vec<Name>, rhs: Vec<WRhs> },
    Assign { target: Name, rhs: WRhs, guard: Cond, default: Name },
    If { cond: Cond, then: Vec<WStmt>, els: Option<Vec<WStmt>> },
}

impl WStmt {
    fn assign(target: Name, rhs: WRhs) -> WStmt {
        WStmt::Assign { default: target.clone(), target, rhs, guard: Cond::True }
    }

    fn copy(target: Name, source: &Name) -> WStmt {
        WStmt::assign(target, WRhs::Categorical(vec![(VarPolynomial::var(source.clone()), ConstExpr::one())]))
    }

    fn assigned(&self, out: &mut BTreeSet<Name>) {
        match self {
            WStmt::Simultaneous { targets, .. } => out.extend(targets.iter().cloned()),
            WStmt::Assign { target, .. } => {
                out.insert(target.clone());
            }
            WStmt::If { then, els, .. } => {
                then.iter().for_each(|s| s.assigned(out));
                els.iter().flatten().for_each(|s| s.assigned(out));
            }
        }
    }
}

/// How an auxiliary loop variable is initialized before the first iteration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum AuxInit {
    Copy(Name),
    Zero,
}

/// A program mid-normalization.
#[derive(Clone, Debug)]
pub struct WorkProgram {
    pub init: Vec<WStmt>,
    pub body: Vec<WStmt>,
    pub original_vars: Vec<Name>,
    pub constants: BTreeSet<Name>,
    pub loop_guard: Option<Cond>,
    aux: Vec<Name>,
    body_aux: Vec<(Name, AuxInit)>,
    taken: BTreeSet<Name>,
    counter: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TransformKind {
    Simultaneous,
    Distribution,
    Else,
    If,
    Multi,
}

/// Where a transformation is applied: a statement path (indices, descending into
/// an `if` via 0 for the then-branch and 1 for the else-branch) or, for the
/// multi-assignment rule, a variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Site {
    Statement { in_body: bool, path: Vec<usize> },
    Variable { in_body: bool, name: Name },
}

/// Lexicographic termination measure (Sim, Dist, Else, If, Multi_B, Multi_I).
pub type Measure = (usize, usize, usize, usize, usize, usize);

fn convert_rhs(r: &AssignRhs, is_var: &dyn Fn(&str) -> bool) -> Result<WRhs, NormalizeError> {
    let inv = NormalizeError::Invalid;
    match r {
        AssignRhs::Categorical(opts) => {
            let mut out = Vec::new();
            let mut total = ConstExpr::zero();
            for (v, p) in opts {
                let poly = v.to_poly(is_var).map_err(inv)?;
                let prob = match p {
                    Some(p) => p.to_symbolic_const().map_err(inv)?,
                    None => &ConstExpr::one() - &total,
                };
                total = &total + &prob;
                out.push((poly, prob));
            }
            Ok(WRhs::Categorical(out))
        }
        AssignRhs::Dist { name, params } => {
            if &**name == "Exponential" {
                if let Expr::Div(c, p) = &params[0] {
                    let scale = p.to_poly(is_var).map_err(inv)?;
                    if scale.as_constant().is_none() {
                        let rate = c.to_poly(is_var).map_err(inv)?.as_constant().ok_or_else(|| {
                            NormalizeError::Invalid("Exponential numerator must be constant".into())
                        })?;
                        return Ok(WRhs::ScaledExponential { rate, scale });
                    }
                }
            }
            let params =
                params.iter().map(|p| p.to_poly(is_var)).collect::<Result<Vec<_>, _>>().map_err(inv)?;
            Ok(WRhs::Dist { name: name.clone(), params })
        }
    }
}

fn convert_block(
    stmts: &[Statement],
    is_var: &dyn Fn(&str) -> bool,
) -> Result<Vec<WStmt>, NormalizeError> {
    let mut out = Vec::new();
    for s in stmts {
        match s {
            Statement::Assign { targets, rhs, guard } => {
                let rhs = rhs.iter().map(|r| convert_rhs(r, is_var)).collect::<Result<Vec<_>, _>>()?;
                if let Some((c, d)) = guard {
                    out.push(WStmt::Assign {
                        target: targets[0].clone(),
                        rhs: rhs.into_iter().next().unwrap(),
                        guard: Cond::from_bool(c, is_var).map_err(NormalizeError::Invalid)?,
                        default: d.clone(),
                    });
                } else if targets.len() == 1 {
                    out.push(WStmt::assign(targets[0].clone(), rhs.into_iter().next().unwrap()));
                } else {
                    out.push(WStmt::Simultaneous { targets: targets.clone(), rhs });
                }
            }
            Statement::If { branches, else_branch } => {
                // `else if` chains become nested if-else statements.
                let mut tail = match else_branch {
                    Some(e) => Some(convert_block(e, is_var)?),
                    None => None,
                };
                for (c, b) in branches.iter().rev() {
                    let cond = Cond::from_bool(c, is_var).map_err(NormalizeError::Invalid)?;
                    let then = convert_block(b, is_var)?;
                    tail = Some(vec![WStmt::If { cond, then, els: tail }]);
                }
                out.extend(tail.unwrap_or_default());
            }
        }
    }
    Ok(out)
}

fn count_dists(stmts: &[WStmt]) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            WStmt::Simultaneous { rhs, .. } => rhs.iter().filter(|r| r.is_nontrivial_dist()).count(),
            WStmt::Assign { rhs, .. } => usize::from(rhs.is_nontrivial_dist()),
            WStmt::If { then, els, .. } => count_dists(then) + els.as_deref().map_or(0, count_dists),
        })
        .sum()
}

fn count_sims(stmts: &[WStmt]) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            WStmt::Simultaneous { .. } => 1,
            WStmt::Assign { .. } => 0,
            WStmt::If { then, els, .. } => count_sims(then) + els.as_deref().map_or(0, count_sims),
        })
        .sum()
}

fn count_elses(stmts: &[WStmt]) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            WStmt::If { then, els, .. } => {
                usize::from(els.is_some()) + count_elses(then) + els.as_deref().map_or(0, count_elses)
            }
            _ => 0,
        })
        .sum()
}

/// Assignments inside branches, weighted by `3^depth - 1` so hoisting one out
/// of a nested branch (possibly adding a copy) always decreases the total.
fn if_weight(stmts: &[WStmt], depth: u32) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            WStmt::Simultaneous { targets, .. } => targets.len() * (3usize.pow(depth) - 1),
            WStmt::Assign { .. } => 3usize.pow(depth) - 1,
            WStmt::If { then, els, .. } => {
                if_weight(then, depth + 1) + els.as_deref().map_or(0, |e| if_weight(e, depth + 1))
            }
        })
        .sum()
}

fn multi_count(stmts: &[WStmt]) -> usize {
    fn walk(stmts: &[WStmt], seen: &mut Vec<Name>) {
        for s in stmts {
            match s {
                WStmt::Simultaneous { targets, .. } => seen.extend(targets.iter().cloned()),
                WStmt::Assign { target, .. } => seen.push(target.clone()),
                WStmt::If { then, els, .. } => {
                    walk(then, seen);
                    els.iter().for_each(|e| walk(e, seen));
                }
            }
        }
    }
    let mut seen = Vec::new();
    walk(stmts, &mut seen);
    let distinct: BTreeSet<&Name> = seen.iter().collect();
    distinct.iter().filter(|n| seen.iter().filter(|s| s == *n).count() > 1).count()
}

impl WorkProgram {
    pub fn from_ast(p: &ProgramAst) -> Result<WorkProgram, NormalizeError> {
        let is_var = |s: &str| p.is_variable(s);
        let init = convert_block(&p.init, &is_var)?;
        let body = convert_block(&p.body, &is_var)?;
        let mut taken: BTreeSet<Name> = p.variables.iter().cloned().collect();
        taken.extend(p.constants.iter().cloned());
        Ok(WorkProgram {
            init,
            body,
            original_vars: p.variables.clone(),
            constants: p.constants.clone(),
            loop_guard: None,
            aux: Vec::new(),
            body_aux: Vec::new(),
            taken,
            counter: 0,
        })
    }

    fn fresh(&mut self, in_body: bool, init: AuxInit) -> Name {
        loop {
            self.counter += 1;
            let n: Name = Name::from(format!("_t{}", self.counter));
            if self.taken.insert(n.clone()) {
                self.aux.push(n.clone());
                if in_body {
                    self.body_aux.push((n.clone(), init));
                }
                return n;
            }
        }
    }

    pub fn measure(&self) -> Measure {
        let both = |f: fn(&[WStmt]) -> usize| f(&self.init) + f(&self.body);
        (
            both(count_sims),
            both(count_dists),
            both(count_elses),
            if_weight(&self.init, 0) + if_weight(&self.body, 0),
            multi_count(&self.body),
            multi_count(&self.init),
        )
    }

    fn block_mut(&mut self, in_body: bool) -> &mut Vec<WStmt> {
        if in_body {
            &mut self.body
        } else {
            &mut self.init
        }
    }

    /// Finds the next site according to the fixed pipeline order.
    pub fn next_site(&self) -> Option<(TransformKind, Site)> {
        type Pred = fn(&WStmt) -> bool;
        let preds: [(TransformKind, Pred); 4] = [
            (TransformKind::Simultaneous, |s| matches!(s, WStmt::Simultaneous { .. })),
            (TransformKind::Distribution, |s| matches!(s, WStmt::Assign { rhs, .. } if rhs.is_nontrivial_dist())),
            (TransformKind::Else, |s| matches!(s, WStmt::If { els: Some(_), .. })),
            (TransformKind::If, |s| {
                matches!(s, WStmt::If { then, els: None, .. } if matches!(then.first(), Some(WStmt::Assign { .. })))
            }),
        ];
        for (kind, pred) in preds {
            for in_body in [false, true] {
                let block = if in_body { &self.body } else { &self.init };
                if let Some(path) = find_path(block, pred) {
                    return Some((kind, Site::Statement { in_body, path }));
                }
            }
        }
        for in_body in [true, false] {
            let block = if in_body { &self.body } else { &self.init };
            if block.iter().all(|s| matches!(s, WStmt::Assign { .. })) {
                let mut seen = BTreeSet::new();
                for s in block {
                    if let WStmt::Assign { target, .. } = s {
                        if !seen.insert(target.clone()) {
                            return Some((TransformKind::Multi, Site::Variable { in_body, name: target.clone() }));
                        }
                    }
                }
            }
        }
        None
    }

    /// Applies one transformation at `site`.
    pub fn apply(&mut self, kind: TransformKind, site: &Site, minimal: bool) -> Result<(), NormalizeError> {
        match (kind, site) {
            (TransformKind::Multi, Site::Variable { in_body, name }) => self.apply_multi(*in_body, name),
            (TransformKind::Multi, _) => Err(NormalizeError::NotApplicable("multi-assignment needs a variable site".into())),
            (_, Site::Variable { .. }) => Err(NormalizeError::NotApplicable("statement site expected".into())),
            (kind, Site::Statement { in_body, path }) => {
                let stmt = {
                    let (list, idx) = locate(self.block_mut(*in_body), path)?;
                    list[idx].clone()
                };
                let replacement = match kind {
                    TransformKind::Simultaneous => self.simultaneous(stmt, *in_body, minimal)?,
                    TransformKind::Distribution => self.distribution(stmt, *in_body)?,
                    TransformKind::Else => self.else_rule(stmt, *in_body)?,
                    TransformKind::If => self.if_rule(stmt, *in_body)?,
                    TransformKind::Multi => unreachable!(),
                };
                let (list, idx) = locate(self.block_mut(*in_body), path)?;
                list.splice(idx..=idx, replacement);
                Ok(())
            }
        }
    }

    fn simultaneous(&mut self, s: WStmt, in_body: bool, minimal: bool) -> Result<Vec<WStmt>, NormalizeError> {
        let WStmt::Simultaneous { targets, rhs } = s else {
            return Err(NormalizeError::NotApplicable("not a simultaneous assignment".into()));
        };
        let hazard = rhs
            .iter()
            .enumerate()
            .any(|(i, r)| targets[..i].iter().any(|t| r.vars().contains(t)));
        if minimal && !hazard {
            return Ok(targets.into_iter().zip(rhs).map(|(t, r)| WStmt::assign(t, r)).collect());
        }
        let temps: Vec<Name> = targets.iter().map(|_| self.fresh(in_body, AuxInit::Zero)).collect();
        let mut out: Vec<WStmt> = temps.iter().cloned().zip(rhs).map(|(t, r)| WStmt::assign(t, r)).collect();
        out.extend(targets.into_iter().zip(&temps).map(|(x, t)| WStmt::copy(x, t)));
        Ok(out)
    }

    fn distribution(&mut self, s: WStmt, in_body: bool) -> Result<Vec<WStmt>, NormalizeError> {
        let WStmt::Assign { target, rhs, guard, default } = s else {
            return Err(NormalizeError::NotApplicable("not an assignment".into()));
        };
        if !rhs.is_nontrivial_dist() {
            return Err(NormalizeError::NotApplicable("distribution parameters are already constant".into()));
        }
        let konst = |p: &VarPolynomial, what: &str, dist: &str| {
            p.as_constant().ok_or_else(|| NormalizeError::NonConstantParameter {
                dist: dist.to_string(),
                param: what.to_string(),
            })
        };
        let zero = VarPolynomial::zero();
        let (draw, value): (WRhs, Box<dyn Fn(VarPolynomial) -> VarPolynomial>) = match &rhs {
            WRhs::ScaledExponential { rate, scale } => {
                let scale = scale.clone();
                (
                    WRhs::Dist { name: "Exponential".into(), params: vec![VarPolynomial::constant(rate.clone())] },
                    Box::new(move |t| scale.mul(&t)),
                )
            }
            WRhs::Dist { name, params } => match &**name {
                "Normal" | "Laplace" => {
                    let spread = konst(&params[1], "second", name)?;
                    let loc = params[0].clone();
                    (
                        WRhs::Dist { name: name.clone(), params: vec![zero, VarPolynomial::constant(spread)] },
                        Box::new(move |t| loc.add(&t)),
                    )
                }
                "Uniform" => {
                    let (lo, hi) = (params[0].clone(), params[1].clone());
                    (
                        WRhs::Dist {
                            name: name.clone(),
                            params: vec![zero, VarPolynomial::constant(ConstExpr::one())],
                        },
                        Box::new(move |t| lo.add(&hi.sub(&lo).mul(&t))),
                    )
                }
                other => {
                    return Err(NormalizeError::NonConstantParameter {
                        dist: other.to_string(),
                        param: "any".into(),
                    })
                }
            },
            WRhs::Categorical(_) => unreachable!(),
        };
        let t = self.fresh(in_body, AuxInit::Zero);
        let tv = VarPolynomial::var(t.clone());
        Ok(vec![
            WStmt::Assign { target: t.clone(), rhs: draw, guard: guard.clone(), default: t },
            WStmt::Assign {
                target,
                rhs: WRhs::Categorical(vec![(value(tv), ConstExpr::one())]),
                guard,
                default,
            },
        ])
    }

    fn else_rule(&mut self, s: WStmt, in_body: bool) -> Result<Vec<WStmt>, NormalizeError> {
        let WStmt::If { cond, then, els: Some(els) } = s else {
            return Err(NormalizeError::NotApplicable("not an if-else statement".into()));
        };
        let mut assigned = BTreeSet::new();
        then.iter().for_each(|s| s.assigned(&mut assigned));
        let mut out = Vec::new();
        let mut negated = cond.clone();
        for x in cond.vars() {
            if assigned.contains(&x) {
                let t = self.fresh(in_body, AuxInit::Copy(x.clone()));
                out.push(WStmt::copy(t.clone(), &x));
                negated = negated.rename(&x, &t);
            }
        }
        out.push(WStmt::If { cond, then, els: None });
        out.push(WStmt::If { cond: Cond::negate(negated), then: els, els: None });
        Ok(out)
    }

    fn if_rule(&mut self, s: WStmt, in_body: bool) -> Result<Vec<WStmt>, NormalizeError> {
        let WStmt::If { cond, mut then, els: None } = s else {
            return Err(NormalizeError::NotApplicable("not an if statement without else".into()));
        };
        let Some(WStmt::Assign { target, rhs, guard, default }) = then.first().cloned() else {
            return Err(NormalizeError::NotApplicable("branch does not start with an assignment".into()));
        };
        then.remove(0);
        let mut out = Vec::new();
        // The guard is read before the assignment, so only the statements after
        // it need the saved value of the target.
        let c = cond.clone();
        let mut rest_cond = cond;
        if rest_cond.mentions(&target) && !then.is_empty() {
            let t = self.fresh(in_body, AuxInit::Copy(target.clone()));
            out.push(WStmt::copy(t.clone(), &target));
            rest_cond = rest_cond.rename(&target, &t);
        }
        if target == default {
            out.push(WStmt::Assign { target, rhs, guard: Cond::and(c.clone(), guard), default });
        } else {
            // The inner default only applies when the branch is taken, so the
            // guarded value is computed into a temporary first.
            let t = self.fresh(in_body, AuxInit::Zero);
            out.push(WStmt::Assign { target: t.clone(), rhs, guard, default });
            out.push(WStmt::Assign {
                default: target.clone(),
                target,
                rhs: WRhs::Categorical(vec![(VarPolynomial::var(t), ConstExpr::one())]),
                guard: c.clone(),
            });
        }
        if !then.is_empty() {
            out.push(WStmt::If { cond: rest_cond, then, els: None });
        }
        Ok(out)
    }

    fn apply_multi(&mut self, in_body: bool, x: &Name) -> Result<(), NormalizeError> {
        let block = if in_body { &self.body } else { &self.init };
        if !block.iter().all(|s| matches!(s, WStmt::Assign { .. })) {
            return Err(NormalizeError::NotApplicable("block is not flat".into()));
        }
        let total = block.iter().filter(|s| matches!(s, WStmt::Assign { target, .. } if target == x)).count();
        if total < 2 {
            return Err(NormalizeError::NotApplicable(format!("`{x}` is assigned once")));
        }
        let mut fresh = Vec::new();
        for _ in 0..total - 1 {
            fresh.push(self.fresh(in_body, AuxInit::Copy(x.clone())));
        }
        let block = std::mem::take(self.block_mut(in_body));
        let mut out = Vec::with_capacity(block.len());
        let mut current = x.clone();
        let mut seen = 0;
        for s in block {
            let WStmt::Assign { target, rhs, guard, default } = s else { unreachable!() };
            let (rhs, guard, default) = if current != *x {
                let d = if default == *x { current.clone() } else { default };
                (rhs.rename(x, &current), guard.rename(x, &current), d)
            } else {
                (rhs, guard, default)
            };
            if target == *x {
                let new_target = if seen + 1 < total { fresh[seen].clone() } else { x.clone() };
                seen += 1;
                current = new_target.clone();
                out.push(WStmt::Assign { target: new_target, rhs, guard, default });
            } else {
                out.push(WStmt::Assign { target, rhs, guard, default });
            }
        }
        *self.block_mut(in_body) = out;
        Ok(())
    }

    /// Converts a fully normalized work program to the final representation.
    pub fn finish(self) -> Result<NormalizedProgram, NormalizeError> {
        if self.next_site().is_some() {
            return Err(NormalizeError::Invalid("program is not in normal form".into()));
        }
        let to_ga = |s: WStmt| -> Result<GuardedAssignment, NormalizeError> {
            let WStmt::Assign { target, rhs, guard, default } = s else {
                return Err(NormalizeError::Invalid("unflattened statement".into()));
            };
            let rhs = match rhs {
                WRhs::Categorical(o) => Rhs::Categorical(o),
                WRhs::Dist { name, params } => Rhs::Dist(DistCall {
                    name,
                    params: params.iter().map(|p| p.as_constant().expect("constant after normalization")).collect(),
                }),
                WRhs::ScaledExponential { .. } => unreachable!("removed by the distribution rule"),
            };
            Ok(GuardedAssignment { target, rhs, guard, default })
        };
        let mut init = self.init.into_iter().map(to_ga).collect::<Result<Vec<_>, _>>()?;
        for (aux, how) in &self.body_aux {
            let value = match how {
                AuxInit::Copy(src) => VarPolynomial::var(src.clone()),
                AuxInit::Zero => VarPolynomial::zero(),
            };
            init.push(GuardedAssignment::plain(aux.clone(), Rhs::poly(value)));
        }
        let body = self.body.into_iter().map(to_ga).collect::<Result<Vec<_>, _>>()?;
        let mut variables = self.original_vars.clone();
        variables.extend(self.aux.iter().cloned());
        Ok(NormalizedProgram {
            init,
            body,
            original_vars: self.original_vars,
            variables,
            constants: self.constants,
            loop_guard: self.loop_guard,
        })
    }
}

fn find_path(stmts: &[WStmt], pred: fn(&WStmt) -> bool) -> Option<Vec<usize>> {
    for (i, s) in stmts.iter().enumerate() {
        if pred(s) {
            return Some(vec![i]);
        }
        if let WStmt::If { then, els, .. } = s {
            if let Some(mut p) = find_path(then, pred) {
                p.splice(0..0, [i, 0]);
                return Some(p);
            }
            if let Some(e) = els {
                if let Some(mut p) = find_path(e, pred) {
                    p.splice(0..0, [i, 1]);
                    return Some(p);
                }
            }
        }
    }
    None
}

fn locate<'a>(stmts: &'a mut Vec<WStmt>, path: &[usize]) -> Result<(&'a mut Vec<WStmt>, usize), NormalizeError> {
    let bad = || NormalizeError::NotApplicable("site does not exist".into());
    match path {
        [i] if *i < stmts.len() => Ok((stmts, *i)),
        [i, b, rest @ ..] if !rest.is_empty() => match stmts.get_mut(*i) {
            Some(WStmt::If { then, els, .. }) => {
                let inner = match b {
                    0 => then,
                    1 => els.as_mut().ok_or_else(bad)?,
                    _ => return Err(bad()),
                };
                locate(inner, rest)
            }
            _ => Err(bad()),
        },
        _ => Err(bad()),
    }
}
