//! Rewrites a parsed loop into single-assignment, guarded, straight-line normal form.

pub mod guard;
pub mod ir;
pub mod transforms;

pub use guard::{approximate_infinite_conditions, encode_guard, Approximation, AssumptionWarning};
pub use ir::{Cond, DistCall, GuardedAssignment, NormalizedProgram, Rhs};
pub use transforms::{Measure, Site, TransformKind, WorkProgram};

use crate::dsl::{AssignRhs, Expr, ProgramAst, Statement};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NormalizeError {
    #[error("{dist} has a non-constant {param} parameter that cannot be factored out")]
    NonConstantParameter { dist: String, param: String },
    #[error("transformation not applicable: {0}")]
    NotApplicable(String),
    #[error("invalid program: {0}")]
    Invalid(String),
}

/// One rewrite performed during normalization, with the measure after it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub kind: TransformKind,
    pub measure: Measure,
}

/// Applies exactly one rewrite rule, creating intermediate variables for every
/// simultaneous target.
pub fn apply_transformation(
    program: &mut WorkProgram,
    kind: TransformKind,
    site: &Site,
) -> Result<(), NormalizeError> {
    program.apply(kind, site, false)
}

fn rename_reads(s: &Statement, v: &str, by: &Expr) -> Statement {
    match s {
        Statement::Assign { targets, rhs, guard } => Statement::Assign {
            targets: targets.clone(),
            rhs: rhs.iter().map(|r| r.rename(v, by)).collect(),
            guard: guard.as_ref().map(|(c, d)| (c.rename(v, by), d.clone())),
        },
        Statement::If { branches, else_branch } => Statement::If {
            branches: branches
                .iter()
                .map(|(c, b)| (c.rename(v, by), b.iter().map(|s| rename_reads(s, v, by)).collect()))
                .collect(),
            else_branch: else_branch.as_ref().map(|b| b.iter().map(|s| rename_reads(s, v, by)).collect()),
        },
    }
}

fn assignment_count(stmts: &[Statement], v: &str) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            Statement::Assign { targets, .. } => targets.iter().filter(|t| &***t == v).count(),
            Statement::If { branches, else_branch } => {
                branches.iter().map(|(_, b)| assignment_count(b, v)).sum::<usize>()
                    + else_branch.as_deref().map_or(0, |b| assignment_count(b, v))
            }
        })
        .sum()
}

/// Substitutes variables that are set once, unconditionally, to a constant in
/// the initialization block (such as `p = 1/2`) into every later read, so they
/// can serve as distribution parameters.
pub fn inline_constants(ast: &ProgramAst) -> ProgramAst {
    let mut init = ast.init.clone();
    let mut body = ast.body.clone();
    let mut guard = ast.guard.clone();
    for v in &ast.variables {
        if assignment_count(&init, v) + assignment_count(&body, v) != 1 {
            continue;
        }
        let Some((pos, value)) = init.iter().enumerate().find_map(|(i, s)| match s {
            Statement::Assign { targets, rhs, guard: None } => {
                let k = targets.iter().position(|t| t == v)?;
                match &rhs[k] {
                    AssignRhs::Categorical(opts) if opts.len() == 1 => Some((i, opts[0].0.clone())),
                    _ => None,
                }
            }
            _ => None,
        }) else {
            continue;
        };
        let mut ids = std::collections::BTreeSet::new();
        value.identifiers(&mut ids);
        if ids.iter().any(|i| ast.is_variable(i)) {
            continue;
        }
        for s in init.iter_mut().skip(pos + 1).chain(body.iter_mut()) {
            *s = rename_reads(s, v, &value);
        }
        guard = guard.rename(v, &value);
    }
    ProgramAst::new(init, guard, body)
}

/// Replaces symbolic constants by numbers everywhere they are read.
pub fn bind_constants(ast: &ProgramAst, bindings: &std::collections::BTreeMap<crate::symbolic::Name, crate::symbolic::Rational>) -> ProgramAst {
    let mut init = ast.init.clone();
    let mut body = ast.body.clone();
    let mut guard = ast.guard.clone();
    for (name, value) in bindings {
        if ast.is_variable(name) {
            continue;
        }
        let by = Expr::Num(value.clone());
        for s in init.iter_mut().chain(body.iter_mut()) {
            *s = rename_reads(s, name, &by);
        }
        guard = guard.rename(name, &by);
    }
    ProgramAst::new(init, guard, body)
}

/// Normalizes a program and records every rewrite step.
pub fn normalize_traced(ast: &ProgramAst) -> Result<(NormalizedProgram, Vec<Step>), NormalizeError> {
    let inlined = inline_constants(ast);
    let (encoded, loop_guard) = encode_guard(&inlined);
    let mut work = WorkProgram::from_ast(&encoded)?;
    work.loop_guard = match loop_guard {
        Some(g) => Some(Cond::from_bool(&g, &|v| encoded.is_variable(v)).map_err(NormalizeError::Invalid)?),
        None => None,
    };
    let mut steps = Vec::new();
    let mut measure = work.measure();
    while let Some((kind, site)) = work.next_site() {
        work.apply(kind, &site, true)?;
        let next = work.measure();
        if next >= measure {
            return Err(NormalizeError::Invalid(format!("{kind:?} rewrite did not decrease the measure")));
        }
        measure = next;
        steps.push(Step { kind, measure });
    }
    Ok((work.finish()?, steps))
}

pub fn normalize(ast: &ProgramAst) -> Result<NormalizedProgram, NormalizeError> {
    normalize_traced(ast).map(|(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    const RUNNING: &str = include_str!("../../benchmarks/running_example.prob");

    fn lines(p: &NormalizedProgram) -> Vec<String> {
        p.body.iter().map(|a| a.to_string()).collect()
    }

    #[test]
    fn running_example_normal_form() {
        let p = normalize(&parse(RUNNING).unwrap()).unwrap();
        let body = lines(&p);
        assert_eq!(body.len(), 8, "{body:#?}");
        assert_eq!(body[0], "toggle = -toggle + 1");
        assert!(body[3].starts_with("z = z + y {1/4} z - y [toggle == 0] z") || body[3].contains("[toggle == 0] z"), "{}", body[3]);
        assert!(body[4].contains("Laplace(0, 1)"));
        assert!(body[7].ends_with("[g < 0.5] sum"), "{}", body[7]);
        assert_eq!(p.init.len(), 6);
        assert!(p.loop_guard.is_none());
    }

    #[test]
    fn literal_simultaneous_then_distribution() {
        let ast = parse("while true: x = x + 1; l, g = Laplace(x + y, 1), Normal(0, 1) end").unwrap();
        let mut w = WorkProgram::from_ast(&ast).unwrap();
        let site = Site::Statement { in_body: true, path: vec![1] };
        apply_transformation(&mut w, TransformKind::Simultaneous, &site).unwrap();
        assert_eq!(w.body.len(), 5);
        apply_transformation(&mut w, TransformKind::Distribution, &site).unwrap();
        assert_eq!(w.body.len(), 6);
        assert!(apply_transformation(&mut w, TransformKind::Else, &site).is_err());
    }

    #[test]
    fn if_else_becomes_two_guarded_assignments() {
        let ast = parse("while true: if x1 == x3: t1 = 1 else: t1 = 0 end; x1 = Bernoulli(1/2); x3 = Bernoulli(1/2) end").unwrap();
        let p = normalize(&ast).unwrap();
        let body = lines(&p);
        assert_eq!(body[0], "_t1 = 1 [x1 == x3] t1");
        assert_eq!(body[1], "t1 = 0 [not x1 == x3] _t1");
    }

    #[test]
    fn condition_on_assigned_variable_uses_copy() {
        let ast = parse("while true: if x == 0: x = 1; y = y + 1 end end").unwrap();
        let (p, steps) = normalize_traced(&ast).unwrap();
        let body = lines(&p);
        assert_eq!(body, vec!["_t1 = x", "x = 1 [x == 0] x", "y = y + 1 [_t1 == 0] y"]);
        assert!(steps.windows(2).all(|w| w[1].measure < w[0].measure));
    }

    #[test]
    fn loop_guard_is_encoded() {
        let p = normalize(&parse("x, stop = 0, 0\nwhile stop == 0: stop = Bernoulli(1/2); x = x + 1 end").unwrap()).unwrap();
        assert!(p.loop_guard.is_some());
        assert_eq!(lines(&p)[2], "x = x + 1 [_t1 == 0] x");
    }

    #[test]
    fn normal_form_is_a_fixpoint() {
        let p = normalize(&parse(RUNNING).unwrap()).unwrap();
        let again = normalize(&parse(&p.to_source()).unwrap()).unwrap();
        assert_eq!(lines(&again), lines(&p));
    }

    #[test]
    fn nonconstant_bernoulli_rejected() {
        let err = normalize(&parse("while true: x = Bernoulli(y/2); y = 1 - y end").unwrap());
        assert!(matches!(err, Err(NormalizeError::NonConstantParameter { .. })));
    }
}
