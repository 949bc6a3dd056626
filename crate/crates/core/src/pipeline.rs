//! End-to-end analysis of one program: normal form, types, dependencies,
//! recurrence systems and closed forms for requested moments.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::analysis::{self, ToolkitError};
use crate::dependency::{DependencyGraph, VarOrder, Violation};
use crate::dsl::{self, ParseError, ProgramAst};
use crate::finiteness::{self, FiniteTypes};
use crate::normalizer::{self, AssumptionWarning, Cond, NormalizeError, NormalizedProgram};
use crate::recurrence::{BuildError, Builder, RecurrenceSystem, MAX_DIM};
use crate::reduction::{Reducer, ReductionError};
use crate::solver::{self, SolveResult};
use crate::symbolic::{ExpPoly, Name, Surd, VarPolynomial};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("normalization failed: {0}")]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error("program rejected: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Rejected(Vec<Violation>),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("bad goal `{0}`: {1}")]
    Goal(String, String),
    #[error("the loop has no guard")]
    Unguarded,
    #[error("no closed form for {0}")]
    Unsolved(String),
    #[error(transparent)]
    Toolkit(#[from] ToolkitError),
}

impl AnalysisError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            AnalysisError::Parse(_) => "parse",
            AnalysisError::Normalize(_) => "normalize",
            AnalysisError::Reduction(_) => "reduction",
            AnalysisError::Rejected(_) => "rejected",
            AnalysisError::Build(_) => "build",
            AnalysisError::Goal(..) => "goal",
            AnalysisError::Unguarded => "unguarded",
            AnalysisError::Unsolved(_) => "unsolved",
            AnalysisError::Toolkit(_) => "toolkit",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    /// Replace conditions over infinite variables by symbolic Bernoulli draws.
    pub approximate: bool,
    pub cap: usize,
    pub max_dim: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { approximate: false, cap: finiteness::DEFAULT_CAP, max_dim: MAX_DIM }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproximationInfo {
    pub symbols: Vec<(Name, String)>,
    pub warnings: Vec<AssumptionWarning>,
}

pub struct Analysis {
    pub source: ProgramAst,
    pub program: NormalizedProgram,
    pub types: FiniteTypes,
    pub graph: DependencyGraph,
    pub order: VarOrder,
    pub reducer: Reducer,
    pub approximation: Option<ApproximationInfo>,
    max_dim: usize,
}

/// Moment of a variable once a guarded loop has stopped.
#[derive(Clone, Debug, Serialize)]
pub struct AfterTermination {
    pub goal: String,
    /// `E(x_n^k [not guard])`
    pub numerator: ExpPoly,
    /// `E([not guard])`
    pub denominator: ExpPoly,
    pub limit: Surd,
}

/// A solved moment.
#[derive(Clone, Debug, Serialize)]
pub struct Moment {
    pub goal: String,
    pub system: RecurrenceSystem,
    pub solution: SolveResult,
    pub closed_form: Option<ExpPoly>,
}

fn prepare(ast: &ProgramAst, cap: usize) -> Result<(NormalizedProgram, FiniteTypes), AnalysisError> {
    let program = normalizer::normalize(ast)?;
    let types = finiteness::infer_with_cap(&program, cap);
    Ok((program, types))
}

impl Analysis {
    pub fn from_source(src: &str, opts: &Options) -> Result<Analysis, AnalysisError> {
        Analysis::new(&dsl::parse(src)?, opts)
    }

    pub fn new(ast: &ProgramAst, opts: &Options) -> Result<Analysis, AnalysisError> {
        let (mut program, mut types) = prepare(ast, opts.cap)?;
        let mut source = ast.clone();
        let mut approximation = None;
        if opts.approximate {
            let approx = normalizer::approximate_infinite_conditions(ast, &|v| types.is_finite(v));
            if !approx.symbols.is_empty() {
                (program, types) = prepare(&approx.program, opts.cap)?;
                source = approx.program;
                approximation = Some(ApproximationInfo { symbols: approx.symbols, warnings: approx.warnings });
            }
        }
        let graph = DependencyGraph::build(&program, &types);
        let order = graph.var_order();
        let reducer = Reducer::new(&types)?;
        Ok(Analysis { source, program, types, graph, order, reducer, approximation, max_dim: opts.max_dim })
    }

    /// Computability violations, restricted to what the given variables depend on.
    pub fn check(&self, vars: Option<&BTreeSet<Name>>) -> Vec<Violation> {
        match vars {
            Some(v) => {
                let cone = self.graph.cone(v.iter());
                self.graph.violations(&self.program, Some(&cone))
            }
            None => self.graph.violations(&self.program, None),
        }
    }

    /// Parses `E(expr)` or a bare polynomial over program variables.
    pub fn goal(&self, text: &str) -> Result<VarPolynomial, AnalysisError> {
        let t = text.trim();
        let inner = t
            .strip_prefix("E(")
            .and_then(|r| r.strip_suffix(')'))
            .unwrap_or(t);
        let expr = dsl::parse_expr(inner).map_err(|e| AnalysisError::Goal(text.into(), e.to_string()))?;
        let poly = expr
            .to_poly(&|v| self.program.is_variable(v))
            .map_err(|e| AnalysisError::Goal(text.into(), e))?;
        if poly.vars().is_empty() {
            return Err(AnalysisError::Goal(text.into(), "mentions no program variable".into()));
        }
        Ok(poly)
    }

    pub fn system(&self, goal: &VarPolynomial) -> Result<RecurrenceSystem, AnalysisError> {
        let vars: BTreeSet<Name> = goal.vars().into_iter().collect();
        let violations = self.check(Some(&vars));
        if !violations.is_empty() {
            return Err(AnalysisError::Rejected(violations));
        }
        let mut b = Builder::new(&self.program, &self.reducer, &self.order)?;
        b.max_dim = self.max_dim;
        Ok(b.build(goal)?)
    }

    pub fn moment_of(&self, label: &str, goal: &VarPolynomial) -> Result<Moment, AnalysisError> {
        let system = self.system(goal)?;
        let solution = solver::solve(&system);
        let closed_form = solution.goal(&system);
        Ok(Moment { goal: label.to_string(), system, solution, closed_form })
    }

    pub fn moment(&self, goal: &str) -> Result<Moment, AnalysisError> {
        let poly = self.goal(goal)?;
        self.moment_of(goal, &poly)
    }

    /// Raw moments `E(x^0) .. E(x^k)`; `None` where no closed form was found.
    pub fn raw_moments(&self, var: &str, k: u32) -> Result<Vec<Moment>, AnalysisError> {
        if !self.program.is_variable(var) {
            return Err(AnalysisError::Goal(var.into(), "unknown variable".into()));
        }
        let mut out = Vec::new();
        for j in 0..=k {
            let poly = VarPolynomial::var(var).pow(j);
            let label = format!("E({var}^{j})");
            if j == 0 {
                let system = RecurrenceSystem {
                    monomials: vec![crate::symbolic::Monomial::one()],
                    rows: vec![[(0, crate::symbolic::ConstExpr::one())].into()],
                    initials: vec![crate::symbolic::ConstExpr::one()],
                    goal: vec![(0, crate::symbolic::ConstExpr::one())],
                };
                let solution = solver::solve(&system);
                let closed_form = solution.goal(&system);
                out.push(Moment { goal: label, system, solution, closed_form });
            } else {
                out.push(self.moment_of(&label, &poly)?);
            }
        }
        Ok(out)
    }

    /// `[not guard]` as a polynomial, for after-termination moments.
    pub fn stopped_indicator(&self) -> Result<VarPolynomial, AnalysisError> {
        let g = self.program.loop_guard.as_ref().ok_or(AnalysisError::Unguarded)?;
        let violations: Vec<Violation> = g
            .vars()
            .into_iter()
            .filter(|v| !self.types.is_finite(v))
            .map(|v| Violation::InfiniteCondition { variable: v, guarded: "loop".into(), condition: g.to_string() })
            .collect();
        if !violations.is_empty() {
            return Err(AnalysisError::Rejected(violations));
        }
        Ok(self.reducer.indicator(&Cond::negate(g.clone()))?)
    }
}

impl Moment {
    pub fn closed(&self) -> Result<&ExpPoly, AnalysisError> {
        self.closed_form.as_ref().ok_or_else(|| {
            let reasons: Vec<String> = self
                .solution
                .failures
                .iter()
                .filter(|f| f.reason != crate::solver::SolveFailure::DependsOnUnsolved)
                .map(|f| format!("[{}]: {}", f.monomials.join(", "), f.reason))
                .collect();
            AnalysisError::Unsolved(format!("{} ({})", self.goal, reasons.join("; ")))
        })
    }
}

impl Analysis {
    /// `lim E(x_n^k | not guard)` for a guarded loop.
    pub fn after_termination(&self, var: &str, k: u32) -> Result<AfterTermination, AnalysisError> {
        if !self.program.is_variable(var) {
            return Err(AnalysisError::Goal(var.into(), "unknown variable".into()));
        }
        let stopped = self.stopped_indicator()?;
        let num_goal = self.reducer.reduce(&VarPolynomial::var(var).pow(k).mul(&stopped));
        let label = format!("E({var}^{k} | stopped)");
        let numerator = if num_goal.as_constant().is_some() {
            constant_form(&num_goal)
        } else {
            self.moment_of(&label, &num_goal)?.closed()?.clone()
        };
        let denominator = if stopped.as_constant().is_some() {
            constant_form(&stopped)
        } else {
            self.moment_of("E(stopped)", &stopped)?.closed()?.clone()
        };
        let limit = analysis::limit_of_ratio(&numerator, &denominator)?;
        Ok(AfterTermination { goal: label, numerator, denominator, limit })
    }
}

fn constant_form(p: &VarPolynomial) -> ExpPoly {
    match p.as_constant() {
        Some(c) if !c.is_zero() => ExpPoly::constant(Surd::from_const(c)),
        _ => ExpPoly::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_infinite_condition_unless_approximated() {
        let src = include_str!("../benchmarks/running_example.prob");
        let a = Analysis::from_source(src, &Options::default()).unwrap();
        assert!(matches!(a.moment("E(sum)"), Err(AnalysisError::Rejected(_))));
        assert!(a.moment("E(z)").is_ok());
        let opts = Options { approximate: true, ..Options::default() };
        let a = Analysis::from_source(src, &opts).unwrap();
        let m = a.moment("E(sum)").unwrap();
        let cf = m.closed_form.unwrap();
        assert!(cf.symbols().iter().any(|s| s.starts_with("p_")), "{cf}");
    }

    #[test]
    fn geometric_after_termination() {
        let a = Analysis::from_source(include_str!("../benchmarks/geometric.prob"), &Options::default()).unwrap();
        let t = a.after_termination("x", 1).unwrap();
        assert_eq!(t.limit, Surd::int(2));
        assert_eq!(t.denominator.to_string(), "1 - 2^(-n)");
        assert_eq!(t.numerator.to_string(), "2 + (-2 - n)*2^(-n)");
    }

    #[test]
    fn herman_moments() {
        let a = Analysis::from_source(include_str!("../benchmarks/herman3.prob"), &Options::default()).unwrap();
        for (k, c) in [(1, 2), (2, 8), (3, 26)] {
            let m = a.moment(&format!("E(tokens^{k})")).unwrap();
            assert_eq!(m.closed().unwrap().to_string(), format!("1 + {c}*4^(-n)"));
        }
    }

    #[test]
    fn goal_syntax() {
        let a = Analysis::from_source("x, stop = 0, 0\nwhile stop == 0: stop = Bernoulli(1/2); x = x + 1 end", &Options::default()).unwrap();
        assert!(a.goal("E(x^2)").is_ok());
        assert!(a.goal("E(x*stop)").is_ok());
        assert!(a.goal("E(3)").is_err());
        assert!(a.goal("E(x^").is_err());
    }
}
