//! Command-line driver: one subcommand per pipeline stage or derived result.
//!
//! Every subcommand renders either human-readable text or a JSON report with
//! the tool version, a SHA-256 of the program text and the request options.
//! Exit status is 0 on success, 1 when the analysis rejects or cannot finish,
//! and 2 on usage errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::analysis::{self, ToolkitError};
use crate::dsl::{self, ProgramAst};
use crate::normalizer;
use crate::oracle::{exact, float_bindings, sampler, OracleError};
use crate::pipeline::{Analysis, AnalysisError, Moment, Options};
use crate::symbolic::{ConstExpr, ExpPoly, Name, Rational, Surd, VarPolynomial};

/// Digits after the decimal point when rendering numeric values.
pub const PRECISION_VAR: &str = "MOMENT_FORGE_PRECISION";
const DEFAULT_PRECISION: usize = 30;

#[derive(Parser, Debug)]
#[command(name = "moment-forge", version, about = "Exact closed-form moments of probabilistic loops")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Program file in the loop language.
    program: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Omit the timestamp and timings so identical requests give identical bytes.
    #[arg(long)]
    deterministic: bool,
    /// Replace if-conditions over non-finite variables by fresh Bernoulli draws.
    #[arg(long)]
    approximate: bool,
    /// Numeric value for a symbolic constant, as `NAME=RATIONAL`.
    #[arg(long = "bind", value_name = "NAME=RAT", value_parser = parse_binding)]
    bind: Vec<(String, Rational)>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed forms of moments such as `E(x^2)` or `E(x*y)`.
    Moments {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true)]
        goal: Vec<String>,
        /// Also evaluate at this iteration.
        #[arg(long)]
        at: Option<u64>,
    },
    /// The linear recurrence system built for each goal.
    System {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true)]
        goal: Vec<String>,
    },
    /// The normal form of the loop.
    Normalize {
        #[command(flatten)]
        common: Common,
    },
    /// Moment-computability verdict with witnesses.
    Check {
        #[command(flatten)]
        common: Common,
        /// Restrict the check to what these goals depend on.
        #[arg(long)]
        goal: Vec<String>,
        /// Include the inferred value sets.
        #[arg(long)]
        types: bool,
    },
    /// Probabilities of each support point, recovered from moments.
    Distribution {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        var: String,
        /// Comma-separated support; defaults to the inferred value set.
        #[arg(long, value_delimiter = ',')]
        support: Vec<String>,
        #[arg(long)]
        at: Option<u64>,
    },
    /// Markov upper and Paley-Zygmund lower bounds on tail probabilities.
    Tails {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        var: String,
        /// Markov bound on `P(var >= T)`.
        #[arg(long, value_name = "T")]
        threshold: Option<String>,
        /// Highest moment used by the Markov bound.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Paley-Zygmund bound on `P(var > T)`.
        #[arg(long, value_name = "T")]
        pz_threshold: Option<String>,
        #[arg(long)]
        at: Option<u64>,
    },
    /// Central moments up to order k.
    Central {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        var: String,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long)]
        at: Option<u64>,
    },
    /// Moment of a variable once the loop guard has become false.
    AfterTermination {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        var: String,
        #[arg(long, default_value_t = 1)]
        k: u32,
    },
    /// Gram-Charlier A series coefficients at a fixed iteration.
    GramCharlier {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        var: String,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long)]
        at: u64,
    },
    /// Exact value of moments at one iteration.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true)]
        goal: Vec<String>,
        #[arg(long)]
        at: u64,
    },
    /// Seeded Monte Carlo estimate with a 95% confidence interval.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true)]
        goal: Vec<String>,
        #[arg(long)]
        at: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact distribution after some iterations, for discrete programs.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        goal: Vec<String>,
        #[arg(long)]
        at: usize,
        /// Largest number of distinct states kept.
        #[arg(long, default_value_t = exact::DEFAULT_STATE_CAP)]
        cap: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Moments { .. } => "moments",
            Command::System { .. } => "system",
            Command::Normalize { .. } => "normalize",
            Command::Check { .. } => "check",
            Command::Distribution { .. } => "distribution",
            Command::Tails { .. } => "tails",
            Command::Central { .. } => "central",
            Command::AfterTermination { .. } => "after-termination",
            Command::GramCharlier { .. } => "gram-charlier",
            Command::Eval { .. } => "eval",
            Command::Sample { .. } => "sample",
            Command::Enumerate { .. } => "enumerate",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Moments { common, .. }
            | Command::System { common, .. }
            | Command::Normalize { common }
            | Command::Check { common, .. }
            | Command::Distribution { common, .. }
            | Command::Tails { common, .. }
            | Command::Central { common, .. }
            | Command::AfterTermination { common, .. }
            | Command::GramCharlier { common, .. }
            | Command::Eval { common, .. }
            | Command::Sample { common, .. }
            | Command::Enumerate { common, .. } => common,
        }
    }

    /// Request options echoed in JSON reports.
    fn options(&self) -> Value {
        let c = self.common();
        let bind: BTreeMap<&str, String> = c.bind.iter().map(|(k, v)| (k.as_str(), v.to_string())).collect();
        let mut o = json!({ "approximate": c.approximate, "bind": bind });
        let extra = match self {
            Command::Moments { goal, at, .. } => json!({ "goals": goal, "at": at }),
            Command::System { goal, .. } => json!({ "goals": goal }),
            Command::Normalize { .. } => json!({}),
            Command::Check { goal, types, .. } => json!({ "goals": goal, "types": types }),
            Command::Distribution { var, support, at, .. } => json!({ "var": var, "support": support, "at": at }),
            Command::Tails { var, threshold, k, pz_threshold, at, .. } => {
                json!({ "var": var, "threshold": threshold, "k": k, "pz_threshold": pz_threshold, "at": at })
            }
            Command::Central { var, k, at, .. } => json!({ "var": var, "k": k, "at": at }),
            Command::AfterTermination { var, k, .. } => json!({ "var": var, "k": k }),
            Command::GramCharlier { var, order, at, .. } => json!({ "var": var, "order": order, "at": at }),
            Command::Eval { goal, at, .. } => json!({ "goals": goal, "at": at }),
            Command::Sample { goal, at, samples, seed, .. } => {
                json!({ "goals": goal, "at": at, "samples": samples, "seed": seed })
            }
            Command::Enumerate { goal, at, cap, .. } => json!({ "goals": goal, "at": at, "cap": cap }),
        };
        if let (Value::Object(o), Value::Object(e)) = (&mut o, extra) {
            o.extend(e);
        }
        o
    }
}

fn parse_binding(s: &str) -> Result<(String, Rational), String> {
    let (name, value) = s.split_once('=').ok_or("expected NAME=RATIONAL")?;
    let value: Rational = value.trim().parse().map_err(|_| format!("`{value}` is not a rational number"))?;
    Ok((name.trim().to_string(), value))
}

/// Why a request failed, with a stable code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Toolkit(#[from] ToolkitError),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Analysis(e) => e.code(),
            CliError::Oracle(_) => "oracle",
            CliError::Toolkit(_) => "toolkit",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn witness(&self) -> Vec<String> {
        match self {
            CliError::Analysis(AnalysisError::Rejected(v)) => v.iter().map(ToString::to_string).collect(),
            _ => Vec::new(),
        }
    }
}

impl From<crate::symbolic::SymbolicError> for CliError {
    fn from(e: crate::symbolic::SymbolicError) -> Self {
        CliError::Toolkit(e.into())
    }
}

/// What a run printed and how it ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// A successful result in both renderings.
struct Report {
    json: Value,
    text: String,
    /// Exit status for results that are verdicts rather than failures.
    code: i32,
}

impl Report {
    fn ok(json: Value, text: String) -> Report {
        Report { json, text, code: 0 }
    }
}

struct Ctx {
    ast: ProgramAst,
    bindings: BTreeMap<Name, Rational>,
    options: Options,
    precision: usize,
}

impl Ctx {
    fn analysis(&self) -> Result<Analysis, CliError> {
        Ok(Analysis::new(&self.ast, &self.options)?)
    }

    fn bind(&self, f: &ExpPoly) -> Result<ExpPoly, CliError> {
        if self.bindings.is_empty() {
            Ok(f.clone())
        } else {
            Ok(f.bind(&self.bindings)?)
        }
    }

    fn bind_const(&self, c: &ConstExpr) -> ConstExpr {
        if self.bindings.is_empty() {
            c.clone()
        } else {
            Surd::from_const(c.clone()).bind(&self.bindings).as_const().cloned().unwrap_or_else(|| c.clone())
        }
    }

    /// Exact value with a decimal rendering when it is numeric.
    fn value(&self, v: &Surd) -> Value {
        json!({ "exact": v.to_string(), "decimal": v.to_decimal(self.precision) })
    }

    fn value_text(&self, v: &Surd) -> String {
        match v.to_decimal(self.precision) {
            Some(d) if v.as_rational().is_none_or(|r| !r.is_integer()) => format!("{v} ~ {d}"),
            _ => v.to_string(),
        }
    }

    fn constant(&self, text: &str) -> Result<ConstExpr, CliError> {
        let e = dsl::parse_expr(text).map_err(|e| CliError::Usage(format!("`{text}`: {e}")))?;
        let p = e.to_poly(&|_| false).map_err(|e| CliError::Usage(format!("`{text}`: {e}")))?;
        let c = p.as_constant().ok_or_else(|| CliError::Usage(format!("`{text}` is not a constant")))?;
        Ok(self.bind_const(&c))
    }

    /// A goal over the source program's variables, without running the analysis.
    fn source_goal(&self, text: &str) -> Result<VarPolynomial, CliError> {
        let t = text.trim();
        let inner = t.strip_prefix("E(").and_then(|r| r.strip_suffix(')')).unwrap_or(t);
        let e = dsl::parse_expr(inner).map_err(|e| CliError::Usage(format!("bad goal `{text}`: {e}")))?;
        e.to_poly(&|v| self.ast.is_variable(v)).map_err(|e| CliError::Usage(format!("bad goal `{text}`: {e}")))
    }
}

/// Goal errors are usage errors; everything else is an analysis failure.
fn goal_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::Goal(g, m) => CliError::Usage(format!("bad goal `{g}`: {m}")),
        other => CliError::Analysis(other),
    }
}

fn closed(ctx: &Ctx, m: &Moment) -> Result<ExpPoly, CliError> {
    ctx.bind(m.closed()?)
}

fn raw_closed(ctx: &Ctx, a: &Analysis, var: &str, k: u32) -> Result<Vec<ExpPoly>, CliError> {
    a.raw_moments(var, k).map_err(goal_error)?.iter().map(|m| closed(ctx, m)).collect()
}

fn moments(ctx: &Ctx, goals: &[String], at: Option<u64>) -> Result<Report, CliError> {
    let a = ctx.analysis()?;
    let mut items = Vec::new();
    let mut text = String::new();
    for g in goals {
        let poly = a.goal(g).map_err(goal_error)?;
        let m = a.moment_of(g, &poly)?;
        let f = closed(ctx, &m)?;
        let mut item = json!({
            "goal": g,
            "closed_form": f.to_string(),
            "structured": f,
            "dimension": m.system.dim(),
        });
        writeln!(text, "{g} = {f}").unwrap();
        if let Some(n) = at {
            let v = f.eval(n);
            item["at"] = json!({ "n": n, "value": ctx.value(&v) });
            writeln!(text, "  at n = {n}: {}", ctx.value_text(&v)).unwrap();
        }
        items.push(item);
    }
    Ok(Report::ok(json!({ "moments": items, "approximation": a.approximation }), text))
}

fn system(ctx: &Ctx, goals: &[String]) -> Result<Report, CliError> {
    let a = ctx.analysis()?;
    let mut items = Vec::new();
    let mut text = String::new();
    for g in goals {
        let poly = a.goal(g).map_err(goal_error)?;
        let s = a.system(&poly)?;
        let names: Vec<String> = s.monomials.iter().map(ToString::to_string).collect();
        let matrix: Vec<Vec<String>> = s.matrix().iter().map(|r| r.iter().map(ToString::to_string).collect()).collect();
        let goal_comb: Vec<Value> =
            s.goal.iter().map(|(i, c)| json!({ "monomial": names[*i], "coefficient": c.to_string() })).collect();
        items.push(json!({
            "goal": g,
            "dimension": s.dim(),
            "monomials": names,
            "matrix": matrix,
            "initials": s.initials.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "goal_combination": goal_comb,
        }));
        writeln!(text, "{g}: {} monomials", s.dim()).unwrap();
        for (i, row) in s.rows.iter().enumerate() {
            let rhs: Vec<String> = row
                .iter()
                .map(|(j, c)| {
                    let c = c.to_string();
                    if c.contains(' ') { format!("({c})*E({})", names[*j]) } else { format!("{c}*E({})", names[*j]) }
                })
                .collect();
            let rhs = if rhs.is_empty() { "0".to_string() } else { rhs.join(" + ") };
            writeln!(text, "  E({})' = {rhs}    [initial {}]", names[i], s.initials[i]).unwrap();
        }
    }
    Ok(Report::ok(json!({ "systems": items }), text))
}

fn normalize(ctx: &Ctx) -> Result<Report, CliError> {
    let a = ctx.analysis()?;
    let src = a.program.to_source();
    Ok(Report::ok(json!({ "normalized": src, "approximation": a.approximation }), src))
}

fn check(ctx: &Ctx, goals: &[String], types: bool) -> Result<Report, CliError> {
    let a = ctx.analysis()?;
    let scope = if goals.is_empty() {
        None
    } else {
        let mut vars = BTreeSet::new();
        for g in goals {
            vars.extend(a.goal(g).map_err(goal_error)?.vars());
        }
        Some(vars)
    };
    let violations = a.check(scope.as_ref());
    let verdict = if violations.is_empty() { "moment-computable" } else { "rejected" };
    let witness: Vec<String> = violations.iter().map(ToString::to_string).collect();
    let mut json = json!({ "verdict": verdict, "witness": witness, "violations": violations });
    let mut text = format!("{verdict}\n");
    for w in &witness {
        writeln!(text, "  {w}").unwrap();
    }
    if types {
        json["types"] = serde_json::to_value(&a.types).unwrap();
        for (v, s) in &a.types.sets {
            let shown = match s.values() {
                Some(vals) => format!("{{{}}}", vals.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")),
                None => "infinite".to_string(),
            };
            writeln!(text, "  {v}: {shown}").unwrap();
        }
    }
    Ok(Report { json, text, code: if violations.is_empty() { 0 } else { 1 } })
}

fn distribution(ctx: &Ctx, var: &str, support: &[String], at: Option<u64>) -> Result<Report, CliError> {
    let a = ctx.analysis()?;
    let support: Vec<ConstExpr> = if support.is_empty() {
        let set = a
            .types
            .sets
            .get(var)
            .ok_or_else(|| CliError::Usage(format!("unknown variable `{var}`")))?
            .values()
            .ok_or_else(|| CliError::Usage(format!("`{var}` is not finite-valued; pass --support")))?;
        set.iter().map(|c| ctx.bind_const(c)).collect()
    } else {
        support.iter().map(|s| ctx.constant(s)).collect::<Result<_, _>>()?
    };
    if support.is_empty() {
        return Err(CliError::Usage("empty support".into()));
    }
    let raw = raw_closed(ctx, &a, var, support.len() as u32 - 1)?;
    let d = analysis::recover_distribution(&support, &raw)?;
    let mut rows = Vec::new();
    let mut text = String::new();
    for (s, p) in d.support.iter().zip(&d.probabilities) {
        let mut row = json!({ "value": s.to_string(), "probability": p.to_string() });
        write!(text, "P({var} = {s}) = {p}").unwrap();
        if let Some(n) = at {
            let v = p.eval(n);
            row["at"] = ctx.value(&v);
            write!(text, "    [n = {n}: {}]", ctx.value_text(&v)).unwrap();
        }
        text.push('\n');
        rows.push(row);
    }
    Ok(Report::ok(json!({ "var": var, "distribution": rows, "at": at }), text))
}

fn tails(
    ctx: &Ctx,
    var: &str,
    threshold: Option<&str>,
    k: usize,
    pz: Option<&str>,
    at: Option<u64>,
) -> Result<Report, CliError> {
    if threshold.is_none() && pz.is_none() {
        return Err(CliError::Usage("give --threshold, --pz-threshold or both".into()));
    }
    let a = ctx.analysis()?;
    let need = if pz.is_some() { k.max(2) } else { k };
    let raw = raw_closed(ctx, &a, var, need as u32)?;
    let mut text = String::new();
    let mut json = json!({ "var": var });
    let eval = |f: &ExpPoly, text: &mut String| -> Option<Value> {
        let n = at?;
        let v = f.eval(n);
        write!(text, "    [n = {n}: {}]", ctx.value_text(&v)).unwrap();
        Some(ctx.value(&v))
    };
    if let Some(t) = threshold {
        let tc = ctx.constant(t)?;
        let mut bounds = Vec::new();
        for j in 1..=k {
            let b = analysis::markov_bound(&raw, &tc, j)?;
            write!(text, "P({var} >= {tc}) <= {b}    (Markov, k = {j})").unwrap();
            let v = eval(&b, &mut text);
            text.push('\n');
            bounds.push(json!({ "k": j, "bound": b.to_string(), "at": v }));
        }
        json["markov"] = json!({ "threshold": tc.to_string(), "bounds": bounds });
    }
    if let Some(t) = pz {
        let tc = ctx.constant(t)?;
        let r = analysis::paley_zygmund(&raw[1], &raw[2], &tc)?;
        write!(text, "P({var} > {tc}) >= {r}    (Paley-Zygmund)").unwrap();
        let v = match at {
            Some(n) => {
                let v = r.eval(n)?;
                write!(text, "    [n = {n}: {}]", ctx.value_text(&v)).unwrap();
                Some(ctx.value(&v))
            }
            None => None,
        };
        text.push('\n');
        json["paley_zygmund"] = json!({
            "threshold": tc.to_string(),
            "bound": r.to_string(),
            "numerator": r.numerator.to_string(),
            "denominator": r.denominator.to_string(),
            "at": v,
        });
    }
    Ok(Report::ok(json, text))
}

fn central(ctx: &Ctx, var: &str, k: u32, at: Option<u64>) -> Result<Report, CliError> {
    let a = ctx.analysis()?;
    let raw = raw_closed(ctx, &a, var, k)?;
    let central = analysis::central_moments(&raw)?;
    let mut rows = Vec::new();
    let mut text = String::new();
    for (j, c) in central.iter().enumerate().skip(2) {
        let mut row = json!({ "k": j, "closed_form": c.to_string() });
        write!(text, "E(({var} - E({var}))^{j}) = {c}").unwrap();
        if let Some(n) = at {
            let v = c.eval(n);
            row["at"] = ctx.value(&v);
            write!(text, "    [n = {n}: {}]", ctx.value_text(&v)).unwrap();
        }
        text.push('\n');
        rows.push(row);
    }
    Ok(Report::ok(json!({ "var": var, "central": rows }), text))
}

fn after_termination(ctx: &Ctx, var: &str, k: u32) -> Result<Report, CliError> {
    let a = ctx.analysis()?;
    let t = a.after_termination(var, k).map_err(goal_error)?;
    let num = ctx.bind(&t.numerator)?;
    let den = ctx.bind(&t.denominator)?;
    let limit = if ctx.bindings.is_empty() { t.limit.clone() } else { analysis::limit_of_ratio(&num, &den)? };
    let text = format!(
        "E({var}^{k} [stopped]) = {num}\nP(stopped) = {den}\nE({var}^{k} after termination) = {}\n",
        ctx.value_text(&limit)
    );
    Ok(Report::ok(
        json!({
            "var": var,
            "k": k,
            "numerator": num.to_string(),
            "denominator": den.to_string(),
            "limit": ctx.value(&limit),
        }),
        text,
    ))
}

fn gram_charlier(ctx: &Ctx, var: &str, order: usize, at: u64) -> Result<Report, CliError> {
    let a = ctx.analysis()?;
    let raw = raw_closed(ctx, &a, var, order as u32)?;
    let numeric: Vec<f64> = raw
        .iter()
        .map(|m| {
            m.eval(at)
                .to_f64()
                .ok_or_else(|| CliError::Usage(format!("moment of `{var}` is symbolic at n = {at}; bind its constants")))
        })
        .collect::<Result<_, _>>()?;
    let g = analysis::gram_charlier(&numeric, order)?;
    let mut text = format!("mean = {}\nsd = {}\n", g.mean, g.sd);
    for (j, c) in g.coeffs.iter().enumerate() {
        writeln!(text, "c{j} = {c}").unwrap();
    }
    Ok(Report::ok(
        json!({ "var": var, "n": at, "order": order, "mean": g.mean, "sd": g.sd, "coefficients": g.coeffs }),
        text,
    ))
}

fn eval(ctx: &Ctx, goals: &[String], at: u64) -> Result<Report, CliError> {
    let a = ctx.analysis()?;
    let mut items = Vec::new();
    let mut text = String::new();
    for g in goals {
        let poly = a.goal(g).map_err(goal_error)?;
        let m = a.moment_of(g, &poly)?;
        // Without a closed form the system itself still gives exact values.
        let (v, method) = match &m.closed_form {
            Some(f) => (ctx.bind(f)?.eval(at), "closed-form"),
            None => {
                let v = m.system.goal_value(&m.system.forward_eval(at as usize));
                (Surd::from_const(ctx.bind_const(&v)), "forward")
            }
        };
        writeln!(text, "{g} at n = {at}: {}", ctx.value_text(&v)).unwrap();
        items.push(json!({ "goal": g, "n": at, "value": ctx.value(&v), "method": method }));
    }
    Ok(Report::ok(json!({ "values": items }), text))
}

fn sample(ctx: &Ctx, goals: &[String], at: usize, samples: usize, seed: u64) -> Result<Report, CliError> {
    let bindings = float_bindings(&ctx.bindings);
    let mut items = Vec::new();
    let mut text = String::new();
    for g in goals {
        let f = ctx.source_goal(g)?;
        let e = sampler::estimate_moment(&ctx.ast, &f, at, samples, seed, &bindings)?;
        writeln!(
            text,
            "{g} at n = {at}: {} +- {}  ({} samples, seed {})",
            e.mean, e.halfwidth, e.samples, e.seed
        )
        .unwrap();
        items.push(json!({
            "goal": g,
            "n": at,
            "mean": e.mean,
            "halfwidth": e.halfwidth,
            "ci": [e.mean - e.halfwidth, e.mean + e.halfwidth],
            "samples": e.samples,
            "seed": e.seed,
            "generator": e.generator,
        }));
    }
    Ok(Report::ok(json!({ "estimates": items }), text))
}

fn enumerate(ctx: &Ctx, goals: &[String], at: usize, cap: usize) -> Result<Report, CliError> {
    let d = exact::enumerate(&ctx.ast, at, &ctx.bindings, cap)?;
    let mut text = String::new();
    let mut json = json!({ "n": at, "states": d.states.len(), "total": d.total().to_string() });
    if goals.is_empty() {
        let mut rows = Vec::new();
        for (state, p) in &d.states {
            let vals: BTreeMap<&str, String> = d
                .variables
                .iter()
                .zip(state)
                .filter_map(|(v, x)| x.as_ref().map(|x| (v.as_ref(), x.to_string())))
                .collect();
            let shown: Vec<String> = vals.iter().map(|(v, x)| format!("{v}={x}")).collect();
            writeln!(text, "{p}: {}", shown.join(" ")).unwrap();
            rows.push(json!({ "probability": p.to_string(), "state": vals }));
        }
        json["distribution"] = Value::Array(rows);
    } else {
        let mut items = Vec::new();
        for g in goals {
            let f = ctx.source_goal(g)?;
            let v = Surd::rational(d.expect(&f)?);
            writeln!(text, "{g} at n = {at}: {}", ctx.value_text(&v)).unwrap();
            items.push(json!({ "goal": g, "value": ctx.value(&v) }));
        }
        json["moments"] = Value::Array(items);
    }
    Ok(Report::ok(json, text))
}

fn dispatch(cmd: &Command, ctx: &Ctx) -> Result<Report, CliError> {
    match cmd {
        Command::Moments { goal, at, .. } => moments(ctx, goal, *at),
        Command::System { goal, .. } => system(ctx, goal),
        Command::Normalize { .. } => normalize(ctx),
        Command::Check { goal, types, .. } => check(ctx, goal, *types),
        Command::Distribution { var, support, at, .. } => distribution(ctx, var, support, *at),
        Command::Tails { var, threshold, k, pz_threshold, at, .. } => {
            tails(ctx, var, threshold.as_deref(), *k, pz_threshold.as_deref(), *at)
        }
        Command::Central { var, k, at, .. } => central(ctx, var, *k, *at),
        Command::AfterTermination { var, k, .. } => after_termination(ctx, var, *k),
        Command::GramCharlier { var, order, at, .. } => gram_charlier(ctx, var, *order, *at),
        Command::Eval { goal, at, .. } => eval(ctx, goal, *at),
        Command::Sample { goal, at, samples, seed, .. } => sample(ctx, goal, *at, *samples, *seed),
        Command::Enumerate { goal, at, cap, .. } => enumerate(ctx, goal, *at, *cap),
    }
}

fn precision() -> usize {
    std::env::var(PRECISION_VAR).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_PRECISION)
}

/// Parses arguments (the first is the program name) and runs one request.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: 2, stdout: String::new(), stderr: rendered }
            } else {
                Outcome { code: 0, stdout: rendered, stderr: String::new() }
            };
        }
    };
    let cmd = &cli.command;
    let common = cmd.common();
    let started = Instant::now();
    let source = std::fs::read_to_string(&common.program);
    let hash = source.as_ref().ok().map(|s| format!("{:x}", Sha256::digest(s.as_bytes())));
    let result = source
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", common.program.display())))
        .and_then(|src| dsl::parse(&src).map_err(|e| CliError::Analysis(e.into())))
        .and_then(|ast| {
            let bindings: BTreeMap<Name, Rational> =
                common.bind.iter().map(|(k, v)| (Name::from(k.as_str()), v.clone())).collect();
            let ctx = Ctx {
                ast: normalizer::bind_constants(&ast, &bindings),
                bindings,
                options: Options { approximate: common.approximate, ..Options::default() },
                precision: precision(),
            };
            dispatch(cmd, &ctx)
        });

    let mut envelope = json!({
        "tool": "moment-forge",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd.name(),
        "program": { "path": common.program.display().to_string(), "sha256": hash },
        "provenance": { "options": cmd.options(), "precision": precision() },
    });
    if !common.deterministic {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        envelope["timestamp"] = json!(now);
        envelope["elapsed_ms"] = json!(started.elapsed().as_millis() as u64);
    }
    let (code, body) = match &result {
        Ok(r) => {
            envelope["status"] = json!(if r.code == 0 { "ok" } else { "rejected" });
            envelope["result"] = r.json.clone();
            (r.code, r.text.clone())
        }
        Err(e) => {
            envelope["status"] = json!("error");
            envelope["error"] = json!({ "code": e.code(), "message": e.to_string(), "witness": e.witness() });
            (e.exit_code(), String::new())
        }
    };
    match common.format {
        Format::Json => Outcome {
            code,
            stdout: format!("{}\n", serde_json::to_string_pretty(&envelope).unwrap()),
            stderr: String::new(),
        },
        Format::Text => {
            let stderr = match &result {
                Err(e) => {
                    let mut s = format!("error[{}]: {e}\n", e.code());
                    for w in e.witness() {
                        writeln!(s, "  witness: {w}").unwrap();
                    }
                    s
                }
                Ok(_) => String::new(),
            };
            Outcome { code, stdout: body, stderr }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench(name: &str) -> String {
        format!("{}/benchmarks/{name}", env!("CARGO_MANIFEST_DIR"))
    }

    #[test]
    fn herman_eval_at_four() {
        let o = run(["moment-forge", "eval", &bench("herman3.prob"), "--goal", "E(tokens^3)", "--at", "4"]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        assert!(o.stdout.contains("141/128"), "{}", o.stdout);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["moment-forge", "moments"]).code, 2);
        assert_eq!(run(["moment-forge", "bogus"]).code, 2);
        assert_eq!(run(["moment-forge", "eval", "/nonexistent.prob", "--goal", "E(x)", "--at", "1"]).code, 2);
        let o = run(["moment-forge", "eval", &bench("herman3.prob"), "--goal", "E(nope)", "--at", "1"]);
        assert_eq!(o.code, 2, "{o:?}");
    }

    #[test]
    fn deterministic_json_is_stable() {
        let args = ["moment-forge", "moments", &bench("geometric.prob"), "--goal", "E(x)", "--format", "json", "--deterministic"];
        let a = run(args);
        let b = run(args);
        assert_eq!(a, b);
        let v: Value = serde_json::from_str(&a.stdout).unwrap();
        assert!(v.get("timestamp").is_none());
        assert_eq!(v["program"]["sha256"].as_str().unwrap().len(), 64);
        assert_eq!(v["provenance"]["options"]["goals"][0], "E(x)");
    }

    #[test]
    fn bindings_parse() {
        assert_eq!(parse_binding("p=1/3").unwrap(), ("p".to_string(), Rational::new(1.into(), 3.into())));
        assert!(parse_binding("p").is_err());
        assert!(parse_binding("p=x").is_err());
    }
}
