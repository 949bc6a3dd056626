//! Benchmark corpus and checks shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use moment_forge::dsl::{self, ProgramAst};
use moment_forge::finiteness::{FiniteTypes, ValueSet};
use moment_forge::normalizer::{self, Cond};
use moment_forge::oracle::{exact, float_bindings, sampler};
use moment_forge::pipeline::{Analysis, Options};
use moment_forge::reduction::{reduce_power, Reducer};
use moment_forge::symbolic::{ConstExpr, Name, Rational, Surd, VarPolynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Discrete with a state space the enumerator handles at small horizons.
    Discrete,
    /// Discrete, but one iteration already has more states than the enumerator cap.
    DiscreteHuge,
    Continuous,
}

#[derive(Clone, Debug)]
pub struct Bench {
    pub name: &'static str,
    pub file: &'static str,
    pub goals: &'static [&'static str],
    /// Values for symbolic constants, used by the oracles.
    pub bind: &'static [(&'static str, i64, i64)],
    /// Also substitute `bind` before the analysis (symbolic form unsupported).
    pub bind_for_analysis: bool,
    pub approximate: bool,
    pub kind: Kind,
}

/// The evaluation benchmarks plus the geometric loop used for after-termination moments.
pub fn corpus() -> Vec<Bench> {
    use Kind::*;
    let b = |name, file, goals, bind, kind| Bench {
        name,
        file,
        goals,
        bind,
        bind_for_analysis: false,
        approximate: false,
        kind,
    };
    vec![
        b("Running-Example", "running_example.prob", &["E(z)", "E(x^2)", "E(toggle)"], &[("s0", 1, 1)], Continuous),
        b("Herman-3", "herman3.prob", &["E(tokens^3)", "E(tokens)"], &[], Discrete),
        b("Las-Vegas-Search", "las_vegas_search.prob", &["E(found^20)", "E(attempts^2)"], &[], Discrete),
        Bench {
            approximate: true,
            ..b("Pi-Approximation", "pi_approximation.prob", &["E(count^3)"], &[], Continuous)
        },
        b("50-Coin-Flips", "coin_flips_50.prob", &["E(total)"], &[], DiscreteHuge),
        b("Gambler-Ruin-Momentum", "gambler_ruin_momentum.prob", &["E(x^3)"], &[("p", 1, 3)], Discrete),
        b("Hawk-Dove-Symbolic", "hawk_dove.prob", &["E(p1bal^4)"], &[("v", 2, 1), ("c", 3, 1)], Discrete),
        b("Variable-Swap", "variable_swap.prob", &["E(x^30)", "E(y)"], &[], Continuous),
        b("Retransmission-Protocol", "retransmission.prob", &["E(fail^3)"], &[("p", 1, 4)], Discrete),
        b("Randomized-Response", "randomized_response.prob", &["E(p1^3)"], &[("q", 1, 5)], Discrete),
        Bench {
            bind_for_analysis: true,
            ..b("Duelling-Cowboys", "duelling_cowboys.prob", &["E(ahit)", "E(bhit)"], &[("a", 1, 2), ("b", 1, 3)], Discrete)
        },
        b("Martingale-Bet", "martingale_bet.prob", &["E(capital^3)"], &[("c0", 10, 1), ("p", 1, 2)], Discrete),
        b("Bimodal", "bimodal.prob", &["E(x^10)"], &[], Continuous),
        b("DBN-Umbrella", "dbn_umbrella.prob", &["E(umbrella^5)"], &[("p", 9, 10), ("q", 1, 5)], Discrete),
        b("DBN-Component-Health", "dbn_component_health.prob", &["E(obs^5)"], &[], Discrete),
        b("Geometric", "geometric.prob", &["E(x)", "E(x^2)"], &[], Discrete),
    ]
}

pub fn bench(name: &str) -> Bench {
    corpus().into_iter().find(|b| b.name == name).unwrap_or_else(|| panic!("no benchmark {name}"))
}

pub fn path(file: &str) -> String {
    format!("{}/benchmarks/{file}", env!("CARGO_MANIFEST_DIR"))
}

pub fn source(file: &str) -> String {
    std::fs::read_to_string(path(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

impl Bench {
    pub fn ast(&self) -> ProgramAst {
        dsl::parse(&source(self.file)).unwrap()
    }

    pub fn bindings(&self) -> BTreeMap<Name, Rational> {
        self.bind.iter().map(|(k, n, d)| (Name::from(*k), q(*n, *d))).collect()
    }

    /// The program the oracles run: constants substituted.
    pub fn bound_ast(&self) -> ProgramAst {
        normalizer::bind_constants(&self.ast(), &self.bindings())
    }

    /// The analysis with symbolic constants kept where the solver supports them.
    pub fn analysis(&self) -> Analysis {
        let ast = if self.bind_for_analysis { self.bound_ast() } else { self.ast() };
        Analysis::new(&ast, &Options { approximate: self.approximate, ..Options::default() })
            .unwrap_or_else(|e| panic!("{}: {e}", self.name))
    }

    /// The analysis of the program the oracles run.
    pub fn bound_analysis(&self) -> Analysis {
        Analysis::new(&self.bound_ast(), &Options { approximate: self.approximate, ..Options::default() })
            .unwrap_or_else(|e| panic!("{}: {e}", self.name))
    }
}

fn goal_poly(ast: &ProgramAst, goal: &str) -> VarPolynomial {
    let inner = goal.trim().strip_prefix("E(").and_then(|r| r.strip_suffix(')')).unwrap_or(goal);
    dsl::parse_expr(inner).unwrap().to_poly(&|v| ast.is_variable(v)).unwrap()
}

/// Closed form against exact forward evaluation of its own system, n = 0 ..= upto.
pub fn closed_vs_forward(b: &Bench, upto: usize) -> Result<usize, String> {
    let a = b.analysis();
    let mut checked = 0;
    for g in b.goals {
        let m = a.moment(g).map_err(|e| format!("{}: {g}: {e}", b.name))?;
        let f = m.closed().map_err(|e| format!("{}: {e}", b.name))?;
        for (n, v) in m.system.forward(upto).iter().enumerate() {
            let exact = Surd::from_const(m.system.goal_value(v));
            if f.eval(n as u64) != exact {
                return Err(format!("{}: {g} at n = {n}: closed form {} but forward {exact}", b.name, f.eval(n as u64)));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Closed forms of the constant-bound program against exact enumeration.
pub fn solver_vs_enumerator(b: &Bench, upto: usize) -> Result<usize, String> {
    let a = b.bound_analysis();
    let ast = b.bound_ast();
    let dists = exact::enumerate_iterations(&ast, upto, &BTreeMap::new(), exact::DEFAULT_STATE_CAP)
        .map_err(|e| format!("{}: {e}", b.name))?;
    let mut checked = 0;
    for g in b.goals {
        let f = a.moment(g).and_then(|m| m.closed().cloned()).map_err(|e| format!("{}: {g}: {e}", b.name))?;
        let poly = goal_poly(&ast, g);
        for (n, d) in dists.iter().enumerate() {
            let oracle = d.expect(&poly).map_err(|e| format!("{}: {e}", b.name))?;
            if f.eval(n as u64) != Surd::rational(oracle.clone()) {
                return Err(format!("{}: {g} at n = {n}: solver {} vs enumeration {oracle}", b.name, f.eval(n as u64)));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Projection of a distribution onto some variables.
fn project(d: &exact::ExactDistribution, vars: &[Name]) -> BTreeMap<Vec<Option<Rational>>, Rational> {
    let idx: Vec<usize> = vars.iter().map(|v| d.variables.iter().position(|w| w == v).unwrap()).collect();
    let mut out: BTreeMap<Vec<Option<Rational>>, Rational> = BTreeMap::new();
    for (s, p) in &d.states {
        let key = idx.iter().map(|&i| s[i].clone()).collect();
        *out.entry(key).or_insert_with(|| q(0, 1)) += p;
    }
    out
}

/// The normal form, run by the oracles, behaves like the source program.
pub fn normalization_preserved(b: &Bench) -> Result<String, String> {
    let ast = b.bound_ast();
    let norm = normalizer::normalize(&ast).map_err(|e| format!("{}: {e}", b.name))?;
    let reparsed = dsl::parse(&norm.to_source()).map_err(|e| format!("{}: normal form does not parse: {e}", b.name))?;
    match b.kind {
        Kind::Discrete => {
            let horizon = 4;
            let cap = exact::DEFAULT_STATE_CAP;
            let orig = exact::enumerate_iterations(&ast, horizon, &BTreeMap::new(), cap).map_err(|e| format!("{}: {e}", b.name))?;
            let new = exact::enumerate_iterations(&reparsed, horizon, &BTreeMap::new(), cap).map_err(|e| format!("{}: {e}", b.name))?;
            for (n, (x, y)) in orig.iter().zip(&new).enumerate() {
                if project(x, &ast.variables) != project(y, &ast.variables) {
                    return Err(format!("{}: joint distributions differ at n = {n}", b.name));
                }
            }
            Ok(format!("{}: identical joint distributions for n <= {horizon}", b.name))
        }
        Kind::DiscreteHuge | Kind::Continuous => {
            let n = 10;
            let samples = 4000;
            let bindings = float_bindings(&BTreeMap::new());
            let var = goal_poly(&ast, b.goals[0]).vars().into_iter().next().unwrap();
            let var: Name = var;
            for k in 1..=2u32 {
                let f = VarPolynomial::var(var.clone()).pow(k);
                let e1 = sampler::estimate_moment(&ast, &f, n, samples, 11, &bindings).map_err(|e| format!("{}: {e}", b.name))?;
                let e2 = sampler::estimate_moment(&reparsed, &f, n, samples, 12, &bindings).map_err(|e| format!("{}: {e}", b.name))?;
                let se = ((e1.halfwidth / 1.96).powi(2) + (e2.halfwidth / 1.96).powi(2)).sqrt();
                if (e1.mean - e2.mean).abs() > 4.0 * se {
                    return Err(format!(
                        "{}: E({var}^{k}) at n = {n}: {} vs {} exceeds 4 standard errors ({se})",
                        b.name, e1.mean, e2.mean
                    ));
                }
            }
            Ok(format!("{}: sample moments agree within 4 standard errors at n = {n}", b.name))
        }
    }
}

/// Random supports and powers: the reduction reproduces `a^k` at every support point.
pub fn power_reduction_instances(count: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let m = rng.gen_range(1..=6);
        let mut support = BTreeSet::new();
        while support.len() < m {
            support.insert(q(rng.gen_range(-9..=9), rng.gen_range(1..=4)));
        }
        let support: Vec<ConstExpr> = support.into_iter().map(ConstExpr::from).collect();
        let k = rng.gen_range(0..=12u32);
        let coeffs = reduce_power(&support, k).map_err(|e| e.to_string())?;
        if coeffs.len() != m {
            return Err(format!("instance {i}: {} coefficients for support of size {m}", coeffs.len()));
        }
        for a in &support {
            let lhs = a.pow(k as i64);
            let mut rhs = ConstExpr::zero();
            for (j, c) in coeffs.iter().enumerate() {
                rhs = rhs + c.clone() * a.pow(j as i64);
            }
            if lhs != rhs {
                return Err(format!("instance {i}: {a}^{k} = {lhs} but reduction gives {rhs}"));
            }
        }
    }
    Ok(())
}

fn random_condition(rng: &mut ChaCha8Rng, vars: &[(&str, Vec<i64>)], depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.4) {
        let (v, _) = &vars[rng.gen_range(0..vars.len())];
        let op = ["==", "!=", "<", "<=", ">", ">="][rng.gen_range(0..6)];
        return if rng.gen_bool(0.3) {
            let (w, _) = &vars[rng.gen_range(0..vars.len())];
            format!("{v} {op} {w}")
        } else {
            format!("{v} {op} {}", rng.gen_range(-2..=3))
        };
    }
    match rng.gen_range(0..3) {
        0 => format!("({}) and ({})", random_condition(rng, vars, depth - 1), random_condition(rng, vars, depth - 1)),
        1 => format!("({}) or ({})", random_condition(rng, vars, depth - 1), random_condition(rng, vars, depth - 1)),
        _ => format!("not ({})", random_condition(rng, vars, depth - 1)),
    }
}

/// Indicator polynomials of random conditions are `{0,1}`-valued and agree
/// with direct evaluation on every joint assignment.
pub fn indicator_instances(count: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let nvars = rng.gen_range(1..=3);
        let vars: Vec<(&str, Vec<i64>)> = ["a", "b", "c"][..nvars]
            .iter()
            .map(|v| {
                let mut s = BTreeSet::new();
                let size = rng.gen_range(1..=4);
                while s.len() < size {
                    s.insert(rng.gen_range(-2..=3));
                }
                (*v, s.into_iter().collect())
            })
            .collect();
        let text = random_condition(&mut rng, &vars, 3);
        let types = FiniteTypes {
            sets: vars
                .iter()
                .map(|(v, s)| (Name::from(*v), ValueSet::Finite(s.iter().map(|x| ConstExpr::int(*x)).collect())))
                .collect(),
        };
        let reducer = Reducer::new(&types).map_err(|e| e.to_string())?;
        let b = dsl::parse_bool(&text).map_err(|e| format!("{text}: {e}"))?;
        let cond = Cond::from_bool(&b, &|v| types.sets.contains_key(v)).map_err(|e| format!("{text}: {e}"))?;
        let ind = reducer.indicator(&cond).map_err(|e| format!("{text}: {e}"))?;
        let mut assignment = vec![0usize; vars.len()];
        loop {
            let env: BTreeMap<Name, ConstExpr> =
                vars.iter().zip(&assignment).map(|((v, s), &j)| (Name::from(*v), ConstExpr::int(s[j]))).collect();
            let truth = cond.eval(&env).ok_or_else(|| format!("{text}: undecided"))?;
            let value = ind.eval(&env).ok_or_else(|| format!("{text}: indicator not numeric"))?;
            let expected = if truth { ConstExpr::one() } else { ConstExpr::zero() };
            if value != expected {
                return Err(format!("instance {i}: `{text}` at {env:?}: indicator {value}, condition {truth}"));
            }
            // next joint assignment
            let mut pos = 0;
            while pos < vars.len() {
                assignment[pos] += 1;
                if assignment[pos] < vars[pos].1.len() {
                    break;
                }
                assignment[pos] = 0;
                pos += 1;
            }
            if pos == vars.len() {
                break;
            }
        }
    }
    Ok(())
}

/// How many of `runs` seeded estimates have a 95% interval containing the exact value.
pub fn coverage(b: &Bench, goal: &str, n: usize, runs: u64, samples: usize) -> Result<(u64, f64), String> {
    let a = b.bound_analysis();
    let exact = a
        .moment(goal)
        .and_then(|m| m.closed().cloned())
        .map_err(|e| format!("{}: {e}", b.name))?
        .eval(n as u64)
        .to_f64()
        .ok_or("symbolic value")?;
    let ast = b.bound_ast();
    let f = goal_poly(&ast, goal);
    let bindings = float_bindings(&BTreeMap::new());
    let mut hits = 0;
    for seed in 0..runs {
        let e = sampler::estimate_moment(&ast, &f, n, samples, 1000 + seed, &bindings).map_err(|e| format!("{}: {e}", b.name))?;
        if e.contains(exact) {
            hits += 1;
        }
    }
    Ok((hits, exact))
}
