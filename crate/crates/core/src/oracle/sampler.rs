//! Seeded Monte Carlo simulation.
//!
//! Each sample path draws from its own ChaCha8 stream (`seed`, stream = path
//! index), so results do not depend on how paths are spread over threads.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::Serialize;

use super::{initial_state, plain_copy, variable_index, Env, OracleError};
use crate::dsl::{AssignRhs, BoolExpr, ProgramAst, Statement};
use crate::symbolic::{ConstExpr, Name, VarPolynomial};

/// Sample mean with a normal-approximation 95% confidence interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub halfwidth: f64,
    pub samples: usize,
    pub seed: u64,
    pub generator: &'static str,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.halfwidth
    }
}

struct Sim<'a> {
    index: BTreeMap<Name, usize>,
    bindings: &'a BTreeMap<Name, f64>,
}

type State = Vec<Option<f64>>;

impl Sim<'_> {
    fn env<'s>(&'s self, s: &'s State) -> Env<'s, f64> {
        Env { index: &self.index, state: s, bindings: self.bindings }
    }

    fn draw(&self, rhs: &AssignRhs, s: &State, rng: &mut ChaCha8Rng) -> Result<f64, OracleError> {
        let env = self.env(s);
        match rhs {
            AssignRhs::Categorical(opts) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (i, (e, p)) in opts.iter().enumerate() {
                    let p = match p {
                        Some(p) => env.eval(p)?,
                        None => 1.0 - acc,
                    };
                    acc += p;
                    if u < acc || i + 1 == opts.len() {
                        return env.eval(e);
                    }
                }
                unreachable!("categorical with no options")
            }
            AssignRhs::Dist { name, params } => {
                let ps = params.iter().map(|e| env.eval(e)).collect::<Result<Vec<_>, _>>()?;
                let bad = || OracleError::BadParameters(name.to_string());
                Ok(match &**name {
                    "Bernoulli" => f64::from(u8::from(rng.gen::<f64>() < ps[0])),
                    "Binomial" => Binomial::new(ps[0].round() as u64, ps[1]).map_err(|_| bad())?.sample(rng) as f64,
                    "DiscreteUniform" => rng.gen_range(ps[0].round() as i64..=ps[1].round() as i64) as f64,
                    "Uniform" => ps[0] + (ps[1] - ps[0]) * rng.gen::<f64>(),
                    "Normal" => Normal::new(ps[0], ps[1].sqrt()).map_err(|_| bad())?.sample(rng),
                    "Laplace" => {
                        let u: f64 = rng.gen::<f64>() - 0.5;
                        ps[0] - ps[1] * u.signum() * (1.0 - 2.0 * u.abs()).ln()
                    }
                    "Exponential" => Exp::new(ps[0]).map_err(|_| bad())?.sample(rng),
                    "Beta" => Beta::new(ps[0], ps[1]).map_err(|_| bad())?.sample(rng),
                    other => return Err(OracleError::BadParameters(other.to_string())),
                })
            }
        }
    }

    fn statement(&self, st: &Statement, s: &mut State, rng: &mut ChaCha8Rng) -> Result<(), OracleError> {
        match st {
            Statement::Assign { targets, rhs, guard } => {
                if let Some((c, d)) = guard {
                    if !self.env(s).holds(c)? {
                        let v = self.env(s).copy(d)?;
                        s[self.index[&targets[0]]] = v;
                        return Ok(());
                    }
                }
                let vals = rhs
                    .iter()
                    .map(|r| match plain_copy(r) {
                        Some(v) => self.env(s).copy(v),
                        None => self.draw(r, s, rng).map(Some),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                for (t, v) in targets.iter().zip(vals) {
                    s[self.index[t]] = v;
                }
            }
            Statement::If { branches, else_branch } => {
                for (c, body) in branches {
                    if self.env(s).holds(c)? {
                        return self.block(body, s, rng);
                    }
                }
                if let Some(b) = else_branch {
                    self.block(b, s, rng)?;
                }
            }
        }
        Ok(())
    }

    fn block(&self, stmts: &[Statement], s: &mut State, rng: &mut ChaCha8Rng) -> Result<(), OracleError> {
        stmts.iter().try_for_each(|st| self.statement(st, s, rng))
    }

    fn run(&self, p: &ProgramAst, n: usize, rng: &mut ChaCha8Rng) -> Result<State, OracleError> {
        let mut s = initial_state(p, self.bindings);
        self.block(&p.init, &mut s, rng)?;
        for _ in 0..n {
            if p.guard != BoolExpr::True && !self.env(&s).holds(&p.guard)? {
                break;
            }
            self.block(&p.body, &mut s, rng)?;
        }
        Ok(s)
    }
}

/// Final states of `samples` independent runs of `n` iterations.
pub fn sample_states(
    p: &ProgramAst,
    n: usize,
    samples: usize,
    seed: u64,
    bindings: &BTreeMap<Name, f64>,
) -> Result<Vec<BTreeMap<Name, f64>>, OracleError> {
    let sim = Sim { index: variable_index(p), bindings };
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let s = sim.run(p, n, &mut rng)?;
            Ok(p.variables.iter().zip(s).filter_map(|(v, x)| x.map(|x| (v.clone(), x))).collect())
        })
        .collect()
}

/// Monte Carlo estimate of `E(f)` after `n` iterations.
pub fn estimate_moment(
    p: &ProgramAst,
    f: &VarPolynomial,
    n: usize,
    samples: usize,
    seed: u64,
    bindings: &BTreeMap<Name, f64>,
) -> Result<Estimate, OracleError> {
    if samples < 30 {
        return Err(OracleError::TooFewSamples(30));
    }
    let states = sample_states(p, n, samples, seed, bindings)?;
    let values: Vec<f64> = states
        .iter()
        .map(|s| eval_f64(f, s, bindings))
        .collect::<Result<_, _>>()?;
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples as f64 - 1.0);
    let halfwidth = 1.96 * (var / samples as f64).sqrt();
    Ok(Estimate { mean, halfwidth, samples, seed, generator: "ChaCha8 (rand_chacha), one stream per path" })
}

fn eval_f64(f: &VarPolynomial, s: &BTreeMap<Name, f64>, bindings: &BTreeMap<Name, f64>) -> Result<f64, OracleError> {
    let mut acc = 0.0;
    for (m, c) in f.terms() {
        let mut t = const_f64(c, bindings)?;
        for (v, e) in m.powers() {
            let x = s.get(v).or_else(|| bindings.get(v)).ok_or_else(|| OracleError::Unbound(v.to_string()))?;
            t *= x.powi(*e as i32);
        }
        acc += t;
    }
    Ok(acc)
}

fn const_f64(c: &ConstExpr, bindings: &BTreeMap<Name, f64>) -> Result<f64, OracleError> {
    if let Some(x) = c.to_f64() {
        return Ok(x);
    }
    let exact: BTreeMap<Name, crate::symbolic::Rational> = bindings
        .iter()
        .filter_map(|(k, v)| crate::symbolic::Rational::from_float(*v).map(|r| (k.clone(), r)))
        .collect();
    c.eval(&exact).map(|r| crate::symbolic::rational_to_f64(&r)).ok_or_else(|| OracleError::Unbound(c.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn deterministic_program_has_zero_width() {
        let p = parse("x = 1\nwhile true: x = 2 * x end").unwrap();
        let e = estimate_moment(&p, &VarPolynomial::var("x"), 5, 100, 7, &BTreeMap::new()).unwrap();
        assert_eq!(e.mean, 32.0);
        assert_eq!(e.halfwidth, 0.0);
    }

    #[test]
    fn reproducible_under_seed() {
        let p = parse("x = 0\nwhile true: g = Normal(0, 1); x = x + g end").unwrap();
        let f = VarPolynomial::var("x").pow(2);
        let a = estimate_moment(&p, &f, 10, 2000, 42, &BTreeMap::new()).unwrap();
        let b = estimate_moment(&p, &f, 10, 2000, 42, &BTreeMap::new()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains(10.0), "{a:?}");
    }
}
