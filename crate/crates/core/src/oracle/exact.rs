//! Exact finite-horizon distributions by breadth-first expansion.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use super::{initial_state, plain_copy, variable_index, Env, OracleError};
use crate::dsl::{AssignRhs, BoolExpr, ProgramAst, Statement};
use crate::symbolic::{ConstExpr, Name, Rational, VarPolynomial};

pub const DEFAULT_STATE_CAP: usize = 1_000_000;

type State = Vec<Option<Rational>>;
type Dist = HashMap<State, Rational>;

/// Joint distribution of the program state after some number of iterations.
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    pub variables: Vec<Name>,
    /// Reachable states with positive probability, in a canonical order.
    pub states: Vec<(State, Rational)>,
    bindings: BTreeMap<Name, Rational>,
}

impl ExactDistribution {
    fn from_dist(p: &ProgramAst, d: Dist, bindings: &BTreeMap<Name, Rational>) -> Self {
        let mut states: Vec<(State, Rational)> = d.into_iter().collect();
        states.sort();
        ExactDistribution { variables: p.variables.clone(), states, bindings: bindings.clone() }
    }

    pub fn total(&self) -> Rational {
        self.states.iter().map(|(_, p)| p).sum()
    }

    fn env(&self, s: &State) -> Result<BTreeMap<Name, ConstExpr>, OracleError> {
        let mut m: BTreeMap<Name, ConstExpr> =
            self.bindings.iter().map(|(k, v)| (k.clone(), ConstExpr::Rat(v.clone()))).collect();
        for (v, x) in self.variables.iter().zip(s) {
            if let Some(x) = x {
                m.insert(v.clone(), ConstExpr::Rat(x.clone()));
            }
        }
        Ok(m)
    }

    /// `E(f)` for a polynomial over program variables.
    pub fn expect(&self, f: &VarPolynomial) -> Result<Rational, OracleError> {
        let mut acc = Rational::zero();
        for (s, p) in &self.states {
            let env = self.env(s)?;
            let v = f.eval(&env).ok_or_else(|| {
                let missing = f.vars().into_iter().find(|v| !env.contains_key(v)).map(|v| v.to_string());
                OracleError::Unbound(missing.unwrap_or_default())
            })?;
            let v = v.as_rational().cloned().ok_or_else(|| OracleError::Unbound(v.to_string()))?;
            acc += v * p;
        }
        Ok(acc)
    }

    pub fn moment(&self, var: &str, k: u32) -> Result<Rational, OracleError> {
        self.expect(&VarPolynomial::var(var).pow(k))
    }

    /// Distribution of one variable.
    pub fn marginal(&self, var: &str) -> Result<BTreeMap<Rational, Rational>, OracleError> {
        let i = self.variables.iter().position(|v| &**v == var).ok_or_else(|| OracleError::Unbound(var.into()))?;
        let mut out = BTreeMap::new();
        for (s, p) in &self.states {
            let v = s[i].clone().ok_or_else(|| OracleError::Unbound(var.into()))?;
            *out.entry(v).or_insert_with(Rational::zero) += p;
        }
        Ok(out)
    }
}

struct Exec<'a> {
    index: BTreeMap<Name, usize>,
    bindings: &'a BTreeMap<Name, Rational>,
    cap: usize,
}

fn rat(i: i64) -> Rational {
    Rational::from_integer(BigInt::from(i))
}

fn small_int(r: &Rational) -> Option<i64> {
    if r.is_integer() {
        r.to_integer().to_i64()
    } else {
        None
    }
}

fn binomial(n: i64, k: i64) -> Rational {
    (0..k).fold(Rational::one(), |acc, i| acc * rat(n - i) / rat(i + 1))
}

impl Exec<'_> {
    fn env<'s>(&'s self, s: &'s State) -> Env<'s, Rational> {
        Env { index: &self.index, state: s, bindings: self.bindings }
    }

    /// Possible values of one right-hand side with their probabilities.
    fn outcomes(&self, rhs: &AssignRhs, s: &State) -> Result<Vec<(Rational, Rational)>, OracleError> {
        let env = self.env(s);
        let mut out = Vec::new();
        match rhs {
            AssignRhs::Categorical(opts) => {
                let mut rest = Rational::one();
                for (e, p) in opts {
                    let p = match p {
                        Some(p) => env.eval(p)?,
                        None => rest.clone(),
                    };
                    rest -= &p;
                    out.push((env.eval(e)?, p));
                }
            }
            AssignRhs::Dist { name, params } => {
                let ps = params.iter().map(|e| env.eval(e)).collect::<Result<Vec<_>, _>>()?;
                let bad = || OracleError::BadParameters(name.to_string());
                match &**name {
                    "Bernoulli" => {
                        out.push((Rational::one(), ps[0].clone()));
                        out.push((Rational::zero(), Rational::one() - &ps[0]));
                    }
                    "Binomial" => {
                        let n = small_int(&ps[0]).filter(|n| *n >= 0).ok_or_else(bad)?;
                        let q = &ps[1];
                        for k in 0..=n {
                            let pr = binomial(n, k)
                                * num_traits::pow(q.clone(), k as usize)
                                * num_traits::pow(Rational::one() - q, (n - k) as usize);
                            out.push((rat(k), pr));
                        }
                    }
                    "DiscreteUniform" => {
                        let (a, b) = (small_int(&ps[0]).ok_or_else(bad)?, small_int(&ps[1]).ok_or_else(bad)?);
                        if a > b {
                            return Err(bad());
                        }
                        let pr = Rational::new(BigInt::one(), BigInt::from(b - a + 1));
                        for v in a..=b {
                            out.push((rat(v), pr.clone()));
                        }
                    }
                    other => return Err(OracleError::ContinuousDistribution(other.to_string())),
                }
            }
        }
        out.retain(|(_, p)| !p.is_zero());
        Ok(out)
    }

    fn push(&self, d: &mut Dist, s: State, p: Rational) -> Result<(), OracleError> {
        *d.entry(s).or_insert_with(Rational::zero) += p;
        if d.len() > self.cap {
            return Err(OracleError::StateExplosion(self.cap));
        }
        Ok(())
    }

    fn statement(&self, st: &Statement, d: Dist) -> Result<Dist, OracleError> {
        let mut out = Dist::new();
        match st {
            Statement::Assign { targets, rhs, guard } => {
                let idx: Vec<usize> = targets.iter().map(|t| self.index[t]).collect();
                for (s, p) in d {
                    if let Some((c, default)) = guard {
                        if !self.env(&s).holds(c)? {
                            let v = self.env(&s).copy(default)?;
                            let mut next = s.clone();
                            next[idx[0]] = v;
                            self.push(&mut out, next, p)?;
                            continue;
                        }
                    }
                    // Simultaneous: every right-hand side reads the old state.
                    let choices = rhs
                        .iter()
                        .map(|r| match plain_copy(r) {
                            Some(v) => Ok(vec![(self.env(&s).copy(v)?, Rational::one())]),
                            None => Ok(self.outcomes(r, &s)?.into_iter().map(|(v, p)| (Some(v), p)).collect()),
                        })
                        .collect::<Result<Vec<Vec<_>>, OracleError>>()?;
                    let mut partial: Vec<(State, Rational)> = vec![(s.clone(), p)];
                    for (k, opts) in choices.iter().enumerate() {
                        let mut next = Vec::with_capacity(partial.len() * opts.len());
                        for (ps, pp) in &partial {
                            for (v, pv) in opts {
                                let mut n = ps.clone();
                                n[idx[k]] = v.clone();
                                next.push((n, pp * pv));
                            }
                        }
                        partial = next;
                    }
                    for (n, pn) in partial {
                        self.push(&mut out, n, pn)?;
                    }
                }
            }
            Statement::If { branches, else_branch } => {
                let mut parts: Vec<Dist> = vec![Dist::new(); branches.len() + 1];
                for (s, p) in d {
                    let mut chosen = branches.len();
                    for (i, (c, _)) in branches.iter().enumerate() {
                        if self.env(&s).holds(c)? {
                            chosen = i;
                            break;
                        }
                    }
                    parts[chosen].insert(s, p);
                }
                let else_part = parts.pop().unwrap();
                for (part, (_, body)) in parts.into_iter().zip(branches) {
                    for (s, p) in self.block(body, part)? {
                        self.push(&mut out, s, p)?;
                    }
                }
                let rest = match else_branch {
                    Some(b) => self.block(b, else_part)?,
                    None => else_part,
                };
                for (s, p) in rest {
                    self.push(&mut out, s, p)?;
                }
            }
        }
        Ok(out)
    }

    fn block(&self, stmts: &[Statement], mut d: Dist) -> Result<Dist, OracleError> {
        for st in stmts {
            d = self.statement(st, d)?;
        }
        Ok(d)
    }

    fn iteration(&self, guard: &BoolExpr, body: &[Statement], d: Dist) -> Result<Dist, OracleError> {
        if *guard == BoolExpr::True {
            return self.block(body, d);
        }
        let (mut run, mut stop) = (Dist::new(), Dist::new());
        for (s, p) in d {
            if self.env(&s).holds(guard)? {
                run.insert(s, p);
            } else {
                stop.insert(s, p);
            }
        }
        for (s, p) in self.block(body, run)? {
            self.push(&mut stop, s, p)?;
        }
        Ok(stop)
    }
}

/// Distributions after `0 ..= n` iterations.
pub fn enumerate_iterations(
    p: &ProgramAst,
    n: usize,
    bindings: &BTreeMap<Name, Rational>,
    cap: usize,
) -> Result<Vec<ExactDistribution>, OracleError> {
    let exec = Exec { index: variable_index(p), bindings, cap };
    let mut d = Dist::new();
    d.insert(initial_state(p, bindings), Rational::one());
    d = exec.block(&p.init, d)?;
    let mut out = vec![ExactDistribution::from_dist(p, d.clone(), bindings)];
    for _ in 0..n {
        d = exec.iteration(&p.guard, &p.body, d)?;
        out.push(ExactDistribution::from_dist(p, d.clone(), bindings));
    }
    Ok(out)
}

/// Distribution after exactly `n` iterations.
pub fn enumerate(
    p: &ProgramAst,
    n: usize,
    bindings: &BTreeMap<Name, Rational>,
    cap: usize,
) -> Result<ExactDistribution, OracleError> {
    Ok(enumerate_iterations(p, n, bindings, cap)?.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn herman_one_step() {
        let p = parse(include_str!("../../benchmarks/herman3.prob")).unwrap();
        let ds = enumerate_iterations(&p, 3, &BTreeMap::new(), DEFAULT_STATE_CAP).unwrap();
        assert_eq!(ds[0].moment("tokens", 1).unwrap(), q(3, 1));
        assert_eq!(ds[1].moment("tokens", 1).unwrap(), q(3, 2));
        assert_eq!(ds[2].moment("tokens", 2).unwrap(), q(1, 1) + q(8, 16));
        for d in &ds {
            assert_eq!(d.total(), Rational::one());
        }
    }

    #[test]
    fn guarded_loop_stops() {
        let p = parse("x, stop = 0, 0\nwhile stop == 0: stop = Bernoulli(1/2); x = x + 1 end").unwrap();
        let d = enumerate(&p, 3, &BTreeMap::new(), 100).unwrap();
        assert_eq!(d.moment("stop", 1).unwrap(), q(7, 8));
    }

    #[test]
    fn caps_and_continuous_are_errors() {
        let p = parse("x = 0\nwhile true: y = DiscreteUniform(0, 9); x = x + y end").unwrap();
        assert!(matches!(enumerate(&p, 4, &BTreeMap::new(), 20), Err(OracleError::StateExplosion(20))));
        let p = parse("x = 0\nwhile true: x = Normal(0, 1) end").unwrap();
        assert!(matches!(enumerate(&p, 1, &BTreeMap::new(), 20), Err(OracleError::ContinuousDistribution(_))));
    }

    #[test]
    fn symbolic_constants_need_bindings() {
        let p = parse("x = a\nwhile true: x = x + 1 {c} x end").unwrap();
        assert!(matches!(enumerate(&p, 1, &BTreeMap::new(), 20), Err(OracleError::Unbound(_))));
        let b = [("a".into(), q(2, 1)), ("c".into(), q(1, 3))].into();
        assert_eq!(enumerate(&p, 1, &b, 20).unwrap().moment("x", 1).unwrap(), q(7, 3));
    }
}
