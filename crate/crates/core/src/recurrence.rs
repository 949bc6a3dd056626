//! Builds the finite system of linear recurrences over expected monomials that
//! contains a goal moment, together with exact initial values.

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::dependency::VarOrder;
use crate::normalizer::{Cond, DistCall, GuardedAssignment, NormalizedProgram, Rhs};
use crate::reduction::{Reducer, ReductionError};
use crate::symbolic::{ConstExpr, Monomial, Name, VarPolynomial};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error("unsupported distribution: {0}")]
    UnsupportedDistribution(String),
    #[error("internal ordering violation: E({producer}) produced larger monomial {produced}")]
    OrderingViolation { producer: String, produced: String },
    #[error("recurrence system exceeds {0} monomials")]
    TooLarge(usize),
}

/// Row `i` reads `E(M_i at n+1) = sum_j rows[i][j] * E(M_j at n)`.
#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceSystem {
    pub monomials: Vec<Monomial>,
    pub rows: Vec<BTreeMap<usize, ConstExpr>>,
    pub initials: Vec<ConstExpr>,
    /// The requested expectation as a combination of system monomials.
    pub goal: Vec<(usize, ConstExpr)>,
}

impl RecurrenceSystem {
    pub fn dim(&self) -> usize {
        self.monomials.len()
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.monomials.iter().position(|x| x == m)
    }

    pub fn matrix(&self) -> Vec<Vec<ConstExpr>> {
        self.rows
            .iter()
            .map(|r| (0..self.dim()).map(|j| r.get(&j).cloned().unwrap_or_else(ConstExpr::zero)).collect())
            .collect()
    }

    /// One step of the recurrence.
    pub fn apply(&self, v: &[ConstExpr]) -> Vec<ConstExpr> {
        self.rows
            .iter()
            .map(|r| r.iter().fold(ConstExpr::zero(), |acc, (j, c)| &acc + &(c * &v[*j])))
            .collect()
    }

    /// Exact values of every monomial's expectation at iterations 0..=n.
    pub fn forward(&self, n: usize) -> Vec<Vec<ConstExpr>> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.initials.clone());
        for _ in 0..n {
            let next = self.apply(out.last().unwrap());
            out.push(next);
        }
        out
    }

    pub fn forward_eval(&self, n: usize) -> Vec<ConstExpr> {
        let mut v = self.initials.clone();
        for _ in 0..n {
            v = self.apply(&v);
        }
        v
    }

    pub fn goal_value(&self, values: &[ConstExpr]) -> ConstExpr {
        self.goal.iter().fold(ConstExpr::zero(), |acc, (i, c)| &acc + &(c * &values[*i]))
    }
}

fn factorial(k: u32) -> ConstExpr {
    (1..=k as i64).fold(ConstExpr::one(), |acc, i| &acc * &ConstExpr::int(i))
}

fn binomial(n: u32, k: u32) -> ConstExpr {
    &factorial(n) / &(&factorial(k) * &factorial(n - k))
}

/// `E(D^k)` for a distribution with constant parameters.
pub fn dist_raw_moment(d: &DistCall, k: u32) -> Result<ConstExpr, BuildError> {
    if k == 0 {
        return Ok(ConstExpr::one());
    }
    let p = &d.params;
    let kk = k as i64;
    Ok(match &*d.name {
        "Bernoulli" => p[0].clone(),
        "Uniform" => {
            let (a, b) = (&p[0], &p[1]);
            let num = &b.pow(kk + 1) - &a.pow(kk + 1);
            let den = &ConstExpr::int(kk + 1) * &(b - a);
            num.checked_div(&den).ok_or_else(|| BuildError::UnsupportedDistribution(d.to_string()))?
        }
        "Normal" | "Laplace" => {
            // Binomial expansion around the location parameter.
            let (mu, s) = (&p[0], &p[1]);
            let mut acc = ConstExpr::zero();
            for j in (0..=k).step_by(2) {
                let central = if &*d.name == "Normal" {
                    let dfact = (1..j as i64).step_by(2).fold(ConstExpr::one(), |a, i| &a * &ConstExpr::int(i));
                    &dfact * &s.pow(i64::from(j / 2))
                } else {
                    &factorial(j) * &s.pow(i64::from(j))
                };
                acc = &acc + &(&(&binomial(k, j) * &mu.pow(i64::from(k - j))) * &central);
            }
            acc
        }
        "Exponential" => {
            factorial(k).checked_div(&p[0].pow(kk)).ok_or_else(|| BuildError::UnsupportedDistribution(d.to_string()))?
        }
        "Beta" => {
            let (a, b) = (&p[0], &p[1]);
            let mut acc = ConstExpr::one();
            for r in 0..kk {
                let r = ConstExpr::int(r);
                let num = a + &r;
                let den = &(a + b) + &r;
                acc = &acc * &num.checked_div(&den).ok_or_else(|| BuildError::UnsupportedDistribution(d.to_string()))?;
            }
            acc
        }
        "Binomial" => {
            // sum_j S(k, j) * n^(j falling) * p^j
            let (n, q) = (&p[0], &p[1]);
            let mut stirling = vec![vec![0i64; k as usize + 1]; k as usize + 1];
            stirling[0][0] = 1;
            for i in 1..=k as usize {
                for j in 1..=i {
                    stirling[i][j] = j as i64 * stirling[i - 1][j] + stirling[i - 1][j - 1];
                }
            }
            let mut acc = ConstExpr::zero();
            let mut falling = ConstExpr::one();
            for j in 1..=k as usize {
                falling = &falling * &(n - &ConstExpr::int(j as i64 - 1));
                let term = &(&ConstExpr::int(stirling[k as usize][j]) * &falling) * &q.pow(j as i64);
                acc = &acc + &term;
            }
            acc
        }
        "DiscreteUniform" => {
            let (a, b) = match (p[0].as_rational(), p[1].as_rational()) {
                (Some(a), Some(b)) if a.is_integer() && b.is_integer() && a <= b => (a.to_integer(), b.to_integer()),
                _ => return Err(BuildError::UnsupportedDistribution(d.to_string())),
            };
            let count = &b - &a + 1;
            let mut acc = ConstExpr::zero();
            let mut i = a;
            while i <= b {
                acc = &acc + &ConstExpr::Rat(crate::symbolic::Rational::from_integer(i.clone())).pow(kk);
                i += 1;
            }
            &acc / &ConstExpr::Rat(crate::symbolic::Rational::from_integer(count))
        }
        other => return Err(BuildError::UnsupportedDistribution(other.to_string())),
    })
}

/// Backward substitution of one statement into polynomials. Guard indicators
/// are built on first use so statements outside the goal's cone never need one.
struct Substitution {
    target: Name,
    guard: Cond,
    indicator: Option<(VarPolynomial, VarPolynomial)>,
    default: VarPolynomial,
    rhs: Rhs,
    powers: HashMap<u32, VarPolynomial>,
}

impl Substitution {
    fn new(a: &GuardedAssignment) -> Substitution {
        Substitution {
            target: a.target.clone(),
            guard: a.guard.clone(),
            indicator: None,
            default: VarPolynomial::var(a.default.clone()),
            rhs: a.rhs.clone(),
            powers: HashMap::new(),
        }
    }

    /// Replacement for `target^j`, with or without power reduction.
    fn power(&mut self, j: u32, reducer: &Reducer, reduce: bool) -> Result<VarPolynomial, BuildError> {
        if let Some(p) = self.powers.get(&j) {
            return Ok(p.clone());
        }
        let red = |p: VarPolynomial| if reduce { reducer.reduce(&p) } else { p };
        let value = match &self.rhs {
            Rhs::Categorical(opts) => {
                let mut acc = VarPolynomial::zero();
                for (poly, prob) in opts {
                    acc = acc.add(&red(poly.pow(j)).scale(prob));
                }
                acc
            }
            Rhs::Dist(d) => VarPolynomial::constant(dist_raw_moment(d, j)?),
        };
        let out = if self.guard.is_true() {
            value
        } else {
            if self.indicator.is_none() {
                let ind = reducer.indicator(&self.guard)?;
                self.indicator = Some((VarPolynomial::one().sub(&ind), ind));
            }
            let (not_ind, ind) = self.indicator.as_ref().unwrap();
            let taken = red(ind.mul(&value));
            let skipped = red(not_ind.mul(&self.default.pow(j)));
            taken.add(&skipped)
        };
        self.powers.insert(j, out.clone());
        Ok(out)
    }

    fn apply(&mut self, p: &VarPolynomial, reducer: &Reducer, reduce: bool) -> Result<VarPolynomial, BuildError> {
        let mut out: BTreeMap<Monomial, ConstExpr> = BTreeMap::new();
        let mut grouped: BTreeMap<u32, Vec<(Monomial, ConstExpr)>> = BTreeMap::new();
        for (m, c) in p.terms() {
            let j = m.degree_in(&self.target);
            if j == 0 {
                add_to(&mut out, m.clone(), c.clone());
            } else {
                grouped.entry(j).or_default().push((m.without(&self.target), c.clone()));
            }
        }
        if grouped.is_empty() {
            return Ok(p.clone());
        }
        for (j, rest) in grouped {
            let rep = self.power(j, reducer, reduce)?;
            for (m, c) in rest {
                let mut prod = VarPolynomial::zero();
                for (rm, rc) in rep.terms() {
                    prod.add_term(m.mul(rm), rc * &c);
                }
                let prod = if reduce { reducer.reduce(&prod) } else { prod };
                for (pm, pc) in prod.into_terms() {
                    add_to(&mut out, pm, pc);
                }
            }
        }
        let mut res = VarPolynomial::zero();
        for (m, c) in out {
            res.add_term(m, c);
        }
        Ok(res)
    }
}

fn add_to(map: &mut BTreeMap<Monomial, ConstExpr>, m: Monomial, c: ConstExpr) {
    let e = map.entry(m).or_insert_with(ConstExpr::zero);
    *e = &*e + &c;
}

/// Default limit on the number of monomials in one system.
pub const MAX_DIM: usize = 5000;

pub struct Builder<'a> {
    reducer: &'a Reducer,
    order: &'a VarOrder,
    body: Vec<Substitution>,
    init: Vec<Substitution>,
    pub max_dim: usize,
}

impl<'a> Builder<'a> {
    pub fn new(program: &'a NormalizedProgram, reducer: &'a Reducer, order: &'a VarOrder) -> Result<Self, BuildError> {
        let body = program.body.iter().map(Substitution::new).collect();
        let init = program.init.iter().map(Substitution::new).collect();
        Ok(Builder { reducer, order, body, init, max_dim: MAX_DIM })
    }

    /// `E(M at n+1)` in terms of expectations at iteration n.
    pub fn step(&mut self, m: &Monomial) -> Result<VarPolynomial, BuildError> {
        let mut p = VarPolynomial::term(m.clone(), ConstExpr::one());
        for s in self.body.iter_mut().rev() {
            p = s.apply(&p, self.reducer, true)?;
        }
        Ok(p)
    }

    /// `E(p)` before the first iteration.
    pub fn initial(&mut self, p: &VarPolynomial) -> Result<ConstExpr, BuildError> {
        let mut p = p.clone();
        for s in self.init.iter_mut().rev() {
            p = s.apply(&p, self.reducer, false)?;
        }
        // Variables never initialized stand for a symbolic constant of the same name.
        let env: BTreeMap<Name, ConstExpr> =
            p.vars().into_iter().map(|v| (v.clone(), ConstExpr::symbol(v))).collect();
        Ok(p.eval(&env).expect("every variable bound"))
    }

    pub fn build(&mut self, goal: &VarPolynomial) -> Result<RecurrenceSystem, BuildError> {
        let goal = self.reducer.reduce(goal);
        let mut index: HashMap<Monomial, usize> = HashMap::new();
        let mut monomials: Vec<Monomial> = Vec::new();
        let mut queue: BTreeMap<(Reverse<crate::dependency::MonomialKey>, usize), Monomial> = BTreeMap::new();
        let enqueue = |m: Monomial, index: &mut HashMap<Monomial, usize>, monomials: &mut Vec<Monomial>, queue: &mut BTreeMap<_, _>| {
            if index.contains_key(&m) {
                return;
            }
            let i = monomials.len();
            index.insert(m.clone(), i);
            monomials.push(m.clone());
            queue.insert((Reverse(self.order.key(&m)), i), m);
        };
        for (m, _) in goal.terms() {
            enqueue(m.clone(), &mut index, &mut monomials, &mut queue);
        }
        enqueue(Monomial::one(), &mut index, &mut monomials, &mut queue);
        let mut rows: BTreeMap<usize, BTreeMap<usize, ConstExpr>> = BTreeMap::new();
        while let Some(((_, i), m)) = queue.pop_first() {
            let next = self.step(&m)?;
            let key = self.order.key(&m);
            let mut row = BTreeMap::new();
            for (nm, c) in next.terms() {
                if self.order.key(nm) > key {
                    return Err(BuildError::OrderingViolation { producer: m.to_string(), produced: nm.to_string() });
                }
                enqueue(nm.clone(), &mut index, &mut monomials, &mut queue);
                row.insert(index[nm], c.clone());
            }
            rows.insert(i, row);
            if monomials.len() > self.max_dim {
                return Err(BuildError::TooLarge(self.max_dim));
            }
        }
        let initials = monomials
            .iter()
            .map(|m| self.initial(&VarPolynomial::term(m.clone(), ConstExpr::one())))
            .collect::<Result<Vec<_>, _>>()?;
        let goal = goal.terms().map(|(m, c)| (index[m], c.clone())).collect();
        Ok(RecurrenceSystem { monomials, rows: rows.into_values().collect(), initials, goal })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependency::DependencyGraph;
    use crate::dsl::parse;
    use crate::finiteness::infer;
    use crate::normalizer::normalize;

    fn system(src: &str, goal: &str) -> RecurrenceSystem {
        let p = normalize(&parse(src).unwrap()).unwrap();
        let t = infer(&p);
        let g = DependencyGraph::build(&p, &t);
        let o = g.var_order();
        let r = Reducer::new(&t).unwrap();
        let goal = crate::dsl::parse_expr(goal).unwrap().to_poly(&|v| p.is_variable(v)).unwrap();
        Builder::new(&p, &r, &o).unwrap().build(&goal).unwrap()
    }

    fn dist(name: &str, params: &[ConstExpr]) -> DistCall {
        DistCall { name: name.into(), params: params.to_vec() }
    }

    #[test]
    fn distribution_moments() {
        let q = ConstExpr::ratio;
        assert_eq!(dist_raw_moment(&dist("Uniform", &[q(0, 1), q(1, 1)]), 3).unwrap(), q(1, 4));
        assert_eq!(dist_raw_moment(&dist("Normal", &[q(0, 1), q(1, 1)]), 4).unwrap(), q(3, 1));
        assert_eq!(dist_raw_moment(&dist("Normal", &[q(0, 1), q(1, 1)]), 5).unwrap(), q(0, 1));
        let p = ConstExpr::symbol("p");
        assert_eq!(dist_raw_moment(&dist("Bernoulli", &[p.clone()]), 7).unwrap(), p);
        assert_eq!(dist_raw_moment(&dist("Laplace", &[q(0, 1), q(2, 1)]), 2).unwrap(), q(8, 1));
        assert_eq!(dist_raw_moment(&dist("Exponential", &[q(2, 1)]), 3).unwrap(), q(6, 8));
        assert_eq!(dist_raw_moment(&dist("Beta", &[q(2, 1), q(3, 1)]), 2).unwrap(), q(1, 5));
        // Binomial(4, 1/2): E(X^2) = np(1-p) + (np)^2 = 1 + 4 = 5.
        assert_eq!(dist_raw_moment(&dist("Binomial", &[q(4, 1), q(1, 2)]), 2).unwrap(), q(5, 1));
        assert_eq!(dist_raw_moment(&dist("DiscreteUniform", &[q(1, 1), q(3, 1)]), 2).unwrap(), q(14, 3));
        // Normal(1, 2): E(X^2) = 1 + 2.
        assert_eq!(dist_raw_moment(&dist("Normal", &[q(1, 1), q(2, 1)]), 2).unwrap(), q(3, 1));
    }

    #[test]
    fn identity_loop() {
        // A fixed point is recognised as a finite (constant) variable.
        let s = system("x = 3\nwhile true: x = 2*x - 3 end", "x");
        assert_eq!(s.dim(), 1);
        assert_eq!(s.goal_value(&s.forward_eval(5)), ConstExpr::int(3));
        let s = system("x = 3\nwhile true: x = 2*x - 1 end", "x");
        assert_eq!(s.dim(), 2);
        assert_eq!(s.rows[0].get(&0), Some(&ConstExpr::int(2)));
        assert_eq!(s.initials[0], ConstExpr::int(3));
        assert_eq!(s.forward_eval(5)[0], ConstExpr::int(65));
        let one = s.index_of(&Monomial::one()).unwrap();
        assert_eq!(s.rows[one].len(), 1);
        assert_eq!(s.forward_eval(7)[one], ConstExpr::one());
    }

    #[test]
    fn running_example_z() {
        let s = system(include_str!("../benchmarks/running_example.prob"), "z");
        assert_eq!(s.dim(), 10, "{:?}", s.monomials.iter().map(|m| m.to_string()).collect::<Vec<_>>());
        let z = s.index_of(&Monomial::var("z")).unwrap();
        let row: Vec<(String, ConstExpr)> =
            s.rows[z].iter().map(|(j, c)| (s.monomials[*j].to_string(), c.clone())).collect();
        let expect = |m: &str, c: ConstExpr| assert!(row.contains(&(m.to_string(), c.clone())), "{m}: {row:?}");
        expect("z", ConstExpr::one());
        expect("toggle*x", ConstExpr::ratio(-1, 6));
        expect("toggle*y", ConstExpr::ratio(-1, 2));
        expect("toggle*x^2", ConstExpr::ratio(-1, 6));
        expect("toggle", ConstExpr::ratio(1, 12));
        expect("toggle*z", ConstExpr::ratio(1, 6));
        // E(x_n) = 5/8 + 3n/4 + 3(-1)^n/8
        let sx = system(include_str!("../benchmarks/running_example.prob"), "x");
        for (n, v) in sx.forward(12).iter().enumerate() {
            let sign = if n % 2 == 0 { 3 } else { -3 };
            let expect = &(&ConstExpr::ratio(5, 8) + &ConstExpr::ratio(3 * n as i64, 4)) + &ConstExpr::ratio(sign, 8);
            assert_eq!(sx.goal_value(v), expect, "n = {n}");
        }
    }

    #[test]
    fn initial_values() {
        let s = system("x = Bernoulli(1/2)\nwhile true: x = 1 - x end", "x**2");
        assert_eq!(s.goal_value(&s.initials), ConstExpr::ratio(1, 2));
        let p = normalize(&parse(include_str!("../benchmarks/running_example.prob")).unwrap()).unwrap();
        let t = infer(&p);
        let o = DependencyGraph::build(&p, &t).var_order();
        let r = Reducer::new(&t).unwrap();
        let mut b = Builder::new(&p, &r, &o).unwrap();
        let e = |b: &mut Builder, v: &str| b.initial(&VarPolynomial::var(v)).unwrap();
        assert_eq!(e(&mut b, "sum"), ConstExpr::symbol("s0"));
        assert_eq!(e(&mut b, "x"), ConstExpr::one());
        assert_eq!(e(&mut b, "toggle"), ConstExpr::zero());
    }
}
