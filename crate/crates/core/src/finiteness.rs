//! Value-set analysis: which loop variables only ever take finitely many values.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::normalizer::{Cond, GuardedAssignment, NormalizedProgram, Rhs};
use crate::symbolic::{ConstExpr, Name, Rational};

/// Sets larger than this are treated as infinite.
pub const DEFAULT_CAP: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ValueSet {
    Finite(BTreeSet<ConstExpr>),
    Infinite,
}

impl ValueSet {
    pub fn is_finite(&self) -> bool {
        matches!(self, ValueSet::Finite(_))
    }

    pub fn values(&self) -> Option<&BTreeSet<ConstExpr>> {
        match self {
            ValueSet::Finite(s) => Some(s),
            ValueSet::Infinite => None,
        }
    }

    fn union(&self, other: &ValueSet, cap: usize) -> ValueSet {
        match (self, other) {
            (ValueSet::Finite(a), ValueSet::Finite(b)) => normalize_set(a.union(b).cloned().collect(), cap),
            _ => ValueSet::Infinite,
        }
    }
}

/// Too large, or containing symbolic values that might coincide, means infinite.
fn normalize_set(s: BTreeSet<ConstExpr>, cap: usize) -> ValueSet {
    if s.len() > cap {
        return ValueSet::Infinite;
    }
    if s.iter().any(|v| !v.is_rational()) {
        let items: Vec<&ConstExpr> = s.iter().collect();
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                let d = *a - *b;
                if !d.is_rational() || d.is_zero() {
                    return ValueSet::Infinite;
                }
            }
        }
    }
    ValueSet::Finite(s)
}

/// Value sets for every program variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FiniteTypes {
    pub sets: BTreeMap<Name, ValueSet>,
}

impl FiniteTypes {
    pub fn is_finite(&self, v: &str) -> bool {
        self.sets.get(v).is_some_and(ValueSet::is_finite)
    }

    pub fn support(&self, v: &str) -> Option<&BTreeSet<ConstExpr>> {
        self.sets.get(v).and_then(ValueSet::values)
    }

    pub fn finite_vars(&self) -> BTreeSet<Name> {
        self.sets.iter().filter(|(_, s)| s.is_finite()).map(|(n, _)| n.clone()).collect()
    }
}

fn small_int(c: &ConstExpr) -> Option<i64> {
    let r = c.as_rational()?;
    if r.is_integer() {
        r.to_integer().to_i64()
    } else {
        None
    }
}

fn range(lo: i64, hi: i64, cap: usize) -> ValueSet {
    if hi < lo || (hi - lo) as u64 >= cap as u64 {
        return ValueSet::Infinite;
    }
    ValueSet::Finite((lo..=hi).map(ConstExpr::int).collect())
}

fn rhs_values(rhs: &Rhs, guard: &Cond, state: &BTreeMap<Name, ValueSet>, cap: usize) -> ValueSet {
    match rhs {
        Rhs::Dist(d) => match &*d.name {
            "Bernoulli" => ValueSet::Finite([ConstExpr::zero(), ConstExpr::one()].into()),
            "Binomial" => match small_int(&d.params[0]) {
                Some(n) => range(0, n, cap),
                None => ValueSet::Infinite,
            },
            "DiscreteUniform" => match (small_int(&d.params[0]), small_int(&d.params[1])) {
                (Some(a), Some(b)) => range(a, b, cap),
                _ => ValueSet::Infinite,
            },
            _ => ValueSet::Infinite,
        },
        Rhs::Categorical(opts) => {
            // Enumerate the joint values of everything read, skipping states in
            // which the guard is definitely false.
            let mut vars: BTreeSet<Name> = opts.iter().flat_map(|(p, _)| p.vars()).collect();
            let guard_vars = guard.vars();
            let use_guard = guard_vars
                .iter()
                .all(|v| matches!(state.get(v), Some(ValueSet::Finite(_))));
            if use_guard {
                vars.extend(guard_vars);
            }
            let vars: Vec<Name> = vars.into_iter().collect();
            let mut sets = Vec::new();
            for v in &vars {
                match state.get(v) {
                    Some(ValueSet::Finite(s)) => sets.push(s.iter().cloned().collect::<Vec<_>>()),
                    _ => return ValueSet::Infinite,
                }
            }
            let combos: usize = sets.iter().map(Vec::len).product();
            if combos > cap * cap * cap {
                return ValueSet::Infinite;
            }
            let mut out = BTreeSet::new();
            for_each_assignment(&vars, &sets, &mut |env| {
                if use_guard && guard.eval(env) == Some(false) {
                    return;
                }
                for (poly, _) in opts {
                    if let Some(v) = poly.eval(env) {
                        out.insert(v);
                    }
                }
            });
            normalize_set(out, cap)
        }
    }
}

/// Calls `f` for every joint choice of values from `sets`.
pub fn for_each_assignment(
    vars: &[Name],
    sets: &[Vec<ConstExpr>],
    f: &mut dyn FnMut(&BTreeMap<Name, ConstExpr>),
) {
    fn go(
        i: usize,
        vars: &[Name],
        sets: &[Vec<ConstExpr>],
        env: &mut BTreeMap<Name, ConstExpr>,
        f: &mut dyn FnMut(&BTreeMap<Name, ConstExpr>),
    ) {
        if i == vars.len() {
            f(env);
            return;
        }
        for v in &sets[i] {
            env.insert(vars[i].clone(), v.clone());
            go(i + 1, vars, sets, env, f);
        }
    }
    go(0, vars, sets, &mut BTreeMap::new(), f);
}

fn step(a: &GuardedAssignment, state: &mut BTreeMap<Name, ValueSet>, cap: usize) {
    let mut v = rhs_values(&a.rhs, &a.guard, state, cap);
    if !a.guard.is_true() {
        let d = state.get(&a.default).cloned().unwrap_or(ValueSet::Infinite);
        v = v.union(&d, cap);
    }
    state.insert(a.target.clone(), v);
}

/// Variables never set by the initialization whose entry value the body cannot
/// observe: an unconditional write precedes every read.
pub fn dead_at_entry(p: &NormalizedProgram) -> BTreeSet<Name> {
    let init: BTreeSet<&Name> = p.init.iter().map(|a| &a.target).collect();
    let mut read = BTreeSet::new();
    let mut dead = BTreeSet::new();
    for a in &p.body {
        read.extend(a.reads());
        if a.guard.is_true() && !read.contains(&a.target) && !init.contains(&a.target) {
            dead.insert(a.target.clone());
        }
    }
    dead
}

pub fn infer(p: &NormalizedProgram) -> FiniteTypes {
    infer_with_cap(p, DEFAULT_CAP)
}

pub fn infer_with_cap(p: &NormalizedProgram, cap: usize) -> FiniteTypes {
    // Uninitialized variables start at a symbolic value of the same name,
    // unless the body always overwrites them before reading them.
    let dead = dead_at_entry(p);
    let mut state: BTreeMap<Name, ValueSet> = p
        .variables
        .iter()
        .map(|v| {
            let start = if dead.contains(v) { BTreeSet::new() } else { [ConstExpr::symbol(v.clone())].into() };
            (v.clone(), ValueSet::Finite(start))
        })
        .collect();
    for a in &p.init {
        step(a, &mut state, cap);
    }
    let bound = p.variables.len().max(1) * (cap + 1) + 1;
    let mut rounds = 0;
    loop {
        let mut next = state.clone();
        for a in &p.body {
            step(a, &mut next, cap);
        }
        let mut changed = false;
        for (v, s) in next {
            let old = state.get(&v).cloned().unwrap_or(ValueSet::Infinite);
            let mut joined = old.union(&s, cap);
            if rounds > bound && joined != old {
                joined = ValueSet::Infinite;
            }
            if joined != old {
                changed = true;
                state.insert(v, joined);
            }
        }
        if !changed {
            break;
        }
        rounds += 1;
    }
    FiniteTypes { sets: state }
}

/// Values a rational set member takes, for callers that need plain numbers.
pub fn rational_support(s: &BTreeSet<ConstExpr>) -> Option<Vec<Rational>> {
    s.iter().map(|c| c.as_rational().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::normalizer::normalize;

    fn types(src: &str) -> FiniteTypes {
        infer(&normalize(&parse(src).unwrap()).unwrap())
    }

    #[test]
    fn running_example() {
        let t = types(include_str!("../benchmarks/running_example.prob"));
        assert_eq!(t.support("toggle").unwrap().len(), 2);
        for v in ["x", "y", "z", "sum", "l", "g"] {
            assert!(!t.is_finite(v), "{v}");
        }
    }

    #[test]
    fn bounded_counter_and_dists() {
        let t = types("c, b, u, w = 0, 0, 0, 0\nwhile true: if c < 3: c = c + 1 else: c = 0 end; b = Binomial(4, 1/3); u = DiscreteUniform(-1, 1); w = b + u end");
        assert_eq!(t.support("c").unwrap().len(), 4);
        assert_eq!(t.support("b").unwrap().len(), 5);
        assert_eq!(t.support("w").unwrap().len(), 7);
    }

    #[test]
    fn symbolic_values_widen_when_they_may_coincide() {
        let t = types("x, y = a, a\nwhile true: x = 1 - x; y = a + 1 {1/2} a end");
        assert!(!t.is_finite("x"));
        assert_eq!(t.support("y").unwrap().len(), 2);
    }

    #[test]
    fn cap_forces_infinite() {
        let t = types("c = 0\nwhile true: c = c + 1 end");
        assert!(!t.is_finite("c"));
    }
}
