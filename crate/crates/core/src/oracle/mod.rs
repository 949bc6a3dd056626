//! Independent reference semantics: an exact enumerator for finite discrete
//! programs and a seeded Monte Carlo sampler for everything else. Both
//! interpret the parsed program directly, without any of the analysis passes.

pub mod exact;
pub mod sampler;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::dsl::{AssignRhs, BoolExpr, Expr, ProgramAst};
use crate::symbolic::{rational_to_f64, Name, Rational};

pub use exact::{enumerate, enumerate_iterations, ExactDistribution, DEFAULT_STATE_CAP};
pub use sampler::{estimate_moment, sample_states, Estimate};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("more than {0} states")]
    StateExplosion(usize),
    #[error("{0} is not a finite discrete distribution")]
    ContinuousDistribution(String),
    #[error("no value bound for `{0}`")]
    Unbound(String),
    #[error("invalid parameters for {0}")]
    BadParameters(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("need at least {0} samples")]
    TooFewSamples(usize),
}

/// Numbers the interpreters compute with.
pub trait Scalar: Clone + PartialOrd {
    fn from_rational(r: &Rational) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Option<Self>;
    fn neg(&self) -> Self;
    fn one() -> Self;
}

impl Scalar for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Option<Self> {
        (!o.is_zero()).then(|| self / o)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn one() -> Self {
        <Rational as One>::one()
    }
}

impl Scalar for f64 {
    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Option<Self> {
        (*o != 0.0).then(|| self / o)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn one() -> Self {
        1.0
    }
}

/// Variable values plus bindings for symbolic constants.
pub struct Env<'a, T> {
    pub index: &'a BTreeMap<Name, usize>,
    pub state: &'a [Option<T>],
    pub bindings: &'a BTreeMap<Name, T>,
}

impl<T: Scalar> Env<'_, T> {
    fn lookup(&self, n: &str) -> Result<T, OracleError> {
        if let Some(&i) = self.index.get(n) {
            if let Some(v) = &self.state[i] {
                return Ok(v.clone());
            }
        }
        self.bindings.get(n).cloned().ok_or_else(|| OracleError::Unbound(n.to_string()))
    }

    /// Value of `n` for a plain copy; copying a still-unset variable yields unset.
    pub fn copy(&self, n: &str) -> Result<Option<T>, OracleError> {
        match self.index.get(n) {
            Some(&i) if self.state[i].is_none() && !self.bindings.contains_key(n) => Ok(None),
            _ => self.lookup(n).map(Some),
        }
    }

    pub fn eval(&self, e: &Expr) -> Result<T, OracleError> {
        Ok(match e {
            Expr::Num(r) => T::from_rational(r),
            Expr::Ident(n) => self.lookup(n)?,
            Expr::Neg(a) => self.eval(a)?.neg(),
            Expr::Add(a, b) => self.eval(a)?.add(&self.eval(b)?),
            Expr::Sub(a, b) => self.eval(a)?.sub(&self.eval(b)?),
            Expr::Mul(a, b) => self.eval(a)?.mul(&self.eval(b)?),
            Expr::Div(a, b) => self.eval(a)?.div(&self.eval(b)?).ok_or(OracleError::DivisionByZero)?,
            Expr::Pow(a, k) => {
                let base = self.eval(a)?;
                (0..*k).fold(T::one(), |acc, _| acc.mul(&base))
            }
        })
    }

    pub fn holds(&self, b: &BoolExpr) -> Result<bool, OracleError> {
        Ok(match b {
            BoolExpr::True => true,
            BoolExpr::False => false,
            BoolExpr::Cmp(op, l, r) => {
                let (l, r) = (self.eval(l)?, self.eval(r)?);
                op.holds(l.partial_cmp(&r).unwrap_or(Ordering::Equal))
            }
            BoolExpr::Not(a) => !self.holds(a)?,
            BoolExpr::And(a, b) => self.holds(a)? && self.holds(b)?,
            BoolExpr::Or(a, b) => self.holds(a)? || self.holds(b)?,
        })
    }
}

/// Index of every program variable in a state vector.
/// The variable read by an assignment of the form `x = y`.
pub fn plain_copy(rhs: &AssignRhs) -> Option<&Name> {
    match rhs {
        AssignRhs::Categorical(opts) => match opts.as_slice() {
            [(Expr::Ident(v), None)] => Some(v),
            _ => None,
        },
        AssignRhs::Dist { .. } => None,
    }
}

pub fn variable_index(p: &ProgramAst) -> BTreeMap<Name, usize> {
    p.variables.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect()
}

/// Starting state: variables hold the binding of their own name, if any,
/// and are otherwise undefined until assigned.
pub fn initial_state<T: Scalar>(p: &ProgramAst, bindings: &BTreeMap<Name, T>) -> Vec<Option<T>> {
    p.variables.iter().map(|v| bindings.get(v).cloned()).collect()
}

/// Rational bindings converted for the sampler.
pub fn float_bindings(b: &BTreeMap<Name, Rational>) -> BTreeMap<Name, f64> {
    b.iter().map(|(k, v)| (k.clone(), rational_to_f64(v))).collect()
}
