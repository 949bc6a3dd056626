//! Results derived from closed-form moments: central moments, tail bounds,
//! distribution recovery, limits after termination and Gram-Charlier series.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;

use crate::reduction::{inverse_via_symmetric_polys, ReductionError};
use crate::symbolic::{ConstExpr, ExpPoly, ExpTerm, Surd, SymbolicError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ToolkitError {
    #[error("threshold must be positive")]
    NonPositiveThreshold,
    #[error("denominator vanishes at n = {0}")]
    ZeroDenominator(u64),
    #[error(transparent)]
    DegenerateSupport(#[from] ReductionError),
    #[error("limit does not exist: {0}")]
    LimitDoesNotExist(String),
    #[error("cannot compare magnitudes of symbolic bases")]
    IndeterminateWithSymbolicBases,
    #[error("variance is not positive")]
    DegenerateVariance,
    #[error("need moments up to order {0}")]
    MissingMoments(usize),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

fn konst(c: &ConstExpr) -> Surd {
    Surd::from_const(c.clone())
}

/// Central moments `E((X - E X)^k)` for `k = 0 ..= raw.len() - 1`.
pub fn central_moments(raw: &[ExpPoly]) -> Result<Vec<ExpPoly>, ToolkitError> {
    if raw.len() < 2 {
        return Ok(raw.to_vec());
    }
    let minus_mean = raw[1].neg();
    let mut powers = vec![ExpPoly::constant(Surd::one())];
    for i in 1..raw.len() {
        powers.push(powers[i - 1].mul(&minus_mean)?);
    }
    let mut out = Vec::with_capacity(raw.len());
    for k in 0..raw.len() {
        let mut acc = ExpPoly::zero();
        for i in 0..=k {
            let term = raw[i].mul(&powers[k - i])?.scale(&Surd::int(binomial(k, i)))?;
            acc = acc.add(&term)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Markov: `P(X >= t) <= E(X^k) / t^k` for non-negative `X`.
pub fn markov_bound(raw: &[ExpPoly], t: &ConstExpr, k: usize) -> Result<ExpPoly, ToolkitError> {
    if t.sign() != Some(Ordering::Greater) {
        return Err(ToolkitError::NonPositiveThreshold);
    }
    let m = raw.get(k).ok_or(ToolkitError::MissingMoments(k))?;
    let scale = t.pow(k as i64).recip().ok_or(ToolkitError::NonPositiveThreshold)?;
    Ok(m.scale(&konst(&scale))?)
}

/// A ratio of closed forms, reduced to a single closed form when possible.
#[derive(Clone, Debug, Serialize)]
pub struct Ratio {
    pub numerator: ExpPoly,
    pub denominator: ExpPoly,
    pub simplified: Option<ExpPoly>,
}

impl Ratio {
    pub fn new(numerator: ExpPoly, denominator: ExpPoly) -> Ratio {
        let simplified = divide(&numerator, &denominator);
        Ratio { numerator, denominator, simplified }
    }

    pub fn eval(&self, n: u64) -> Result<Surd, ToolkitError> {
        let d = self.denominator.eval(n);
        if d.is_zero() {
            return Err(ToolkitError::ZeroDenominator(n));
        }
        self.numerator.eval(n).checked_div(&d).ok_or(ToolkitError::ZeroDenominator(n))
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.simplified {
            Some(s) => write!(f, "{s}"),
            None => write!(f, "({}) / ({})", self.numerator, self.denominator),
        }
    }
}

/// Exact quotient when the denominator's main part is a single `c * b^n` term.
fn divide(num: &ExpPoly, den: &ExpPoly) -> Option<ExpPoly> {
    let [t] = den.terms() else { return None };
    let [c] = t.coeffs.as_slice() else { return None };
    let cinv = c.recip()?;
    let binv = t.base.recip()?;
    let mut terms = Vec::new();
    for nt in num.terms() {
        terms.push(ExpTerm {
            coeffs: nt.coeffs.iter().map(|x| x.checked_mul(&cinv)).collect::<Option<_>>()?,
            base: nt.base.checked_mul(&binv)?,
        });
    }
    let main = ExpPoly::from_parts(terms, BTreeMap::new()).ok()?;
    let mut corr = BTreeMap::new();
    let idx = num.corrections().keys().chain(den.corrections().keys());
    for &n in idx {
        let d = den.eval(n);
        let exact = num.eval(n).checked_div(&d)?;
        let diff = exact.checked_sub(&main.eval_main(n))?;
        if !diff.is_zero() {
            corr.insert(n, diff);
        }
    }
    ExpPoly::from_parts(main.terms().to_vec(), corr).ok()
}

/// Paley-Zygmund: `P(X > t) >= (E X - t)^2 / (E X^2 - 2t E X + t^2)` when `X >= t` a.s.
pub fn paley_zygmund(m1: &ExpPoly, m2: &ExpPoly, t: &ConstExpr) -> Result<Ratio, ToolkitError> {
    let tt = ExpPoly::constant(konst(t));
    let diff = m1.sub(&tt)?;
    let num = diff.mul(&diff)?;
    let den = m2.sub(&m1.scale(&konst(&(&ConstExpr::int(2) * t)))?)?.add(&ExpPoly::constant(konst(&(t * t))))?;
    Ok(Ratio::new(num, den))
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveredDistribution {
    pub support: Vec<ConstExpr>,
    pub probabilities: Vec<ExpPoly>,
}

/// Probabilities of each support point from the moments `E(X^0) .. E(X^{m-1})`.
pub fn recover_distribution(support: &[ConstExpr], raw: &[ExpPoly]) -> Result<RecoveredDistribution, ToolkitError> {
    let m = support.len();
    if raw.len() < m {
        return Err(ToolkitError::MissingMoments(m - 1));
    }
    let inv = inverse_via_symmetric_polys(support)?;
    let mut probabilities = Vec::with_capacity(m);
    for row in &inv {
        let mut acc = ExpPoly::zero();
        for (j, c) in row.iter().enumerate() {
            if !c.is_zero() {
                acc = acc.add(&raw[j].scale(&konst(c))?)?;
            }
        }
        probabilities.push(acc);
    }
    Ok(RecoveredDistribution { support: support.to_vec(), probabilities })
}

/// Dominant behaviour of the main part: largest |base|, then highest n-degree.
struct Leading {
    magnitude: Surd,
    degree: usize,
    /// Coefficient of `n^degree * base^n` for every base of that magnitude.
    coeffs: Vec<(Surd, Surd)>,
}

fn leading(e: &ExpPoly) -> Result<Option<Leading>, ToolkitError> {
    let mut best: Option<Leading> = None;
    for t in e.terms() {
        let mag = t.base.abs().ok_or(ToolkitError::IndeterminateWithSymbolicBases)?;
        let deg = t.coeffs.len() - 1;
        let coeff = t.coeffs[deg].clone();
        match &mut best {
            None => best = Some(Leading { magnitude: mag, degree: deg, coeffs: vec![(t.base.clone(), coeff)] }),
            Some(b) => {
                let ord = mag.cmp_value(&b.magnitude).ok_or(ToolkitError::IndeterminateWithSymbolicBases)?;
                match ord.then(deg.cmp(&b.degree)) {
                    Ordering::Greater => {
                        *b = Leading { magnitude: mag, degree: deg, coeffs: vec![(t.base.clone(), coeff)] };
                    }
                    Ordering::Equal => b.coeffs.push((t.base.clone(), coeff)),
                    Ordering::Less => {}
                }
            }
        }
    }
    Ok(best)
}

/// `lim_{n -> oo} num(n) / den(n)` for exponential polynomials.
pub fn limit_of_ratio(num: &ExpPoly, den: &ExpPoly) -> Result<Surd, ToolkitError> {
    let d = leading(den)?.ok_or_else(|| ToolkitError::LimitDoesNotExist("denominator is eventually zero".into()))?;
    let [(base, dc)] = d.coeffs.as_slice() else {
        return Err(ToolkitError::LimitDoesNotExist("denominator oscillates".into()));
    };
    if base.sign() != Some(Ordering::Greater) {
        return Err(ToolkitError::LimitDoesNotExist("denominator oscillates".into()));
    }
    let Some(nl) = leading(num)? else { return Ok(Surd::zero()) };
    let ord = nl.magnitude.cmp_value(&d.magnitude).ok_or(ToolkitError::IndeterminateWithSymbolicBases)?;
    match ord.then(nl.degree.cmp(&d.degree)) {
        Ordering::Less => Ok(Surd::zero()),
        Ordering::Greater => Err(ToolkitError::LimitDoesNotExist("numerator dominates".into())),
        Ordering::Equal => {
            let [(nb, nc)] = nl.coeffs.as_slice() else {
                return Err(ToolkitError::LimitDoesNotExist("numerator oscillates".into()));
            };
            if nb != base {
                return Err(ToolkitError::LimitDoesNotExist("numerator oscillates".into()));
            }
            nc.checked_div(dc).ok_or_else(|| ToolkitError::LimitDoesNotExist("mixed fields".into()))
        }
    }
}

/// Coefficients `c_j = E(He_j(Z)) / j!` of the Gram-Charlier A series for the
/// standardized variable `Z`, from numeric raw moments.
pub fn gram_charlier(raw: &[f64], order: usize) -> Result<GramCharlier, ToolkitError> {
    if raw.len() <= order.max(2) {
        return Err(ToolkitError::MissingMoments(order.max(2)));
    }
    let mean = raw[1];
    let var = raw[2] - mean * mean;
    if !(var > 0.0) {
        return Err(ToolkitError::DegenerateVariance);
    }
    let sd = var.sqrt();
    // Standardized moments E(Z^j).
    // The first three are 1, 0, 1 by construction; pin them to avoid rounding noise.
    let z: Vec<f64> = (0..=order)
        .map(|j| match j {
            0 | 2 => 1.0,
            1 => 0.0,
            _ => {
            (0..=j).map(|i| binomial(j, i) as f64 * raw[i] * (-mean).powi((j - i) as i32)).sum::<f64>() / sd.powi(j as i32)
            }
        })
        .collect();
    let mut coeffs = Vec::with_capacity(order + 1);
    let mut fact = 1.0f64;
    for j in 0..=order {
        if j > 0 {
            fact *= j as f64;
        }
        let he: f64 = hermite_coeffs(j).iter().enumerate().map(|(p, c)| c * z[p]).sum();
        coeffs.push(he / fact);
    }
    Ok(GramCharlier { mean, sd, coeffs })
}

/// Probabilists' Hermite polynomial `He_j`, coefficients lowest first.
fn hermite_coeffs(j: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if j == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for k in 1..j {
        // He_{k+1} = x He_k - k He_{k-1}
        let mut next = vec![0.0; k + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= k as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Clone, Debug, Serialize)]
pub struct GramCharlier {
    pub mean: f64,
    pub sd: f64,
    pub coeffs: Vec<f64>,
}

impl GramCharlier {
    pub fn density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        let phi = (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let series: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * hermite_coeffs(j).iter().enumerate().map(|(p, h)| h * z.powi(p as i32)).sum::<f64>())
            .sum();
        phi * series / self.sd
    }
}
