//! Dense univariate polynomials over the rationals and exact root extraction
//! (rational roots and real quadratic surds).

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::symbolic::{rational_to_f64, ConstExpr, Rational, Surd};

/// Coefficients, lowest degree first, without trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RPoly(pub Vec<Rational>);

impl RPoly {
    pub fn new(mut c: Vec<Rational>) -> RPoly {
        while c.last().is_some_and(Zero::is_zero) {
            c.pop();
        }
        RPoly(c)
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.0.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> RPoly {
        RPoly::new(
            self.0.iter().enumerate().skip(1).map(|(i, c)| c * Rational::from_integer(BigInt::from(i))).collect(),
        )
    }

    pub fn monic(&self) -> RPoly {
        match self.0.last() {
            Some(l) => RPoly(self.0.iter().map(|c| c / l).collect()),
            None => self.clone(),
        }
    }

    /// Quotient and remainder.
    pub fn divrem(&self, d: &RPoly) -> (RPoly, RPoly) {
        let dd = d.degree().expect("division by zero polynomial");
        let lead = d.0[dd].clone();
        let mut rem = self.0.clone();
        if rem.len() <= dd {
            return (RPoly(Vec::new()), self.clone());
        }
        let mut q = vec![Rational::zero(); rem.len() - dd];
        for i in (0..q.len()).rev() {
            let c = &rem[i + dd] / &lead;
            if !c.is_zero() {
                for (j, dc) in d.0.iter().enumerate() {
                    rem[i + j] -= &c * dc;
                }
            }
            q[i] = c;
        }
        (RPoly::new(q), RPoly::new(rem))
    }

    pub fn gcd(&self, other: &RPoly) -> RPoly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.divrem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Exact quotient when `d` divides `self`.
    pub fn exact_div(&self, d: &RPoly) -> Option<RPoly> {
        let (q, r) = self.divrem(d);
        r.is_zero().then_some(q)
    }

    fn to_complex(&self) -> Vec<Complex64> {
        self.0.iter().map(|c| Complex64::new(rational_to_f64(c), 0.0)).collect()
    }
}

/// A factor of a characteristic polynomial and the roots it contributes.
#[derive(Clone, Debug)]
pub struct Root {
    pub value: Surd,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RootError {
    /// Some factor is neither linear nor a quadratic with a real surd root.
    Unsupported(String),
}

fn int_divisors(n: &BigInt, limit: u64) -> Option<Vec<u64>> {
    let n = n.abs().to_u64()?;
    if n > limit {
        return None;
    }
    let mut out = Vec::new();
    let mut i = 1u64;
    while i * i <= n {
        if n % i == 0 {
            out.push(i);
            if i * i != n {
                out.push(n / i);
            }
        }
        i += 1;
    }
    Some(out)
}

/// Integer coefficients with content removed.
fn primitive(p: &RPoly) -> Vec<BigInt> {
    let lcm = p.0.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let ints: Vec<BigInt> = p.0.iter().map(|c| (c * Rational::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
    if g.is_zero() {
        return ints;
    }
    ints.into_iter().map(|c| c / &g).collect()
}

fn rational_roots_by_divisors(p: &RPoly) -> Option<Vec<Rational>> {
    let ints = primitive(p);
    let a0 = ints.first()?;
    let an = ints.last()?;
    let num = int_divisors(a0, 1_000_000_000_000)?;
    let den = int_divisors(an, 1_000_000_000_000)?;
    if num.len() * den.len() > 200_000 {
        return None;
    }
    let mut out = Vec::new();
    for n in &num {
        for d in &den {
            if n.gcd(d) != 1 {
                continue;
            }
            for s in [1i64, -1] {
                let r = Rational::new(BigInt::from(*n) * s, BigInt::from(*d));
                if p.eval(&r).is_zero() {
                    out.push(r);
                }
            }
        }
    }
    Some(out)
}

/// Approximate complex roots by the Aberth-Ehrlich iteration.
fn numeric_roots(p: &RPoly) -> Vec<Complex64> {
    let c = p.monic().to_complex();
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let bound = 1.0 + c[..n].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(bound * 0.5, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    let eval = |x: Complex64| {
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for a in c.iter().rev() {
            d = d * x + v;
            v = v * x + a;
        }
        (v, d)
    };
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (v, d) = eval(z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / d;
            let s: Complex64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            z[i] -= w;
            moved = moved.max(w.norm() / (1.0 + z[i].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Best rational approximation by continued fractions with bounded denominator.
fn rationalize(x: f64, max_den: i64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1, mut k0, mut k1) = (0i128, 1i128, 1i128, 0i128);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > max_den as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = v - a;
        if frac.abs() < 1e-13 {
            break;
        }
        v = 1.0 / frac;
    }
    (k1 != 0).then(|| Rational::new(BigInt::from(h1), BigInt::from(k1)))
}

fn multiplicity(p: &RPoly, f: &RPoly) -> usize {
    let mut q = p.clone();
    let mut m = 0;
    while let Some(next) = q.exact_div(f) {
        q = next;
        m += 1;
    }
    m
}

/// All roots of a nonzero rational polynomial, with multiplicities.
pub fn roots(p: &RPoly) -> Result<Vec<Root>, RootError> {
    let mut out = Vec::new();
    let mut p = p.clone();
    let zeros = p.0.iter().take_while(|c| c.is_zero()).count();
    if zeros > 0 {
        out.push(Root { value: Surd::zero(), multiplicity: zeros });
        p = RPoly::new(p.0[zeros..].to_vec());
    }
    if p.degree().unwrap_or(0) == 0 {
        return Ok(out);
    }
    let sqf = p.exact_div(&p.gcd(&p.derivative())).expect("gcd divides");
    let mut rest = sqf.clone();
    let linear = |r: &Rational| RPoly(vec![-r.clone(), Rational::one()]);
    let mut found: Vec<Rational> = rational_roots_by_divisors(&sqf).unwrap_or_default();
    if found.is_empty() || found.len() < sqf.degree().unwrap_or(0) {
        for z in numeric_roots(&sqf) {
            if z.im.abs() > 1e-7 * (1.0 + z.re.abs()) {
                continue;
            }
            for den in [1_000, 1_000_000] {
                if let Some(r) = rationalize(z.re, den) {
                    if !found.contains(&r) && sqf.eval(&r).is_zero() {
                        found.push(r);
                        break;
                    }
                }
            }
        }
    }
    for r in found {
        let f = linear(&r);
        if let Some(q) = rest.exact_div(&f) {
            rest = q;
            out.push(Root { value: Surd::rational(r), multiplicity: multiplicity(&p, &f) });
        }
    }
    // What remains has no rational roots; peel off quadratic factors.
    while rest.degree().unwrap_or(0) > 0 {
        let quad = if rest.degree() == Some(2) {
            rest.monic()
        } else {
            find_quadratic(&rest).ok_or_else(|| RootError::Unsupported(describe(&rest)))?
        };
        rest = rest.exact_div(&quad).expect("factor divides");
        let m = multiplicity(&p, &quad);
        // x^2 + b x + c: roots -b/2 +- sqrt(b^2/4 - c)
        let (c, b) = (&quad.0[0], &quad.0[1]);
        let half_b = b / Rational::from_integer(BigInt::from(2));
        let disc = &half_b * &half_b - c;
        let root = Surd::sqrt_rational(&disc).ok_or_else(|| RootError::Unsupported(describe(&quad)))?;
        let center = Surd::from_const(ConstExpr::Rat(-half_b));
        out.push(Root { value: &center + &root, multiplicity: m });
        out.push(Root { value: &center - &root, multiplicity: m });
    }
    Ok(out)
}

fn find_quadratic(p: &RPoly) -> Option<RPoly> {
    let zs = numeric_roots(p);
    for i in 0..zs.len() {
        for j in i + 1..zs.len() {
            let s = zs[i] + zs[j];
            let pr = zs[i] * zs[j];
            if s.im.abs() > 1e-7 || pr.im.abs() > 1e-7 {
                continue;
            }
            for den in [1_000, 1_000_000] {
                let (Some(b), Some(c)) = (rationalize(-s.re, den), rationalize(pr.re, den)) else { continue };
                let q = RPoly(vec![c, b, Rational::one()]);
                if p.exact_div(&q).is_some() {
                    return Some(q);
                }
            }
        }
    }
    None
}

fn describe(p: &RPoly) -> String {
    let terms: Vec<String> = p
        .0
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| match i {
            0 => format!("{c}"),
            1 => format!("{c}*x"),
            _ => format!("{c}*x^{i}"),
        })
        .collect();
    format!("irreducible factor {} of degree {}", terms.join(" + "), p.degree().unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn poly(c: &[(i64, i64)]) -> RPoly {
        RPoly::new(c.iter().map(|&(n, d)| q(n, d)).collect())
    }

    fn from_roots(rs: &[Rational]) -> RPoly {
        let mut p = RPoly(vec![Rational::one()]);
        for r in rs {
            let mut next = vec![Rational::zero(); p.0.len() + 1];
            for (i, c) in p.0.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * r;
            }
            p = RPoly::new(next);
        }
        p
    }

    #[test]
    fn repeated_rational_roots() {
        let p = from_roots(&[q(1, 1), q(1, 1), q(1, 4), q(0, 1), q(-1, 1), q(1, 1)]);
        let mut rs: Vec<(String, usize)> = roots(&p).unwrap().into_iter().map(|r| (r.value.to_string(), r.multiplicity)).collect();
        rs.sort();
        assert_eq!(rs, vec![("-1".into(), 1), ("0".into(), 1), ("1".into(), 3), ("1/4".into(), 1)]);
    }

    #[test]
    fn surd_roots() {
        // (x^2 - 3/2)(x^2 - 2/3)(x - 1)
        let a = poly(&[(-3, 2), (0, 1), (1, 1)]);
        let b = poly(&[(-2, 3), (0, 1), (1, 1)]);
        let c = poly(&[(-1, 1), (1, 1)]);
        let p = RPoly::new(
            {
                let ab = mul(&a, &b);
                mul(&ab, &c)
            }
            .0,
        );
        let rs = roots(&p).unwrap();
        assert_eq!(rs.len(), 5);
        for r in &rs {
            let sq = r.value.pow(2);
            let v = sq.as_rational().cloned().unwrap();
            assert!(v == q(3, 2) || v == q(2, 3) || v == q(1, 1), "{}", r.value);
        }
    }

    #[test]
    fn complex_roots_are_unsupported() {
        assert!(roots(&poly(&[(1, 1), (0, 1), (1, 1)])).is_err());
        assert!(roots(&poly(&[(-2, 1), (0, 1), (0, 1), (1, 1)])).is_err());
    }

    fn mul(a: &RPoly, b: &RPoly) -> RPoly {
        let mut out = vec![Rational::zero(); a.0.len() + b.0.len() - 1];
        for (i, x) in a.0.iter().enumerate() {
            for (j, y) in b.0.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        RPoly::new(out)
    }
}
