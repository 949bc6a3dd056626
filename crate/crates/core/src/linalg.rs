//! Exact dense linear algebra over the constant field and its quadratic extensions.

use num_traits::{One, Zero};

use crate::symbolic::{ConstExpr, Rational, Surd};

/// The operations Gaussian elimination needs.
pub trait Field: Clone + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Option<Self>;
    fn sub(&self, o: &Self) -> Option<Self>;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn div(&self, o: &Self) -> Option<Self>;
}

impl Field for ConstExpr {
    fn zero() -> Self {
        ConstExpr::zero()
    }
    fn one() -> Self {
        ConstExpr::one()
    }
    fn is_zero(&self) -> bool {
        ConstExpr::is_zero(self)
    }
    fn add(&self, o: &Self) -> Option<Self> {
        Some(self + o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        self.checked_div(o)
    }
}

impl Field for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Option<Self> {
        Some(self + o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        (!Zero::is_zero(o)).then(|| self / o)
    }
}

impl Field for Surd {
    fn zero() -> Self {
        Surd::zero()
    }
    fn one() -> Self {
        Surd::one()
    }
    fn is_zero(&self) -> bool {
        Surd::is_zero(self)
    }
    fn add(&self, o: &Self) -> Option<Self> {
        self.checked_add(o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        self.checked_sub(o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        self.checked_mul(o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        self.checked_div(o)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is singular")]
    Singular,
    #[error("entries live in incompatible quadratic fields")]
    MixedFields,
}

/// Solves `a * x = b` for each column of `b` by Gauss-Jordan elimination.
pub fn solve_many<F: Field>(a: &[Vec<F>], b: &[Vec<F>]) -> Result<Vec<Vec<F>>, LinalgError> {
    let n = a.len();
    let cols = b.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<F>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| row.iter().chain(rhs).cloned().collect())
        .collect();
    let mixed = |_| LinalgError::MixedFields;
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].is_zero()).ok_or(LinalgError::Singular)?;
        m.swap(c, p);
        let inv = F::one().div(&m[c][c]).ok_or(LinalgError::Singular)?;
        for k in c..n + cols {
            m[c][k] = m[c][k].mul(&inv).ok_or(()).map_err(mixed)?;
        }
        for r in 0..n {
            if r == c || m[r][c].is_zero() {
                continue;
            }
            let f = m[r][c].clone();
            for k in c..n + cols {
                let t = f.mul(&m[c][k]).ok_or(()).map_err(mixed)?;
                m[r][k] = m[r][k].sub(&t).ok_or(()).map_err(mixed)?;
            }
        }
    }
    Ok(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Solves `a * x = b` over the rationals with fraction-free (Bareiss)
/// elimination on the denominator-cleared system, which avoids a gcd per
/// arithmetic step.
pub fn solve_many_rational(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Result<Vec<Vec<Rational>>, LinalgError> {
    use num_bigint::BigInt;
    use num_integer::Integer;
    let n = a.len();
    let cols = b.first().map_or(0, Vec::len);
    let w = n + cols;
    let mut m: Vec<Vec<BigInt>> = Vec::with_capacity(n);
    for (row, rhs) in a.iter().zip(b) {
        let lcm = row.iter().chain(rhs).fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        m.push(row.iter().chain(rhs).map(|x| x.numer() * (&lcm / x.denom())).collect());
    }
    let mut prev = BigInt::one();
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].is_zero()).ok_or(LinalgError::Singular)?;
        m.swap(c, p);
        for r in c + 1..n {
            for k in c + 1..w {
                let v = (&m[c][c] * &m[r][k] - &m[r][c] * &m[c][k]) / &prev;
                m[r][k] = v;
            }
            m[r][c] = BigInt::zero();
        }
        prev = m[c][c].clone();
    }
    // Back substitution in the rationals.
    let mut x = vec![vec![<Rational as Zero>::zero(); cols]; n];
    for i in (0..n).rev() {
        for j in 0..cols {
            let mut acc = Rational::from_integer(m[i][n + j].clone());
            for k in i + 1..n {
                if !m[i][k].is_zero() {
                    acc -= &x[k][j] * Rational::from_integer(m[i][k].clone());
                }
            }
            x[i][j] = acc / Rational::from_integer(m[i][i].clone());
        }
    }
    Ok(x)
}

/// Like [`solve_many`] for surd systems, but when `a` is purely rational it is
/// inverted over the rationals first, which is much cheaper than eliminating
/// with symbolic entries.
pub fn solve_many_surd(a: &[Vec<Surd>], b: &[Vec<Surd>]) -> Result<Vec<Vec<Surd>>, LinalgError> {
    let rational: Option<Vec<Vec<Rational>>> =
        a.iter().map(|row| row.iter().map(|x| x.as_rational().cloned()).collect()).collect();
    let Some(ra) = rational else {
        return solve_many(a, b);
    };
    let inv = solve_many_rational(&ra, &identity(ra.len()))?;
    let cols = b.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(inv.len());
    for row in &inv {
        let mut r = vec![Surd::zero(); cols];
        for (k, c) in row.iter().enumerate() {
            if Zero::is_zero(c) {
                continue;
            }
            let c = Surd::rational(c.clone());
            for (j, slot) in r.iter_mut().enumerate() {
                let t = c.checked_mul(&b[k][j]).ok_or(LinalgError::MixedFields)?;
                *slot = slot.checked_add(&t).ok_or(LinalgError::MixedFields)?;
            }
        }
        out.push(r);
    }
    Ok(out)
}

pub fn solve<F: Field>(a: &[Vec<F>], b: &[F]) -> Result<Vec<F>, LinalgError> {
    let b: Vec<Vec<F>> = b.iter().map(|x| vec![x.clone()]).collect();
    Ok(solve_many(a, &b)?.into_iter().map(|mut r| r.remove(0)).collect())
}

pub fn identity<F: Field>(n: usize) -> Vec<Vec<F>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { F::one() } else { F::zero() }).collect()).collect()
}

pub fn invert<F: Field>(a: &[Vec<F>]) -> Result<Vec<Vec<F>>, LinalgError> {
    solve_many(a, &identity(a.len()))
}

pub fn mat_mul<F: Field>(a: &[Vec<F>], b: &[Vec<F>]) -> Result<Vec<Vec<F>>, LinalgError> {
    let mut out = Vec::with_capacity(a.len());
    for row in a {
        let mut r = Vec::with_capacity(b.first().map_or(0, Vec::len));
        for j in 0..b.first().map_or(0, Vec::len) {
            let mut acc = F::zero();
            for (k, x) in row.iter().enumerate() {
                if x.is_zero() || b[k][j].is_zero() {
                    continue;
                }
                let t = x.mul(&b[k][j]).ok_or(LinalgError::MixedFields)?;
                acc = acc.add(&t).ok_or(LinalgError::MixedFields)?;
            }
            r.push(acc);
        }
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> ConstExpr {
        ConstExpr::ratio(n, d)
    }

    #[test]
    fn inverse_roundtrip() {
        let a = vec![vec![q(2, 1), q(1, 1)], vec![q(1, 3), q(0, 1)]];
        let inv = invert(&a).unwrap();
        assert_eq!(mat_mul(&a, &inv).unwrap(), identity(2));
    }

    #[test]
    fn singular_detected() {
        let a = vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]];
        assert_eq!(invert(&a), Err(LinalgError::Singular));
    }

    #[test]
    fn symbolic_entries() {
        let p = ConstExpr::symbol("p");
        let a = vec![vec![p.clone(), ConstExpr::one()], vec![ConstExpr::zero(), ConstExpr::one()]];
        let x = solve(&a, &[ConstExpr::one(), ConstExpr::one()]).unwrap();
        assert!(x[0].is_zero());
        assert!(x[1].is_one());
    }
}
