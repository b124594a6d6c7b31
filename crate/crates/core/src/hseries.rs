//! Truncated power series in ħ with exact rational coefficients.
//!
//! A series carries its own precision: `prec = Some(n)` means the value is
//! known modulo ħ^{n+1}; `prec = None` means the series is an exact
//! polynomial in ħ. Binary operations take the smaller precision.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact rational scalar.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parse `p`, `-p` or `p/q`.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().ok()?;
        let b: BigInt = b.trim().parse().ok()?;
        if b.is_zero() {
            return None;
        }
        Some(Q::new(a, b))
    } else {
        Some(Q::from_integer(s.parse().ok()?))
    }
}

pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn factorial(n: usize) -> Q {
    let mut f = BigInt::one();
    for i in 2..=n {
        f *= BigInt::from(i);
    }
    Q::from_integer(f)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct HSeries {
    coeffs: Vec<Q>,
    prec: Option<usize>,
}

fn min_prec(a: Option<usize>, b: Option<usize>) -> Option<usize> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

impl HSeries {
    pub fn new(coeffs: Vec<Q>, prec: Option<usize>) -> Self {
        let mut s = HSeries { coeffs, prec };
        s.normalize();
        s
    }

    pub fn zero() -> Self {
        HSeries { coeffs: Vec::new(), prec: None }
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        Self::new(vec![c], None)
    }

    /// c·ħ^k, exact.
    pub fn monomial(c: Q, k: usize) -> Self {
        let mut v = vec![Q::zero(); k + 1];
        v[k] = c;
        Self::new(v, None)
    }

    /// The zero series known modulo ħ^{n+1}.
    pub fn zero_mod(n: usize) -> Self {
        HSeries { coeffs: Vec::new(), prec: Some(n) }
    }

    fn normalize(&mut self) {
        if let Some(p) = self.prec {
            self.coeffs.truncate(p + 1);
        }
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn prec(&self) -> Option<usize> {
        self.prec
    }

    pub fn with_prec(mut self, p: usize) -> Self {
        self.prec = min_prec(self.prec, Some(p));
        self.normalize();
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of ħ^k.
    pub fn coeff(&self, k: usize) -> Q {
        self.coeffs.get(k).cloned().unwrap_or_else(Q::zero)
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    /// Lowest power of ħ with a nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    /// Largest power of ħ with a nonzero coefficient.
    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn is_unit(&self) -> bool {
        !self.coeff(0).is_zero()
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return HSeries { coeffs: Vec::new(), prec: self.prec };
        }
        HSeries { coeffs: self.coeffs.iter().map(|x| x * c).collect(), prec: self.prec }
    }

    /// Multiply by ħ^k.
    pub fn shift(&self, k: usize) -> Self {
        let mut v = vec![Q::zero(); k];
        v.extend(self.coeffs.iter().cloned());
        Self::new(v, self.prec.map(|p| p + k))
    }

    /// Divide by ħ^k; the lowest k coefficients must vanish.
    pub fn unshift(&self, k: usize) -> Option<Self> {
        if self.coeffs.iter().take(k).any(|c| !c.is_zero()) {
            return None;
        }
        let v = self.coeffs.iter().skip(k).cloned().collect();
        Some(Self::new(v, self.prec.map(|p| p.saturating_sub(k))))
    }

    /// Inverse modulo ħ^{n+1}, where n is the precision (or `order` when exact).
    pub fn inverse(&self, order: usize) -> Option<Self> {
        let a0 = self.coeff(0);
        if a0.is_zero() {
            return None;
        }
        let n = self.prec.unwrap_or(order).min(order);
        let inv0 = a0.recip();
        let mut out = vec![Q::zero(); n + 1];
        out[0] = inv0.clone();
        for k in 1..=n {
            let mut acc = Q::zero();
            for j in 1..=k {
                if j < self.coeffs.len() {
                    acc += &self.coeffs[j] * &out[k - j];
                }
            }
            out[k] = -acc * &inv0;
        }
        Some(Self::new(out, Some(n)))
    }

    pub fn truncate(&self, n: usize) -> Self {
        self.clone().with_prec(n)
    }
}

impl fmt::Debug for HSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for HSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let cs = fmt_q(c);
            parts.push(match k {
                0 => cs,
                1 => format!("{}*hbar", cs),
                _ => format!("{}*hbar^{}", cs, k),
            });
        }
        if parts.is_empty() {
            parts.push("0".into());
        }
        write!(f, "{}", parts.join(" + "))?;
        if let Some(p) = self.prec {
            write!(f, " + O(hbar^{})", p + 1)?;
        }
        Ok(())
    }
}

impl<'a> Add<&'a HSeries> for &'a HSeries {
    type Output = HSeries;
    fn add(self, rhs: &HSeries) -> HSeries {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut v = Vec::with_capacity(n);
        for k in 0..n {
            v.push(match (self.coeffs.get(k), rhs.coeffs.get(k)) {
                (Some(a), Some(b)) => a + b,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => Q::zero(),
            });
        }
        HSeries::new(v, min_prec(self.prec, rhs.prec))
    }
}

impl AddAssign<&HSeries> for HSeries {
    fn add_assign(&mut self, rhs: &HSeries) {
        if self.coeffs.len() < rhs.coeffs.len() {
            self.coeffs.resize(rhs.coeffs.len(), Q::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a += b;
        }
        self.prec = min_prec(self.prec, rhs.prec);
        self.normalize();
    }
}

impl<'a> Sub<&'a HSeries> for &'a HSeries {
    type Output = HSeries;
    fn sub(self, rhs: &HSeries) -> HSeries {
        self + &(-rhs)
    }
}

impl Neg for &HSeries {
    type Output = HSeries;
    fn neg(self) -> HSeries {
        HSeries { coeffs: self.coeffs.iter().map(|c| -c).collect(), prec: self.prec }
    }
}

impl<'a> Mul<&'a HSeries> for &'a HSeries {
    type Output = HSeries;
    fn mul(self, rhs: &HSeries) -> HSeries {
        let prec = min_prec(self.prec, rhs.prec);
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return HSeries { coeffs: Vec::new(), prec };
        }
        let mut n = self.coeffs.len() + rhs.coeffs.len() - 1;
        if let Some(p) = prec {
            n = n.min(p + 1);
        }
        let mut v = vec![Q::zero(); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if i + j >= n {
                    break;
                }
                v[i + j] += a * b;
            }
        }
        HSeries::new(v, prec)
    }
}

impl From<Q> for HSeries {
    fn from(c: Q) -> Self {
        HSeries::constant(c)
    }
}

/// Absolute value of the largest coefficient, for compact residual reports.
pub fn max_abs(s: &HSeries) -> Q {
    s.coeffs.iter().map(|c| c.abs()).max().unwrap_or_else(Q::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_unit() {
        let a = HSeries::new(vec![q(2), q(3), qf(1, 2)], None);
        let inv = a.inverse(5).unwrap();
        let prod = &a * &inv;
        assert_eq!(prod, HSeries::one().with_prec(5));
    }

    #[test]
    fn non_unit_has_no_inverse() {
        let a = HSeries::monomial(q(1), 1);
        assert!(a.inverse(3).is_none());
    }

    #[test]
    fn truncation_is_respected() {
        let a = HSeries::new(vec![q(1), q(1)], Some(2));
        let b = &(&a * &a) * &a;
        assert_eq!(b.coeffs(), &[q(1), q(3), q(3)]);
        assert_eq!(b.prec(), Some(2));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_q("-3/6").unwrap(), qf(-1, 2));
        assert_eq!(fmt_q(&qf(-1, 2)), "-1/2");
        assert!(parse_q("1/0").is_none());
    }
}
