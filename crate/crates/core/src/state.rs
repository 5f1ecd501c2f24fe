//! State vectors and the small amount of dense linear algebra the crate needs.

use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A point `x ∈ ℝⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound = "S: Scalar")]
pub struct StateVector<S>(Vec<S>);

impl<S: Scalar> StateVector<S> {
    pub fn new(entries: Vec<S>) -> Self {
        Self(entries)
    }

    pub fn from_f64(entries: &[f64]) -> Self {
        Self(entries.iter().map(|&v| S::lit(v)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![S::zero(); n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<S> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.0)
    }

    pub fn norm(&self) -> S {
        norm(&self.0)
    }

    pub fn distance(&self, other: &Self) -> S {
        distance(&self.0, &other.0)
    }
}

impl<S> Deref for StateVector<S> {
    type Target = [S];

    fn deref(&self) -> &[S] {
        &self.0
    }
}

impl<S> Index<usize> for StateVector<S> {
    type Output = S;

    fn index(&self, i: usize) -> &S {
        &self.0[i]
    }
}

impl<S> From<Vec<S>> for StateVector<S> {
    fn from(v: Vec<S>) -> Self {
        Self(v)
    }
}

pub fn all_finite<S: Scalar>(x: &[S]) -> bool {
    x.iter().all(|v| v.is_finite())
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Sum of squared differences `Σ (a_i - b_i)²`.
pub fn squared_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

pub fn distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    squared_distance(a, b).sqrt()
}

pub fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// `a + s·b`
pub fn axpy<S: Scalar>(a: &[S], s: S, b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

pub fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<S: Scalar>(a: &[S], s: S) -> Vec<S> {
    a.iter().map(|&x| x * s).collect()
}

pub fn midpoint<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    let half = S::lit(0.5);
    a.iter().zip(b).map(|(&x, &y)| (x + y) * half).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_is_symmetric_bitwise() {
        let a = [0.3_f64, -1.7, 2.2];
        let b = [1.1_f64, 0.4, -0.9];
        assert_eq!(distance(&a, &b).to_bits(), distance(&b, &a).to_bits());
        assert_eq!(midpoint(&a, &b), midpoint(&b, &a));
    }

    #[test]
    fn finiteness() {
        assert!(StateVector::<f64>::from_f64(&[1.0, 2.0]).is_finite());
        assert!(!StateVector::new(vec![1.0, f64::NAN]).is_finite());
        assert!(!StateVector::new(vec![f32::INFINITY]).is_finite());
    }
}
