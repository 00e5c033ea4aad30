use serde::{Deserialize, Serialize};

use super::{Jet, Sign};
use crate::error::{Result, ZooError};

/// Taylor coefficients `a_j^k`, `k = 0..=order`, of a Cabbatonian level
/// expanded in powers of `H0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffTable {
    pub level: usize,
    pub coeffs: Vec<f64>,
}

impl CoeffTable {
    /// The series of `H0` itself: level 0.
    pub fn identity(order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        if order >= 1 {
            coeffs[1] = 1.0;
        }
        CoeffTable { level: 0, coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, e: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, a| acc * e + a)
    }

    /// Polynomial value with first and second derivatives (Horner).
    pub fn jet(&self, e: f64) -> Jet {
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for a in self.coeffs.iter().rev() {
            d2 = d2 * e + 2.0 * d1;
            d1 = d1 * e + v;
            v = v * e + a;
        }
        Jet { value: v, d1, d2 }
    }
}

/// `a_1^k = (1/k!) (s / m λ^2)^(k-1)` for the first level, which is the
/// Taylor expansion of `s m λ^2 e^{s H0 / m λ^2}`.
pub fn series_coeffs(j: usize, lambda1: f64, m: f64, sign: Sign, order: usize) -> Result<CoeffTable> {
    if j != 1 {
        return Err(ZooError::InvalidSpec(format!(
            "closed-form coefficients exist only for j = 1 (got j = {j}); use compose_series"
        )));
    }
    if !(lambda1 > 0.0 && lambda1.is_finite()) {
        return Err(ZooError::InvalidSpec(format!("lambda must be positive, got {lambda1}")));
    }
    let ratio = sign.value() / (m * lambda1 * lambda1);
    let mut coeffs = Vec::with_capacity(order + 1);
    // k = 0 is (1/0!) ratio^{-1}
    let mut term = 1.0 / ratio;
    for k in 0..=order {
        if k > 0 {
            term *= ratio / k as f64;
        }
        coeffs.push(term);
    }
    Ok(CoeffTable { level: 1, coeffs })
}

/// Coefficients of `s m λ^2 exp(s · inner / (m λ^2))`, truncated at `order`.
///
/// Uses `B = exp(A)` ⇒ `B' = A' B`, i.e. `b_n = (1/n) Σ_{k=1}^{n} k a_k b_{n-k}`.
pub fn compose_series(inner: &CoeffTable, lambda_next: f64, m: f64, sign: Sign, order: usize) -> CoeffTable {
    let s = sign.value();
    let omega = m * lambda_next * lambda_next;
    let scaled: Vec<f64> = (0..=order)
        .map(|k| inner.coeffs.get(k).copied().unwrap_or(0.0) * s / omega)
        .collect();
    let mut b = vec![0.0; order + 1];
    b[0] = scaled[0].exp();
    for n in 1..=order {
        let acc: f64 = (1..=n).map(|k| k as f64 * scaled[k] * b[n - k]).sum();
        b[n] = acc / n as f64;
    }
    CoeffTable {
        level: inner.level + 1,
        coeffs: b.into_iter().map(|v| s * omega * v).collect(),
    }
}
