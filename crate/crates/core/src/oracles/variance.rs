//! Conditional mean and variance of
//! `H_S = Σ_i a_i 1{i ∉ S} + b_i 1{i ∈ S}` given `|S| = s` and `ℓ ∉ S`.

use super::probability::MAX_GROUND_SET;
use super::subsets::SizedSubsets;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub ell: usize,
}

impl CoefficientPair {
    pub fn new(a: Vec<f64>, b: Vec<f64>, ell: usize) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                context: "coefficient pair",
                expected: a.len(),
                got: b.len(),
            });
        }
        if ell >= a.len() {
            return Err(Error::invalid(format!("ell = {ell} outside [0, {})", a.len())));
        }
        Ok(Self { a, b, ell })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    fn check(&self, s: usize) -> Result<()> {
        let n = self.len();
        if n < 3 {
            return Err(Error::invalid(format!("need n >= 3, got {n}")));
        }
        if s >= n {
            return Err(Error::invalid(format!("need s <= n - 1 = {}, got {s}", n - 1)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

/// Closed-form conditional mean and variance.
pub fn cond_variance_formula(pair: &CoefficientPair, s: usize) -> Result<Moments> {
    pair.check(s)?;
    let n = pair.len() as f64;
    let s = s as f64;
    let l = pair.ell;
    let sum_a: f64 = pair.a.iter().sum();
    let sum_b: f64 = pair.b.iter().sum();
    let mean = (n - 1.0 - s) / (n - 1.0) * sum_a + s / (n - 1.0) * sum_b + s / (n - 1.0) * (pair.a[l] - pair.b[l]);

    let c: Vec<f64> = pair.a.iter().zip(&pair.b).map(|(a, b)| a - b).collect();
    let c_bar = c.iter().sum::<f64>() / n;
    let emp_var = c.iter().map(|x| (x - c_bar).powi(2)).sum::<f64>() / n;
    let dev = c[l] - c_bar;
    let variance = n * s * (n - s - 1.0) / ((n - 1.0) * (n - 2.0)) * (emp_var - dev * dev / (n - 1.0));
    Ok(Moments { mean, variance })
}

/// Conditional mean and variance by enumerating every `s`-subset of
/// `[n] ∖ {ℓ}`.
pub fn cond_variance_enumerate(pair: &CoefficientPair, s: usize) -> Result<Moments> {
    pair.check(s)?;
    let n = pair.len();
    if n > MAX_GROUND_SET {
        return Err(Error::EnumerationLimit {
            d: n,
            limit: MAX_GROUND_SET,
        });
    }
    let values: Vec<f64> = SizedSubsets::new(n, s)
        .filter(|m| m >> pair.ell & 1 == 0)
        .map(|m| {
            (0..n)
                .map(|i| if m >> i & 1 == 1 { pair.b[i] } else { pair.a[i] })
                .sum()
        })
        .collect();
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
    Ok(Moments { mean, variance })
}
