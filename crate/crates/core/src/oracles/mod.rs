//! Brute-force references for the closed-form results used by the
//! explainers: subset probabilities, a conditional variance, an integral,
//! the conditional expectation of attention under LIME, and the scaling of
//! the attention-based LIME approximation.

pub mod integral;
pub mod probability;
pub mod prop1;
pub mod scaling;
pub mod subsets;
pub mod variance;

/// Median of a non-empty sample; the mean of the two middle values for
/// even sizes.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}
