//! `∫₀¹ x / (1 + a x) dx` three ways.

use crate::error::{Error, Result};

fn check(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("need a finite a > 0, got {a}")));
    }
    Ok(())
}

/// `(a − ln(1 + a)) / a²`.
///
/// Below `1e-4` the difference cancels badly, so the alternating series
/// `Σ_k (−a)^k / (k + 2)` is summed instead.
pub fn integral_closed_form(a: f64) -> Result<f64> {
    check(a)?;
    if a < 1e-4 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 0..8 {
            sum += term / (k + 2) as f64;
            term *= -a;
        }
        return Ok(sum);
    }
    Ok((a - a.ln_1p()) / (a * a))
}

/// Composite trapezoid rule with `panels` subintervals.
pub fn integral_quadrature(a: f64, panels: usize) -> Result<f64> {
    check(a)?;
    if panels == 0 {
        return Err(Error::invalid("quadrature needs at least one panel"));
    }
    let f = |x: f64| x / (1.0 + a * x);
    let h = 1.0 / panels as f64;
    let inner: f64 = (1..panels).map(|i| f(i as f64 * h)).sum();
    Ok(h * (0.5 * (f(0.0) + f(1.0)) + inner))
}

/// First-order expansion `1/2 − a/3`.
pub fn integral_small_a(a: f64) -> f64 {
    0.5 - a / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tends_to_half() {
        assert_abs_diff_eq!(integral_closed_form(1e-12).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn known_values() {
        assert_abs_diff_eq!(integral_closed_form(1.0).unwrap(), 1.0 - 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(integral_closed_form(1.0).unwrap(), 0.306853, epsilon = 1e-6);
        assert_abs_diff_eq!(integral_closed_form(10.0).unwrap(), (10.0 - 11f64.ln()) / 100.0, epsilon = 1e-15);
    }

    #[test]
    fn series_and_logarithm_agree_at_switch() {
        let below = integral_closed_form(0.99999e-4).unwrap();
        let above = integral_closed_form(1.00001e-4).unwrap();
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn quadrature_agrees() {
        for a in [0.01, 0.1, 1.0, 10.0] {
            let q = integral_quadrature(a, 1_000_000).unwrap();
            assert!((q - integral_closed_form(a).unwrap()).abs() < 1e-8, "a={a}");
        }
    }

    #[test]
    fn small_a_expansion() {
        let a = 1e-3;
        assert!((integral_closed_form(a).unwrap() - integral_small_a(a)).abs() < 1e-5);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(integral_closed_form(0.0).is_err());
        assert!(integral_closed_form(-1.0).is_err());
        assert!(integral_quadrature(1.0, 0).is_err());
    }
}
