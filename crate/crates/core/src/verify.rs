//! Verification suites: each check compares a closed form against its
//! brute-force oracle and records the measured error next to the
//! tolerance it must stay under.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generate::{random_distinct_document, random_document, random_params, DESK_DIMS};
use crate::gradient_explain::{finite_diff_gradient, gradient_closed_form, max_relative_row_error, GradientField};
use crate::lime::{approx_limit_coefficients, empirical_lime, exact_limit_coefficients, LimeConfig};
use crate::model::{Document, ModelParams};
use crate::oracles::integral::{integral_closed_form, integral_quadrature, integral_small_a};
use crate::oracles::probability::{
    cond_proba_enumerate, cond_proba_formula, conditional_lemma_events, lemma_events, proba_enumerate,
    proba_formula, Rational, SubsetLaw,
};
use crate::oracles::prop1::{prop1_sweep, Prop1Config};
use crate::oracles::scaling::{theorem2_scaling, ScalingConfig};
use crate::oracles::variance::{cond_variance_enumerate, cond_variance_formula, CoefficientPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gradient,
    Lemmas,
    Proposition,
    Lime,
    Theorem2,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["gradient", "lemmas", "proposition", "lime", "theorem2", "all"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gradient" => Suite::Gradient,
            "lemmas" => Suite::Lemmas,
            "proposition" => Suite::Proposition,
            "lime" => Suite::Lime,
            "theorem2" => Suite::Theorem2,
            "all" => Suite::All,
            _ => {
                return Err(Error::invalid(format!(
                    "unknown suite `{s}` (expected one of {})",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [
            Suite::Gradient,
            Suite::Lemmas,
            Suite::Proposition,
            Suite::Lime,
            Suite::Theorem2,
            Suite::All,
        ]
        .iter()
        .position(|s| s == self)
        .expect("listed");
        f.write_str(Suite::NAMES[i])
    }
}

/// Signature of the analytic gradient under test.
pub type GradientFn = fn(&Document, &ModelParams) -> Result<GradientField>;

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    pub gradient: GradientFn,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            gradient: gradient_closed_form,
        }
    }
}

/// One line of a verification report. A check passes when `max_error` is
/// strictly below `tolerance`; for monotonicity checks the measured value
/// is the largest ratio between consecutive medians and the tolerance 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRecord {
    fn new(name: &str, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            max_error,
            tolerance,
            passed: max_error < tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckRecord>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let wants = |s: Suite| suite == s || suite == Suite::All;
    if wants(Suite::Gradient) {
        checks.push(gradient_check(opts, 100)?);
    }
    if wants(Suite::Lemmas) {
        checks.extend(lemma_checks(opts.seed)?);
    }
    if wants(Suite::Proposition) {
        checks.extend(proposition_checks(opts.seed)?);
    }
    if wants(Suite::Lime) {
        checks.extend(lime_checks(opts.seed)?);
    }
    if wants(Suite::Theorem2) {
        checks.push(theorem2_check(opts.seed)?);
    }
    Ok(VerifyReport { checks })
}

fn model_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Analytic gradient against central differences (step `1e-5`) on desk
/// models with 12-token documents.
pub fn gradient_check(opts: &VerifyOptions, models: usize) -> Result<CheckRecord> {
    let errors: Vec<f64> = (0..models)
        .into_par_iter()
        .map(|i| {
            let mut rng = model_rng(opts.seed, i as u64);
            let params = random_params(DESK_DIMS, &mut rng);
            let doc = random_document(DESK_DIMS.vocab_size, 12, &mut rng);
            let analytic = (opts.gradient)(&doc, &params)?;
            let numeric = finite_diff_gradient(&doc, &params, 1e-5)?;
            Ok(max_relative_row_error(&analytic, &numeric))
        })
        .collect::<Result<_>>()?;
    Ok(CheckRecord::new(
        "gradient-closed-form-vs-finite-differences",
        errors.into_iter().fold(0.0, f64::max),
        1e-6,
    ))
}

fn rational_gap(a: Rational, b: Rational) -> f64 {
    let d = a - b;
    (*d.numer() as f64 / *d.denom() as f64).abs()
}

pub fn subset_probability_check() -> Result<CheckRecord> {
    let mut worst: f64 = 0.0;
    for n in 3..=10 {
        for s in 0..=n {
            let law = SubsetLaw::new(n, s)?;
            for ev in lemma_events() {
                worst = worst.max(rational_gap(proba_formula(law, &ev)?, proba_enumerate(law, &ev)?));
            }
        }
    }
    Ok(CheckRecord::new("subset-probabilities", worst, 1e-12))
}

pub fn conditional_probability_check() -> Result<CheckRecord> {
    let mut worst: f64 = 0.0;
    for n in 3..=10 {
        for s in 0..n {
            let law = SubsetLaw::new(n, s)?;
            for ell in 0..n {
                for ev in conditional_lemma_events() {
                    // place the event on the first elements other than ell
                    let others: Vec<usize> = (0..n).filter(|&i| i != ell).collect();
                    let ev: Vec<_> = ev.iter().map(|&(a, m)| (others[a], m)).collect();
                    worst = worst.max(rational_gap(
                        cond_proba_formula(law, &ev, ell)?,
                        cond_proba_enumerate(law, &ev, ell)?,
                    ));
                }
            }
        }
    }
    Ok(CheckRecord::new("conditional-subset-probabilities", worst, 1e-12))
}

pub fn conditional_variance_check(seed: u64, pairs: usize) -> Result<CheckRecord> {
    let mut rng = model_rng(seed, 1 << 40);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let n = rng.random_range(3..=10);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let pair = CoefficientPair::new(a, b, rng.random_range(0..n))?;
        for s in 1..n {
            let f = cond_variance_formula(&pair, s)?;
            let e = cond_variance_enumerate(&pair, s)?;
            worst = worst.max((f.mean - e.mean).abs()).max((f.variance - e.variance).abs());
        }
    }
    Ok(CheckRecord::new("conditional-variance", worst, 1e-9))
}

pub fn integral_checks() -> Result<Vec<CheckRecord>> {
    let mut quad: f64 = 0.0;
    for a in [0.01, 0.1, 1.0, 10.0] {
        quad = quad.max((integral_closed_form(a)? - integral_quadrature(a, 1_000_000)?).abs());
    }
    let small = (integral_closed_form(1e-3)? - integral_small_a(1e-3)).abs();
    Ok(vec![
        CheckRecord::new("integral-closed-form-vs-quadrature", quad, 1e-8),
        CheckRecord::new("integral-small-a-expansion", small, 1e-5),
    ])
}

fn lemma_checks(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut out = vec![
        subset_probability_check()?,
        conditional_probability_check()?,
        conditional_variance_check(seed, 200)?,
    ];
    out.extend(integral_checks()?);
    Ok(out)
}

fn max_consecutive_ratio(medians: &[f64]) -> f64 {
    medians.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max)
}

fn proposition_checks(seed: u64) -> Result<Vec<CheckRecord>> {
    let sweep = prop1_sweep(&Prop1Config {
        seed,
        ..Prop1Config::default()
    })?;
    let medians: Vec<f64> = sweep.rows.iter().map(|r| r.median).collect();
    let worst_bound = sweep.rows.iter().map(|r| r.worst_ratio_bound).fold(0.0, f64::max);
    Ok(vec![
        CheckRecord::new("conditional-expectation-median-decrease", max_consecutive_ratio(&medians), 1.0),
        CheckRecord::new("conditional-expectation-not-improved-share", sweep.fraction_not_improved(), 0.5),
        // gap / bound must not exceed 1
        CheckRecord::new("expected-ratio-bound", worst_bound, 1.0 + f64::EPSILON),
    ])
}

/// Sampled LIME against the enumerated limit: `L∞` gap per document.
pub fn lime_limit_gaps(seed: u64, models: usize, lengths: &[usize]) -> Result<Vec<f64>> {
    let jobs: Vec<(usize, usize)> = lengths.iter().flat_map(|&t| (0..models).map(move |m| (t, m))).collect();
    jobs.par_iter()
        .map(|&(t, m)| {
            let mut rng = model_rng(seed, (t as u64) << 32 | m as u64);
            let params = random_params(DESK_DIMS, &mut rng);
            let doc = random_distinct_document(DESK_DIMS.vocab_size, t, &mut rng);
            let cfg = LimeConfig {
                samples: 50_000,
                bandwidth: 25.0,
                lambda: 1.0,
                seed,
            };
            let fit = empirical_lime(&doc, &params, &cfg)?;
            let exact = exact_limit_coefficients(&doc, &params)?;
            Ok(fit
                .coefficients
                .values
                .iter()
                .zip(&exact.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

/// Largest coefficient the exact and approximate limits assign to words
/// that are not in the document.
pub fn absent_word_coefficients(seed: u64, docs: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..docs {
        let mut rng = model_rng(seed, 1 << 41 | i as u64);
        let params = random_params(DESK_DIMS, &mut rng);
        let doc = random_document(DESK_DIMS.vocab_size, 8, &mut rng);
        let present = doc.dictionary().to_vec();
        let exact = exact_limit_coefficients(&doc, &params)?.for_vocabulary(DESK_DIMS.vocab_size);
        let approx = approx_limit_coefficients(&doc, &params)?.for_vocabulary(DESK_DIMS.vocab_size);
        for w in (0..DESK_DIMS.vocab_size).filter(|w| !present.contains(w)) {
            worst = worst.max(exact[w].abs()).max(approx[w].abs());
        }
    }
    Ok(worst)
}

fn lime_checks(seed: u64) -> Result<Vec<CheckRecord>> {
    let gaps = lime_limit_gaps(seed, 10, &[6, 8, 10])?;
    Ok(vec![
        CheckRecord::new("lime-empirical-vs-limit", gaps.into_iter().fold(0.0, f64::max), 0.05),
        // exactly zero is required: any positive value fails
        CheckRecord::new("lime-absent-words", absent_word_coefficients(seed, 20)?, f64::MIN_POSITIVE),
    ])
}

fn theorem2_check(seed: u64) -> Result<CheckRecord> {
    let report = theorem2_scaling(&ScalingConfig {
        seed,
        ..ScalingConfig::default()
    })?;
    let medians: Vec<f64> = report.rows.iter().map(|r| r.median).collect();
    Ok(CheckRecord::new("attention-approximation-median-decrease", max_consecutive_ratio(&medians), 1.0))
}
