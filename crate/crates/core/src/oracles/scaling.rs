//! How well the attention-based approximation of the LIME limit
//! coefficients tracks the true limit as documents grow.
//!
//! Documents have `d = T` distinct words and the model has
//! `T_max = round(T^{1/ε})` slots. Attention logits are clamped so that
//! every score `g_t`, `g_{h,t}` lies in `[e^{−c}, e^{c}]`.

use rayon::prelude::*;

use super::median;
use super::prop1::{scaled_t_max, trial_rng};
use crate::error::{Error, Result};
use crate::generate::{clamp_logits, random_distinct_document, random_params, DESK_DIMS};
use crate::lime::{approx_limit_coefficients, limit_coefficients, MonteCarloConfig};
use crate::model::Dims;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScalingConfig {
    /// Exponent in `d = T = T_max^ε`.
    pub epsilon: f64,
    pub t_values: Vec<usize>,
    pub trials: usize,
    /// Logits are kept in `[−logit_clamp, logit_clamp]`.
    pub logit_clamp: f64,
    /// Dictionaries up to this size are enumerated; larger ones use
    /// stratified Monte Carlo.
    pub enumeration_limit: usize,
    pub samples_per_stratum: usize,
    pub seed: u64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.75,
            t_values: vec![16, 32, 64],
            trials: 40,
            logit_clamp: 3.0,
            enumeration_limit: 14,
            samples_per_stratum: 500,
            seed: 0,
        }
    }
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.trials == 0 || self.t_values.is_empty() {
            return Err(Error::invalid("scaling run needs at least one trial and one length"));
        }
        if self.t_values.iter().any(|&t| t < 2) {
            return Err(Error::invalid("document lengths must be at least 2"));
        }
        Ok(())
    }

    pub fn dims_for(&self, t: usize) -> Dims {
        Dims {
            vocab_size: 2 * t + 8,
            t_max: scaled_t_max(t, self.epsilon),
            ..DESK_DIMS
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScalingRow {
    pub t: usize,
    pub t_max: usize,
    /// `‖approx − limit‖₂ / Σ_j |limit_j|` per trial.
    pub errors: Vec<f64>,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].median < w[0].median)
    }
}

/// Normalized error of the approximation on one random model.
pub fn scaling_trial(cfg: &ScalingConfig, t: usize, trial: usize) -> Result<f64> {
    let dims = cfg.dims_for(t);
    let mut rng = trial_rng(cfg.seed, t, trial);
    let mut params = random_params(dims, &mut rng);
    let doc = random_distinct_document(dims.vocab_size, t, &mut rng);
    clamp_logits(&mut params, &doc, cfg.logit_clamp)?;
    let approx = approx_limit_coefficients(&doc, &params)?;
    let mc = MonteCarloConfig {
        samples_per_stratum: cfg.samples_per_stratum,
        seed: cfg.seed ^ ((t as u64) << 32 | trial as u64),
    };
    let limit = limit_coefficients(&doc, &params, cfg.enumeration_limit, &mc)?;
    let err = approx
        .values
        .iter()
        .zip(&limit.values)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = limit.values.iter().map(|v| v.abs()).sum();
    Ok(err / scale)
}

pub fn theorem2_scaling(cfg: &ScalingConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.t_values.len());
    for &t in &cfg.t_values {
        let errors: Vec<f64> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| scaling_trial(cfg, t, trial))
            .collect::<Result<_>>()?;
        rows.push(ScalingRow {
            t,
            t_max: scaled_t_max(t, cfg.epsilon),
            median: median(&errors),
            errors,
        });
    }
    Ok(ScalingReport { rows })
}
