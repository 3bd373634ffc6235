//! Conditional expectation of one attention-weighted value under LIME
//! perturbations, `E[A_t V_t | ℓ ∉ S]`, computed exactly and by its
//! large-`T_max` approximation.
//!
//! `A_t = G_t / Σ_u G_u` and `V_t` are the attention weight and value of
//! slot `t` once the words in `S` are replaced by the padding embedding.
//! The approximation replaces the expected ratio by a ratio of expected
//! sums inside each stratum `|S| = s`. Strata are weighted by the law of
//! `s` given `ℓ ∉ S`, which is proportional to `d − s` rather than uniform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::median;
use super::subsets::SizedSubsets;
use crate::error::{Error, Result};
use crate::generate::{clamp_logits, random_distinct_document, random_params};
use crate::lime::{unk_quantities, Perturber};
use crate::linalg::{dot, Matrix};
use crate::model::{embed, forward_from_embeddings, Dims, Document, ModelParams};

/// Largest dictionary enumerated here: one forward pass per subset.
pub const PROP1_MAX_WORDS: usize = 14;

/// Which of the two approximations applies to slot `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `ξ_t = ℓ`: the slot is never removed under the conditioning.
    SameWord,
    /// `ξ_t ≠ ℓ`, including padding slots.
    OtherWord,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Prop1Report {
    pub t: usize,
    pub ell: usize,
    pub branch: Branch,
    pub exact: Vec<f64>,
    pub approx: Vec<f64>,
    /// Euclidean norm of `exact − approx`.
    pub error: f64,
}

/// The per-slot scalars and vectors both sides are built from.
struct SlotTable {
    g: Vec<f64>,
    g_unk: Vec<f64>,
    values: Matrix,
    v_unk: Matrix,
    word_of: Vec<usize>,
    d: usize,
}

impl SlotTable {
    fn new(doc: &Document, params: &ModelParams, head: usize) -> Result<Self> {
        if head >= params.heads.len() {
            return Err(Error::HeadOutOfRange {
                head,
                heads: params.heads.len(),
            });
        }
        let doc = params.prepare(doc)?;
        let record = forward_from_embeddings(&embed(&doc, params)?, params)?;
        let unk = unk_quantities(&doc, params)?;
        let u = &unk.heads[head];
        Ok(Self {
            g: u.g.clone(),
            g_unk: u.g_unk.clone(),
            values: record.heads[head].values.clone(),
            v_unk: u.v_unk.clone(),
            word_of: doc.word_indices().to_vec(),
            d: doc.num_words(),
        })
    }

    fn removed(&self, slot: usize, mask: u64) -> bool {
        slot < self.word_of.len() && mask >> self.word_of[slot] & 1 == 1
    }
}

fn check_args(doc: &Document, params: &ModelParams, t: usize, ell: usize) -> Result<Document> {
    let doc = params.prepare(doc)?;
    let d = doc.num_words();
    if d > PROP1_MAX_WORDS {
        return Err(Error::EnumerationLimit {
            d,
            limit: PROP1_MAX_WORDS,
        });
    }
    if d < 2 {
        return Err(Error::invalid("need at least two distinct words"));
    }
    if ell >= d {
        return Err(Error::invalid(format!("word index {ell} outside dictionary of {d}")));
    }
    if t >= params.dims.t_max {
        return Err(Error::invalid(format!("slot {t} outside [0, {})", params.dims.t_max)));
    }
    Ok(doc)
}

/// `E[A_t V_t | ℓ ∉ S]` by running the model on every removal set that
/// keeps word `ell`. `t` is a 0-based slot and `ell` a dictionary index.
pub fn prop1_exact(doc: &Document, params: &ModelParams, head: usize, t: usize, ell: usize) -> Result<Vec<f64>> {
    let doc = check_args(doc, params, t, ell)?;
    if head >= params.heads.len() {
        return Err(Error::HeadOutOfRange {
            head,
            heads: params.heads.len(),
        });
    }
    let perturber = Perturber::new(&doc, params)?;
    let d = doc.num_words();
    let d_out = params.dims.d_out;

    let per_size: Vec<Vec<f64>> = (1..d)
        .into_par_iter()
        .map(|s| {
            let mut acc = vec![0.0; d_out];
            let mut count = 0usize;
            for mask in SizedSubsets::new(d, s).filter(|m| m >> ell & 1 == 0) {
                let removed: Vec<bool> = (0..d).map(|w| mask >> w & 1 == 1).collect();
                let rec = forward_from_embeddings(&perturber.embedded(&removed), params)?;
                let h = &rec.heads[head];
                for (a, v) in acc.iter_mut().zip(h.values.row(t)) {
                    *a += h.alpha[t] * v;
                }
                count += 1;
            }
            acc.iter_mut().for_each(|a| *a /= count as f64);
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    // Given ℓ ∉ S, size s has probability ∝ P(s) P(ℓ ∉ S | s) = (d − s) / d²,
    // and within a size the admissible sets are equally likely.
    let weights: Vec<f64> = (1..d).map(|s| (d - s) as f64).collect();
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; d_out];
    for (w, m) in weights.iter().zip(&per_size) {
        for (o, x) in out.iter_mut().zip(m) {
            *o += w / total * x;
        }
    }
    Ok(out)
}

/// Right-hand side of the approximation for slot `t` and word `ell`.
pub fn prop1_approx(doc: &Document, params: &ModelParams, head: usize, t: usize, ell: usize) -> Result<Vec<f64>> {
    let doc = check_args(doc, params, t, ell)?;
    let tab = SlotTable::new(&doc, params, head)?;
    let d = tab.d;
    let sum_g: f64 = tab.g.iter().sum();
    let sum_gh: f64 = tab.g_unk.iter().sum();
    let same = branch_of(&doc, t, ell) == Branch::SameWord;
    let mut out = vec![0.0; params.dims.d_out];
    for s in 1..d {
        let p_s = 2.0 * (d - s) as f64 / (d * (d - 1)) as f64;
        let r = s as f64 / (d - 1) as f64;
        let den = (1.0 - r) * sum_g + r * sum_gh;
        for (k, o) in out.iter_mut().enumerate() {
            let kept = tab.g[t] * tab.values[(t, k)];
            let num = if same {
                kept
            } else {
                (1.0 - r) * kept + r * tab.g_unk[t] * tab.v_unk[(t, k)]
            };
            *o += p_s * num / den;
        }
    }
    Ok(out)
}

fn branch_of(doc: &Document, t: usize, ell: usize) -> Branch {
    if t < doc.len() && doc.word_indices()[t] == ell {
        Branch::SameWord
    } else {
        Branch::OtherWord
    }
}

pub fn prop1_check(doc: &Document, params: &ModelParams, head: usize, t: usize, ell: usize) -> Result<Prop1Report> {
    let exact = prop1_exact(doc, params, head, t, ell)?;
    let approx = prop1_approx(doc, params, head, t, ell)?;
    let error = exact.iter().zip(&approx).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(Prop1Report {
        t,
        ell,
        branch: branch_of(&params.prepare(doc)?, t, ell),
        exact,
        approx,
        error,
    })
}

/// One instance of the expected-ratio bound: `X = W_ℓ G_t V_t`,
/// `Y = Σ_u G_u` over the size-`s` sets that keep `ℓ`, with `n = T_max`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RatioBound {
    pub s: usize,
    /// `|E[X/Y] − E[X]/E[Y]|`.
    pub gap: f64,
    /// `C Var(Y)/(c³n³) + C² √Var(Y)/(c²n²)` with measured `c`, `C`.
    pub bound: f64,
}

impl RatioBound {
    pub fn holds(&self) -> bool {
        self.gap <= self.bound
    }
}

/// Evaluates the expected-ratio bound on every stratum `s ∈ [d−1]`.
pub fn expected_ratio_bounds(
    doc: &Document,
    params: &ModelParams,
    head: usize,
    t: usize,
    ell: usize,
) -> Result<Vec<RatioBound>> {
    let doc = check_args(doc, params, t, ell)?;
    let tab = SlotTable::new(&doc, params, head)?;
    let readout = &params.heads[head].readout;
    let n = params.dims.t_max as f64;
    let d = tab.d;
    let x_kept = tab.g[t] * dot(readout, tab.values.row(t));
    let x_gone = tab.g_unk[t] * dot(readout, tab.v_unk.row(t));
    let mut out = Vec::with_capacity(d - 1);
    for s in 1..d {
        let draws: Vec<(f64, f64)> = SizedSubsets::new(d, s)
            .filter(|m| m >> ell & 1 == 0)
            .map(|mask| {
                let x = if tab.removed(t, mask) { x_gone } else { x_kept };
                let y: f64 = (0..tab.g.len())
                    .map(|u| if tab.removed(u, mask) { tab.g_unk[u] } else { tab.g[u] })
                    .sum();
                (x, y)
            })
            .collect();
        let m = draws.len() as f64;
        let ex = draws.iter().map(|p| p.0).sum::<f64>() / m;
        let ey = draws.iter().map(|p| p.1).sum::<f64>() / m;
        let e_ratio = draws.iter().map(|p| p.0 / p.1).sum::<f64>() / m;
        let var_y = draws.iter().map(|p| (p.1 - ey).powi(2)).sum::<f64>() / m;
        let c_lo = draws.iter().map(|p| p.1 / n).fold(f64::INFINITY, f64::min);
        let c_hi = draws
            .iter()
            .map(|p| p.0.abs().max(p.1 / n))
            .fold(0.0, f64::max);
        out.push(RatioBound {
            s,
            gap: (e_ratio - ex / ey).abs(),
            bound: c_hi * var_y / (c_lo.powi(3) * n.powi(3)) + c_hi * c_hi * var_y.sqrt() / (c_lo * c_lo * n * n),
        });
    }
    Ok(out)
}

/// Settings of the expected-ratio sweep over document lengths.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Prop1Config {
    pub t_values: Vec<usize>,
    pub trials: usize,
    /// `T = T_max^ε`, so `T_max = round(T^{1/ε})`.
    pub epsilon: f64,
    pub logit_clamp: f64,
    pub seed: u64,
}

impl Default for Prop1Config {
    fn default() -> Self {
        Self {
            t_values: vec![6, 9, 12],
            trials: 20,
            epsilon: 0.75,
            logit_clamp: 3.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Prop1Row {
    pub t: usize,
    pub t_max: usize,
    pub same_word: Vec<f64>,
    pub other_word: Vec<f64>,
    pub median: f64,
    /// Largest `gap / bound` over all expected-ratio instances.
    pub worst_ratio_bound: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Prop1Sweep {
    pub rows: Vec<Prop1Row>,
}

impl Prop1Sweep {
    pub fn medians_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].median < w[0].median)
    }

    /// Share of trials whose error at the last `T` is at least the error at
    /// the first `T`, over both branches.
    pub fn fraction_not_improved(&self) -> f64 {
        let (first, last) = (&self.rows[0], &self.rows[self.rows.len() - 1]);
        let pairs = first
            .same_word
            .iter()
            .zip(&last.same_word)
            .chain(first.other_word.iter().zip(&last.other_word));
        let (mut worse, mut total) = (0, 0);
        for (a, b) in pairs {
            total += 1;
            if b >= a {
                worse += 1;
            }
        }
        worse as f64 / total as f64
    }
}

pub(crate) fn scaled_t_max(t: usize, epsilon: f64) -> usize {
    (t as f64).powf(1.0 / epsilon).round() as usize
}

pub(crate) fn trial_rng(seed: u64, t: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((t as u64) << 32) | trial as u64);
    rng
}

/// Draws single-head models with `d = T` distinct words, clamps their
/// logits, and records the error of both branches at a random slot pair.
pub fn prop1_sweep(cfg: &Prop1Config) -> Result<Prop1Sweep> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {}", cfg.epsilon)));
    }
    if cfg.trials == 0 || cfg.t_values.is_empty() {
        return Err(Error::invalid("sweep needs at least one trial and one length"));
    }
    let mut rows = Vec::with_capacity(cfg.t_values.len());
    for &t in &cfg.t_values {
        let t_max = scaled_t_max(t, cfg.epsilon);
        let dims = Dims {
            vocab_size: 2 * t + 8,
            t_max,
            d_embed: 16,
            d_att: 8,
            d_out: 8,
            heads: 1,
        };
        let results: Vec<(f64, f64, f64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                use rand::Rng;
                let mut rng = trial_rng(cfg.seed, t, trial);
                let mut params = random_params(dims, &mut rng);
                let doc = random_distinct_document(dims.vocab_size, t, &mut rng);
                clamp_logits(&mut params, &doc, cfg.logit_clamp)?;
                let ell = rng.random_range(0..t);
                let other = (ell + rng.random_range(1..t)) % t;
                let same = prop1_check(&doc, &params, 0, ell, ell)?;
                let diff = prop1_check(&doc, &params, 0, other, ell)?;
                let mut worst: f64 = 0.0;
                for slot in [ell, other] {
                    for b in expected_ratio_bounds(&doc, &params, 0, slot, ell)? {
                        worst = worst.max(b.gap / b.bound);
                    }
                }
                Ok((same.error, diff.error, worst))
            })
            .collect::<Result<_>>()?;
        let same_word: Vec<f64> = results.iter().map(|r| r.0).collect();
        let other_word: Vec<f64> = results.iter().map(|r| r.1).collect();
        let all: Vec<f64> = same_word.iter().chain(&other_word).copied().collect();
        rows.push(Prop1Row {
            t,
            t_max,
            median: median(&all),
            worst_ratio_bound: results.iter().map(|r| r.2).fold(0.0, f64::max),
            same_word,
            other_word,
        });
    }
    Ok(Prop1Sweep { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::DESK_DIMS;

    fn instance(seed: u64, t: usize) -> (Document, ModelParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = Dims {
            vocab_size: 30,
            t_max: 11,
            heads: 2,
            ..DESK_DIMS
        };
        let mut params = random_params(dims, &mut rng);
        let doc = random_distinct_document(30, t, &mut rng);
        clamp_logits(&mut params, &doc, 3.0).unwrap();
        (doc, params)
    }

    #[test]
    fn padding_like_words_make_both_sides_equal() {
        let (doc, mut params) = instance(1, 6);
        let h = params.unk_embedding.clone();
        for &tok in doc.tokens() {
            params.token_embeddings.row_mut(tok).copy_from_slice(&h);
        }
        for (t, ell) in [(0, 0), (2, 0), (8, 3)] {
            let r = prop1_check(&doc, &params, 1, t, ell).unwrap();
            assert!(r.error < 1e-14, "t={t}: {}", r.error);
        }
    }

    #[test]
    fn branches_are_dispatched_by_slot_word() {
        let (doc, params) = instance(2, 6);
        assert_eq!(prop1_check(&doc, &params, 0, 3, 3).unwrap().branch, Branch::SameWord);
        assert_eq!(prop1_check(&doc, &params, 0, 2, 3).unwrap().branch, Branch::OtherWord);
        assert_eq!(prop1_check(&doc, &params, 0, 9, 3).unwrap().branch, Branch::OtherWord);
    }

    #[test]
    fn same_word_exact_by_hand_for_two_words() {
        // d = 2, ℓ = 0: the only admissible set is {1}.
        let (doc, params) = instance(3, 2);
        let p = Perturber::new(&doc, &params).unwrap();
        let rec = forward_from_embeddings(&p.embedded(&[false, true]), &params).unwrap();
        let h = &rec.heads[0];
        let expect: Vec<f64> = h.values.row(0).iter().map(|v| h.alpha[0] * v).collect();
        let got = prop1_exact(&doc, &params, 0, 0, 0).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn approximation_is_close_for_d6() {
        let (doc, params) = instance(4, 6);
        for (t, ell) in [(0, 0), (1, 0)] {
            let r = prop1_check(&doc, &params, 0, t, ell).unwrap();
            let scale = r.exact.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(r.error < 0.5 * scale, "t={t}: {} vs {scale}", r.error);
        }
    }

    #[test]
    fn expected_ratio_bound_holds() {
        for seed in 0..5 {
            let (doc, params) = instance(10 + seed, 7);
            for (t, ell) in [(0, 0), (1, 0), (9, 2)] {
                for b in expected_ratio_bounds(&doc, &params, 1, t, ell).unwrap() {
                    assert!(b.holds(), "seed {seed} t {t} s {}: {} > {}", b.s, b.gap, b.bound);
                }
            }
        }
    }

    #[test]
    fn guards() {
        let (doc, params) = instance(5, 6);
        assert!(prop1_check(&doc, &params, 0, 0, 6).is_err());
        assert!(prop1_check(&doc, &params, 0, 11, 0).is_err());
        assert!(matches!(
            prop1_check(&doc, &params, 2, 0, 0),
            Err(Error::HeadOutOfRange { .. })
        ));
        let dims = Dims {
            vocab_size: 30,
            t_max: 16,
            ..DESK_DIMS
        };
        let big = random_params(dims, &mut ChaCha8Rng::seed_from_u64(0));
        let long = random_distinct_document(30, 15, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(
            prop1_check(&long, &big, 0, 0, 0),
            Err(Error::EnumerationLimit { d: 15, limit: 14 })
        ));
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = Prop1Config {
            t_values: vec![4, 5],
            trials: 3,
            ..Prop1Config::default()
        };
        assert_eq!(prop1_sweep(&cfg).unwrap(), prop1_sweep(&cfg).unwrap());
    }
}
