//! LIME for text on this classifier.
//!
//! A perturbed document is drawn by picking a number of words `s` uniformly
//! in `1..=d`, then a set `S` of `s` distinct dictionary words uniformly,
//! and replacing every occurrence of those words with the padding embedding
//! `h` (positions keep their positional encoding). The surrogate is a
//! weighted ridge regression of the model output on the presence vector.
//!
//! Besides the sampled explanation this module computes the large-sample,
//! large-bandwidth limit of the coefficients,
//!
//! ```text
//! β∞_j = 3 E[f(X) | j ∉ S] − (3/d) Σ_k E[f(X) | k ∉ S],
//! ```
//!
//! exactly by enumerating every removal set, by stratified Monte Carlo for
//! larger dictionaries, and through a closed-form approximation in terms of
//! attention weights and values.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::linalg::{dot, softmax, weighted_ridge, Matrix};
use crate::model::{embed, forward_from_embeddings, Document, EmbeddedDocument, ModelParams};

/// Largest dictionary for which [`exact_limit_coefficients`] enumerates
/// all `2^d` removal sets.
pub const EXACT_LIMIT_MAX_WORDS: usize = 20;

/// Sampling and surrogate settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LimeConfig {
    /// Number of perturbed samples `n`.
    pub samples: usize,
    /// Kernel bandwidth `ν`.
    pub bandwidth: f64,
    /// Ridge penalty `λ`.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            samples: 5000,
            bandwidth: 25.0,
            lambda: 1.0,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::invalid("LIME needs at least one sample"));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Perturbed samples and everything the surrogate is fit on.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationBatch {
    /// `n × d`, entry 1 iff the word is still present.
    pub presence: Matrix,
    /// Proximity weights `π_i`.
    pub weights: Vec<f64>,
    /// Model outputs `f(X_i)`.
    pub responses: Vec<f64>,
    pub seed: u64,
}

impl PerturbationBatch {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

/// Cosine distance between the all-ones vector of length `d` and a binary
/// vector with `kept` ones. The all-zeros vector is put at distance 1.
pub fn cosine_distance_to_full(kept: usize, d: usize) -> f64 {
    if kept == 0 {
        return 1.0;
    }
    1.0 - (kept as f64 / d as f64).sqrt()
}

/// `exp(−dist² / (2ν²))` for a sample that kept `kept` of `d` words.
pub fn proximity_weight(kept: usize, d: usize, bandwidth: f64) -> f64 {
    let dist = cosine_distance_to_full(kept, d);
    (-dist * dist / (2.0 * bandwidth * bandwidth)).exp()
}

/// Coefficients indexed by local-dictionary word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordCoefficients {
    /// Token ids of the dictionary words, in first-occurrence order.
    pub words: Vec<usize>,
    pub values: Vec<f64>,
}

impl WordCoefficients {
    /// Spreads word coefficients onto document positions: each occurrence
    /// of word `j` gets `β_j`.
    pub fn to_explanation(&self, doc: &Document, method: Method) -> Explanation {
        let weights = doc.word_indices().iter().map(|&w| self.values[w]).collect();
        Explanation::new(method, weights)
    }

    /// One coefficient per vocabulary entry; words absent from the
    /// document get exactly zero.
    pub fn for_vocabulary(&self, vocab_size: usize) -> Vec<f64> {
        let mut out = vec![0.0; vocab_size];
        for (&w, &v) in self.words.iter().zip(&self.values) {
            out[w] = v;
        }
        out
    }
}

/// Evaluates the model on a document with some dictionary words replaced
/// by the padding embedding.
pub struct Perturber<'a> {
    params: &'a ModelParams,
    doc: Document,
    base: EmbeddedDocument,
    /// Document slots of each dictionary word.
    slots_of_word: Vec<Vec<usize>>,
}

impl<'a> Perturber<'a> {
    pub fn new(doc: &Document, params: &'a ModelParams) -> Result<Self> {
        let doc = params.prepare(doc)?;
        let base = embed(&doc, params)?;
        let mut slots_of_word = vec![Vec::new(); doc.num_words()];
        for (t, &w) in doc.word_indices().iter().enumerate() {
            slots_of_word[w].push(t);
        }
        Ok(Self {
            params,
            doc,
            base,
            slots_of_word,
        })
    }

    pub fn document(&self) -> &Document {
        &self.doc
    }

    pub fn num_words(&self) -> usize {
        self.slots_of_word.len()
    }

    /// Embedded document with the flagged words removed.
    pub fn embedded(&self, removed: &[bool]) -> EmbeddedDocument {
        let mut e = self.base.clone();
        for (w, slots) in self.slots_of_word.iter().enumerate() {
            if removed[w] {
                for &t in slots {
                    e.embeddings.row_mut(t).copy_from_slice(&self.params.unk_row(t + 1));
                }
            }
        }
        e
    }

    pub fn output(&self, removed: &[bool]) -> Result<f64> {
        Ok(forward_from_embeddings(&self.embedded(removed), self.params)?.output)
    }

    /// Same as [`Perturber::output`] with the removal set as a bit mask
    /// over dictionary indices.
    pub fn output_mask(&self, mask: u64) -> Result<f64> {
        let removed: Vec<bool> = (0..self.num_words()).map(|w| mask >> w & 1 == 1).collect();
        self.output(&removed)
    }
}

fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws the LIME sample. Sample `i` uses its own ChaCha stream, so the
/// batch does not depend on how the work is split across threads.
pub fn sample_perturbations(doc: &Document, params: &ModelParams, cfg: &LimeConfig) -> Result<PerturbationBatch> {
    cfg.validate()?;
    let perturber = Perturber::new(doc, params)?;
    let d = perturber.num_words();
    if d == 0 {
        return Err(Error::invalid("cannot perturb an empty document"));
    }

    let rows: Vec<(Vec<bool>, f64)> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed, i as u64);
            let s = rng.random_range(1..=d);
            let mut removed = vec![false; d];
            for w in sample(&mut rng, d, s) {
                removed[w] = true;
            }
            let y = perturber.output(&removed)?;
            Ok((removed, y))
        })
        .collect::<Result<_>>()?;

    let mut presence = Matrix::zeros(cfg.samples, d);
    let mut weights = Vec::with_capacity(cfg.samples);
    let mut responses = Vec::with_capacity(cfg.samples);
    for (i, (removed, y)) in rows.into_iter().enumerate() {
        let row = presence.row_mut(i);
        let mut kept = 0;
        for (z, &r) in row.iter_mut().zip(&removed) {
            if !r {
                *z = 1.0;
                kept += 1;
            }
        }
        weights.push(proximity_weight(kept, d, cfg.bandwidth));
        responses.push(y);
    }
    Ok(PerturbationBatch {
        presence,
        weights,
        responses,
        seed: cfg.seed,
    })
}

/// Surrogate fit: intercept plus one coefficient per dictionary word.
#[derive(Debug, Clone, PartialEq)]
pub struct LimeFit {
    pub intercept: f64,
    pub coefficients: WordCoefficients,
}

impl LimeFit {
    pub fn explanation(&self, doc: &Document) -> Explanation {
        self.coefficients.to_explanation(doc, Method::LimeEmpirical)
    }
}

/// Fits the weighted ridge surrogate on an existing batch.
pub fn fit_surrogate(batch: &PerturbationBatch, words: &[usize], lambda: f64) -> Result<LimeFit> {
    let n = batch.len();
    let d = batch.presence.cols();
    let mut z_aug = Matrix::zeros(n, d + 1);
    for i in 0..n {
        let row = z_aug.row_mut(i);
        row[0] = 1.0;
        row[1..].copy_from_slice(batch.presence.row(i));
    }
    let beta = weighted_ridge(&z_aug, &batch.responses, &batch.weights, lambda)?;
    Ok(LimeFit {
        intercept: beta[0],
        coefficients: WordCoefficients {
            words: words.to_vec(),
            values: beta[1..].to_vec(),
        },
    })
}

/// Samples perturbations and fits the surrogate.
pub fn empirical_lime(doc: &Document, params: &ModelParams, cfg: &LimeConfig) -> Result<LimeFit> {
    let doc = params.prepare(doc)?;
    let batch = sample_perturbations(&doc, params, cfg)?;
    fit_surrogate(&batch, doc.dictionary(), cfg.lambda)
}

/// `3 E_j − (3/d) Σ_k E_k` from the conditional expectations `E_j`.
pub fn limit_from_conditionals(cond: &[f64]) -> Vec<f64> {
    let d = cond.len() as f64;
    let total: f64 = cond.iter().sum();
    cond.iter().map(|&e| 3.0 * e - 3.0 * total / d).collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `E[f(X) | j ∉ S]` for every dictionary word, by enumerating all
/// non-empty removal sets.
///
/// With `d = 1` the conditioning event has probability zero; the only
/// document consistent with "the word is kept" is the original one, so its
/// output is returned.
pub fn exact_conditional_expectations(doc: &Document, params: &ModelParams) -> Result<Vec<f64>> {
    let perturber = Perturber::new(doc, params)?;
    let d = perturber.num_words();
    if d > EXACT_LIMIT_MAX_WORDS {
        return Err(Error::EnumerationLimit {
            d,
            limit: EXACT_LIMIT_MAX_WORDS,
        });
    }
    if d == 0 {
        return Ok(Vec::new());
    }
    if d == 1 {
        return Ok(vec![perturber.output(&[false])?]);
    }

    let outputs: Vec<f64> = (1u64..1 << d)
        .into_par_iter()
        .map(|mask| perturber.output_mask(mask))
        .collect::<Result<_>>()?;

    // P(S) = P(s) P(S | s) = 1/d · 1/C(d, s)
    let set_weight: Vec<f64> = (0..=d).map(|s| 1.0 / (d as f64 * binomial(d, s))).collect();
    let mut num = vec![0.0; d];
    let mut den = vec![0.0; d];
    for (i, &y) in outputs.iter().enumerate() {
        let mask = i as u64 + 1;
        let w = set_weight[mask.count_ones() as usize];
        for j in 0..d {
            if mask >> j & 1 == 0 {
                num[j] += w * y;
                den[j] += w;
            }
        }
    }
    Ok(num.iter().zip(&den).map(|(n, d)| n / d).collect())
}

/// Limit coefficients computed from exact conditional expectations
/// (`2^d − 1` forward passes).
pub fn exact_limit_coefficients(doc: &Document, params: &ModelParams) -> Result<WordCoefficients> {
    let doc = params.prepare(doc)?;
    let cond = exact_conditional_expectations(&doc, params)?;
    Ok(WordCoefficients {
        words: doc.dictionary().to_vec(),
        values: limit_from_conditionals(&cond),
    })
}

/// Attention-side quantities of one head under the padding substitution.
#[derive(Debug, Clone, PartialEq)]
pub struct UnkHead {
    /// `qᵀk_t / √d_att` for every slot of the unperturbed document.
    pub logits: Vec<f64>,
    /// `g_t = exp(logits_t)`.
    pub g: Vec<f64>,
    /// `qᵀk_{h,t} / √d_att` with `k_{h,t} = W_k (h + W_p(t))`.
    pub unk_logits: Vec<f64>,
    /// `g_{h,t} = exp(unk_logits_t)`.
    pub g_unk: Vec<f64>,
    /// `α_{h,t} = g_{h,t} / Σ_u g_{h,u}`.
    pub alpha_unk: Vec<f64>,
    /// `k_{h,t}`, `T_max × d_att`.
    pub k_unk: Matrix,
    /// `v_{h,t} = W_v (h + W_p(t))`, `T_max × d_out`.
    pub v_unk: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnkQuantities {
    pub heads: Vec<UnkHead>,
}

/// Per-head `g_t`, `g_{h,t}`, `α_{h,t}`, `k_{h,t}` and `v_{h,t}` for all
/// `T_max` slots.
pub fn unk_quantities(doc: &Document, params: &ModelParams) -> Result<UnkQuantities> {
    let embedded = embed(doc, params)?;
    let t_max = params.dims.t_max;
    let mut unk = Matrix::zeros(t_max, params.dims.d_embed);
    for t in 0..t_max {
        unk.row_mut(t).copy_from_slice(&params.unk_row(t + 1));
    }
    let scale = (params.dims.d_att as f64).sqrt().recip();
    let mut heads = Vec::with_capacity(params.heads.len());
    for (i, head) in params.heads.iter().enumerate() {
        let q = params.cls_query(i)?;
        let keys = embedded.embeddings.mul_transpose(&head.key)?;
        let k_unk = unk.mul_transpose(&head.key)?;
        let logits: Vec<f64> = keys.iter_rows().map(|k| dot(k, &q) * scale).collect();
        let unk_logits: Vec<f64> = k_unk.iter_rows().map(|k| dot(k, &q) * scale).collect();
        heads.push(UnkHead {
            g: logits.iter().map(|l| l.exp()).collect(),
            g_unk: unk_logits.iter().map(|l| l.exp()).collect(),
            alpha_unk: softmax(&unk_logits)?,
            logits,
            unk_logits,
            k_unk,
            v_unk: unk.mul_transpose(&head.value)?,
        });
    }
    Ok(UnkQuantities { heads })
}

/// Closed-form approximation of the limit coefficients:
///
/// ```text
/// β∞_j ≈ (3 / 2K) Σ_i Σ_t W_ℓ⁽ⁱ⁾ (α_t⁽ⁱ⁾ v_t⁽ⁱ⁾ − α_{h,t}⁽ⁱ⁾ v_{h,t}⁽ⁱ⁾) 1{ξ_t = j}
/// ```
///
/// Repeated words collect the terms of all their occurrences.
pub fn approx_limit_coefficients(doc: &Document, params: &ModelParams) -> Result<WordCoefficients> {
    let doc = params.prepare(doc)?;
    let embedded = embed(&doc, params)?;
    let record = forward_from_embeddings(&embedded, params)?;
    let unk = unk_quantities(&doc, params)?;
    let factor = 1.5 / params.heads.len() as f64;
    let mut values = vec![0.0; doc.num_words()];
    for ((head, rec), u) in params.heads.iter().zip(&record.heads).zip(&unk.heads) {
        for (t, &w) in doc.word_indices().iter().enumerate() {
            let kept = rec.alpha[t] * dot(&head.readout, rec.values.row(t));
            let replaced = u.alpha_unk[t] * dot(&head.readout, u.v_unk.row(t));
            values[w] += factor * (kept - replaced);
        }
    }
    Ok(WordCoefficients {
        words: doc.dictionary().to_vec(),
        values,
    })
}

/// Model output under word removals, written as a ratio of sums.
///
/// Replacing a word only swaps the attention score and value of its slots
/// between two precomputed states, so per head
/// `f_i = Σ_t G_t W_ℓ V_t / Σ_t G_t` with `G_t ∈ {g_t, g_{h,t}}` and
/// `V_t ∈ {v_t, v_{h,t}}`. Padding slots never change and are folded into
/// constants. Evaluation costs `O(K T)` instead of a full forward pass.
pub struct PerturbationEvaluator {
    heads: Vec<RatioHead>,
    /// Dictionary index of every document slot.
    word_of: Vec<usize>,
    num_words: usize,
}

struct RatioHead {
    g: Vec<f64>,
    g_unk: Vec<f64>,
    n: Vec<f64>,
    n_unk: Vec<f64>,
    pad_g: f64,
    pad_n: f64,
}

impl PerturbationEvaluator {
    pub fn new(doc: &Document, params: &ModelParams) -> Result<Self> {
        let doc = params.prepare(doc)?;
        let embedded = embed(&doc, params)?;
        let record = forward_from_embeddings(&embedded, params)?;
        let unk = unk_quantities(&doc, params)?;
        let t_doc = doc.len();
        let mut heads = Vec::with_capacity(params.heads.len());
        for ((head, rec), u) in params.heads.iter().zip(&record.heads).zip(&unk.heads) {
            // Common shift keeps the exponentials in range; ratios are unaffected.
            let shift = rec
                .logits
                .iter()
                .chain(&u.unk_logits)
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let g: Vec<f64> = rec.logits.iter().map(|l| (l - shift).exp()).collect();
            let g_unk: Vec<f64> = u.unk_logits.iter().map(|l| (l - shift).exp()).collect();
            let read = |m: &Matrix, t: usize| dot(&head.readout, m.row(t));
            let n: Vec<f64> = (0..g.len()).map(|t| g[t] * read(&rec.values, t)).collect();
            let n_unk: Vec<f64> = (0..g.len()).map(|t| g_unk[t] * read(&u.v_unk, t)).collect();
            heads.push(RatioHead {
                pad_g: g[t_doc..].iter().sum(),
                pad_n: n[t_doc..].iter().sum(),
                g: g[..t_doc].to_vec(),
                g_unk: g_unk[..t_doc].to_vec(),
                n: n[..t_doc].to_vec(),
                n_unk: n_unk[..t_doc].to_vec(),
            });
        }
        Ok(Self {
            heads,
            word_of: doc.word_indices().to_vec(),
            num_words: doc.num_words(),
        })
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    /// `f(X_S)` for the removal set flagged in `removed` (one flag per word).
    pub fn output(&self, removed: &[bool]) -> f64 {
        let total: f64 = self
            .heads
            .iter()
            .map(|h| {
                let mut num = h.pad_n;
                let mut den = h.pad_g;
                for (t, &w) in self.word_of.iter().enumerate() {
                    if removed[w] {
                        num += h.n_unk[t];
                        den += h.g_unk[t];
                    } else {
                        num += h.n[t];
                        den += h.g[t];
                    }
                }
                num / den
            })
            .sum();
        total / self.heads.len() as f64
    }

    /// First-order expansion of `f` around the mean numerator and
    /// denominator of the size-`s` stratum. Returns `(c0, c)` such that the
    /// control variate is `c0 + Σ_{w ∈ S} c_w`.
    fn control_variate(&self, s: usize) -> (f64, Vec<f64>) {
        let d = self.num_words;
        let p = s as f64 / d as f64;
        let k = self.heads.len() as f64;
        let mut c0 = 0.0;
        let mut c = vec![0.0; d];
        for h in &self.heads {
            let mut dn = vec![0.0; d];
            let mut dg = vec![0.0; d];
            let mut n0 = h.pad_n;
            let mut g0 = h.pad_g;
            for (t, &w) in self.word_of.iter().enumerate() {
                n0 += h.n[t];
                g0 += h.g[t];
                dn[w] += h.n_unk[t] - h.n[t];
                dg[w] += h.g_unk[t] - h.g[t];
            }
            let n_bar = n0 + p * dn.iter().sum::<f64>();
            let g_bar = g0 + p * dg.iter().sum::<f64>();
            c0 += (n_bar / g_bar + (n0 - n_bar) / g_bar - n_bar * (g0 - g_bar) / (g_bar * g_bar)) / k;
            for w in 0..d {
                c[w] += (dn[w] / g_bar - n_bar * dg[w] / (g_bar * g_bar)) / k;
            }
        }
        (c0, c)
    }
}

/// Settings of the stratified Monte Carlo limit estimator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MonteCarloConfig {
    /// Removal sets drawn for each size `s`.
    pub samples_per_stratum: usize,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            samples_per_stratum: 500,
            seed: 0,
        }
    }
}

/// Conditional expectations `E[f(X) | j ∉ S]` by stratified sampling.
///
/// Every size `s` in `1..d` is visited; within a stratum, removal sets are
/// drawn uniformly and each one contributes to every word it keeps. A
/// linearization of `f` around the stratum mean, whose conditional
/// expectations are known in closed form, is subtracted as a control
/// variate. The estimator stays unbiased; only its variance shrinks.
pub fn monte_carlo_conditional_expectations(
    evaluator: &PerturbationEvaluator,
    cfg: &MonteCarloConfig,
) -> Result<Vec<f64>> {
    let d = evaluator.num_words();
    if cfg.samples_per_stratum == 0 {
        return Err(Error::invalid("Monte Carlo needs at least one sample per stratum"));
    }
    match d {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![evaluator.output(&[false])]),
        _ => {}
    }
    let m = cfg.samples_per_stratum;
    let df = d as f64;

    // E_s[f 1{j ∉ S}] for each stratum s in 1..d; s = d never keeps a word.
    let strata: Vec<Vec<f64>> = (1..d)
        .into_par_iter()
        .map(|s| {
            let mut rng = sample_rng(cfg.seed, s as u64);
            let (c0, c) = evaluator.control_variate(s);
            let c_total: f64 = c.iter().sum();
            let mut resid = vec![0.0; d];
            let mut removed = vec![false; d];
            for _ in 0..m {
                removed.iter_mut().for_each(|r| *r = false);
                let set = sample(&mut rng, d, s);
                let mut lin = c0;
                for w in set.iter() {
                    removed[w] = true;
                    lin += c[w];
                }
                let r = evaluator.output(&removed) - lin;
                for j in 0..d {
                    if !removed[j] {
                        resid[j] += r;
                    }
                }
            }
            let sf = s as f64;
            let keep = (df - sf) / df;
            let pair = sf * (df - sf) / (df * (df - 1.0));
            (0..d)
                .map(|j| resid[j] / m as f64 + c0 * keep + (c_total - c[j]) * pair)
                .collect()
        })
        .collect();

    // P(j ∉ S) = Σ_s (1/d)(d − s)/d = (d − 1) / (2d)
    let p_keep = (df - 1.0) / (2.0 * df);
    let mut cond = vec![0.0; d];
    for stratum in &strata {
        for (acc, v) in cond.iter_mut().zip(stratum) {
            *acc += v / df;
        }
    }
    cond.iter_mut().for_each(|c| *c /= p_keep);
    Ok(cond)
}

/// Limit coefficients from the stratified Monte Carlo estimator.
pub fn monte_carlo_limit_coefficients(
    doc: &Document,
    params: &ModelParams,
    cfg: &MonteCarloConfig,
) -> Result<WordCoefficients> {
    let doc = params.prepare(doc)?;
    let evaluator = PerturbationEvaluator::new(&doc, params)?;
    let cond = monte_carlo_conditional_expectations(&evaluator, cfg)?;
    Ok(WordCoefficients {
        words: doc.dictionary().to_vec(),
        values: limit_from_conditionals(&cond),
    })
}

/// Exact enumeration up to `enumeration_limit` words, Monte Carlo above.
pub fn limit_coefficients(
    doc: &Document,
    params: &ModelParams,
    enumeration_limit: usize,
    mc: &MonteCarloConfig,
) -> Result<WordCoefficients> {
    let d = params.prepare(doc)?.num_words();
    if d <= enumeration_limit.min(EXACT_LIMIT_MAX_WORDS) {
        exact_limit_coefficients(doc, params)
    } else {
        monte_carlo_limit_coefficients(doc, params, mc)
    }
}
