//! Runs a set of explainers on one document and gathers the results into a
//! serializable report.

use serde::{Deserialize, Serialize};

use crate::attention_explain::{alpha_avg, alpha_max};
use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::gradient_explain::{g_avg, g_l1, g_l2, g_times_input, g_times_word_embedding, gradient_closed_form};
use crate::io::tokenize::Tokenized;
use crate::lime::{approx_limit_coefficients, empirical_lime, exact_limit_coefficients, LimeConfig};
use crate::model::{embed, forward_from_embeddings, ModelParams};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExplainOptions {
    pub lime: LimeConfig,
    /// Multiply gradients by the word embedding only, leaving out the
    /// positional encoding.
    pub gxi_word_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimeSummary {
    pub intercept: f64,
    pub samples: usize,
    pub bandwidth: f64,
    pub lambda: f64,
    pub seed: u64,
}

/// Explanations of one document, in the order the methods were requested.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationSet {
    pub output: f64,
    pub explanations: Vec<Explanation>,
    /// Per-head attention over the document positions.
    pub attention: Vec<Vec<f64>>,
    pub lime: Option<LimeSummary>,
}

impl ExplanationSet {
    pub fn get(&self, method: Method) -> Option<&Explanation> {
        self.explanations.iter().find(|e| e.method == method)
    }
}

/// Computes every requested explanation. The forward pass and the
/// gradient are computed once and shared.
pub fn compute_explanations(
    doc: &crate::model::Document,
    params: &ModelParams,
    methods: &[Method],
    opts: &ExplainOptions,
) -> Result<ExplanationSet> {
    let doc = params.prepare(doc)?;
    if doc.is_empty() {
        return Err(Error::invalid("document has no tokens"));
    }
    let t = doc.len();
    let embedded = embed(&doc, params)?;
    let record = forward_from_embeddings(&embedded, params)?;
    let needs_grad = methods
        .iter()
        .any(|m| matches!(m, Method::GradAvg | Method::GradL1 | Method::GradL2 | Method::GradTimesInput));
    let grad = if needs_grad {
        Some(gradient_closed_form(&doc, params)?)
    } else {
        None
    };
    let mut lime = None;
    let mut explanations = Vec::with_capacity(methods.len());
    for &m in methods {
        let field = || grad.as_ref().expect("gradient computed for gradient methods");
        let e = match m {
            Method::AlphaAvg => alpha_avg(&record, t),
            Method::AlphaMax => alpha_max(&record, t),
            Method::GradAvg => g_avg(field()),
            Method::GradL1 => g_l1(field()),
            Method::GradL2 => g_l2(field()),
            Method::GradTimesInput if opts.gxi_word_only => g_times_word_embedding(field(), &doc, params)?,
            Method::GradTimesInput => g_times_input(field(), &embedded)?,
            Method::LimeEmpirical => {
                let fit = empirical_lime(&doc, params, &opts.lime)?;
                lime = Some(LimeSummary {
                    intercept: fit.intercept,
                    samples: opts.lime.samples,
                    bandwidth: opts.lime.bandwidth,
                    lambda: opts.lime.lambda,
                    seed: opts.lime.seed,
                });
                fit.explanation(&doc)
            }
            Method::LimeLimitExact => exact_limit_coefficients(&doc, params)?.to_explanation(&doc, m),
            Method::LimeLimitApprox => approx_limit_coefficients(&doc, params)?.to_explanation(&doc, m),
        };
        explanations.push(e);
    }
    Ok(ExplanationSet {
        output: record.output,
        attention: record.heads.iter().map(|h| h.alpha[..t].to_vec()).collect(),
        explanations,
        lime,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub methods: Vec<Method>,
    pub options: ExplainOptions,
    /// Wall-clock milliseconds per stage; only present when requested,
    /// since it breaks byte-for-byte reproducibility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<std::collections::BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub schema_version: u32,
    pub tokens: Vec<String>,
    pub token_ids: Vec<usize>,
    pub oov: Vec<bool>,
    /// Tokens past `T_max` that were dropped.
    pub truncated: usize,
    pub output: f64,
    pub positive: bool,
    pub explanations: Vec<Explanation>,
    pub attention: Vec<Vec<f64>>,
    pub lime: Option<LimeSummary>,
    pub metadata: ReportMetadata,
}

impl ExplanationReport {
    pub fn build(tokenized: &Tokenized, set: ExplanationSet, methods: &[Method], opts: &ExplainOptions) -> Self {
        let t = set.attention.first().map_or(0, Vec::len);
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            tokens: tokenized.words[..t].to_vec(),
            token_ids: tokenized.document.tokens()[..t].to_vec(),
            oov: tokenized.oov[..t].to_vec(),
            truncated: tokenized.words.len() - t,
            output: set.output,
            positive: set.output > 0.0,
            explanations: set.explanations,
            attention: set.attention,
            lime: set.lime,
            metadata: ReportMetadata {
                seed: opts.lime.seed,
                methods: methods.to_vec(),
                options: *opts,
                timings_ms: None,
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_document, random_params, DESK_DIMS};
    use crate::io::model_file::gen_model;
    use crate::io::tokenize::{tokenize, Vocabulary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_methods_on_five_tokens() {
        let mut rng = ChaCha8Rng::seed_from_u64(90);
        let params = random_params(DESK_DIMS, &mut rng);
        let doc = random_document(DESK_DIMS.vocab_size, 5, &mut rng);
        let opts = ExplainOptions {
            lime: LimeConfig {
                samples: 500,
                ..LimeConfig::default()
            },
            ..ExplainOptions::default()
        };
        let set = compute_explanations(&doc, &params, &Method::STANDARD, &opts).unwrap();
        assert_eq!(set.explanations.len(), 7);
        assert!(set.explanations.iter().all(|e| e.len() == 5));
        assert!(set.get(Method::AlphaAvg).unwrap().weights.iter().all(|&w| w > 0.0));
        assert!(set.lime.is_some());
    }

    #[test]
    fn empty_document_is_rejected() {
        let params = random_params(DESK_DIMS, &mut ChaCha8Rng::seed_from_u64(0));
        let doc = crate::model::Document::new(vec![]);
        assert!(compute_explanations(&doc, &params, &[Method::AlphaAvg], &ExplainOptions::default()).is_err());
    }

    #[test]
    fn report_fields_are_stable() {
        let model = gen_model(DESK_DIMS, 1).unwrap();
        let vocab = Vocabulary::new(&model.vocab, model.unk_id);
        let tok = tokenize("w1 w2 nope w3", &vocab);
        let methods = [Method::AlphaAvg, Method::GradTimesInput];
        let opts = ExplainOptions::default();
        let set = compute_explanations(&tok.document, &model.params, &methods, &opts).unwrap();
        let report = ExplanationReport::build(&tok, set, &methods, &opts);
        let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            [
                "attention",
                "explanations",
                "lime",
                "metadata",
                "oov",
                "output",
                "positive",
                "schema_version",
                "token_ids",
                "tokens",
                "truncated"
            ]
        );
        assert_eq!(report.oov, vec![false, false, true, false]);
        let back: ExplanationReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn long_text_is_truncated_in_report() {
        let model = gen_model(DESK_DIMS, 1).unwrap();
        let vocab = Vocabulary::new(&model.vocab, model.unk_id);
        let text: Vec<String> = (1..=40).map(|i| format!("w{i}")).collect();
        let tok = tokenize(&text.join(" "), &vocab);
        let set = compute_explanations(&tok.document, &model.params, &[Method::AlphaMax], &ExplainOptions::default())
            .unwrap();
        let report = ExplanationReport::build(&tok, set, &[Method::AlphaMax], &ExplainOptions::default());
        assert_eq!(report.tokens.len(), 32);
        assert_eq!(report.truncated, 8);
    }
}
