//! Gradient of the model output with respect to each token embedding, and
//! the saliency explainers built from it.
//!
//! For one head with attention `α`, values `v_t`, readout `W_ℓ` and `[CLS]`
//! query `q`, the gradient with respect to the embedding of slot `t` is
//!
//! ```text
//! α_t W_vᵀ W_ℓᵀ  +  (α_t / √d_att) · W_ℓ (v_t − Σ_s α_s v_s) · W_kᵀ q
//! ```
//!
//! and the model gradient is the mean over heads. The first term flows
//! through the value path, the second through the attention weights.

use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::linalg::{axpy, dot, norm1, norm2, Matrix};
use crate::model::{embed, forward_from_embeddings, Document, EmbeddedDocument, ModelParams};

/// `T × d_e` matrix whose row `t` is `∇_{e_t} f`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub grads: Matrix,
}

impl GradientField {
    pub fn doc_len(&self) -> usize {
        self.grads.rows()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.grads.row(t)
    }
}

/// Analytic gradient for every document position, from one forward pass.
pub fn gradient_closed_form(doc: &Document, params: &ModelParams) -> Result<GradientField> {
    let scale = (params.dims.d_att as f64).sqrt().recip();
    closed_form_with_scale(doc, params, scale)
}

/// The closed form with the `1/√d_att` factor of the attention term left
/// out. Wrong on purpose: verification runs use it to check that a broken
/// gradient is caught.
pub fn corrupted_gradient(doc: &Document, params: &ModelParams) -> Result<GradientField> {
    closed_form_with_scale(doc, params, 1.0)
}

fn closed_form_with_scale(doc: &Document, params: &ModelParams, scale: f64) -> Result<GradientField> {
    let doc = params.prepare(doc)?;
    let embedded = embed(&doc, params)?;
    let record = forward_from_embeddings(&embedded, params)?;
    let k = params.heads.len() as f64;

    let mut grads = Matrix::zeros(doc.len(), params.dims.d_embed);
    for (head, rec) in params.heads.iter().zip(&record.heads) {
        // W_vᵀ W_ℓᵀ and W_kᵀ q do not depend on t.
        let value_dir = head.value.transpose_matvec(&head.readout)?;
        let key_dir = head.key.transpose_matvec(&rec.query)?;
        let pooled = dot(&head.readout, &rec.v_tilde);
        for t in 0..doc.len() {
            let alpha = rec.alpha[t];
            let centered = dot(&head.readout, rec.values.row(t)) - pooled;
            let row = grads.row_mut(t);
            axpy(alpha / k, &value_dir, row);
            axpy(alpha * scale * centered / k, &key_dir, row);
        }
    }
    Ok(GradientField { grads })
}

/// Central differences of `f` in every coordinate of every document row.
///
/// Only rows `t ≤ T` are perturbed; padding slots are not inputs.
pub fn finite_diff_gradient(doc: &Document, params: &ModelParams, step: f64) -> Result<GradientField> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("finite difference step must be positive, got {step}")));
    }
    let doc = params.prepare(doc)?;
    let base = embed(&doc, params)?;
    let de = params.dims.d_embed;
    let mut grads = Matrix::zeros(doc.len(), de);
    let mut probe = base.clone();
    for t in 0..doc.len() {
        for j in 0..de {
            let orig = base.embeddings[(t, j)];
            probe.embeddings[(t, j)] = orig + step;
            let plus = forward_from_embeddings(&probe, params)?.output;
            probe.embeddings[(t, j)] = orig - step;
            let minus = forward_from_embeddings(&probe, params)?.output;
            probe.embeddings[(t, j)] = orig;
            grads[(t, j)] = (plus - minus) / (2.0 * step);
        }
    }
    Ok(GradientField { grads })
}

/// Mean of each gradient row.
pub fn g_avg(field: &GradientField) -> Explanation {
    let weights = field
        .grads
        .iter_rows()
        .map(|r| r.iter().sum::<f64>() / r.len() as f64)
        .collect();
    Explanation::new(Method::GradAvg, weights)
}

/// L1 norm of each gradient row.
pub fn g_l1(field: &GradientField) -> Explanation {
    Explanation::new(Method::GradL1, field.grads.iter_rows().map(norm1).collect())
}

/// L2 norm of each gradient row.
pub fn g_l2(field: &GradientField) -> Explanation {
    Explanation::new(Method::GradL2, field.grads.iter_rows().map(norm2).collect())
}

/// Gradient times input, `e_tᵀ ∇_{e_t} f`, with the full embedding
/// (word plus position).
pub fn g_times_input(field: &GradientField, embedded: &EmbeddedDocument) -> Result<Explanation> {
    if embedded.doc_len != field.doc_len() || embedded.embeddings.cols() != field.grads.cols() {
        return Err(Error::DimensionMismatch {
            context: "gradient times input",
            expected: field.doc_len(),
            got: embedded.doc_len,
        });
    }
    let weights = field
        .grads
        .iter_rows()
        .zip(embedded.embeddings.iter_rows())
        .map(|(g, e)| dot(g, e))
        .collect();
    Ok(Explanation::new(Method::GradTimesInput, weights))
}

/// Gradient times input against the word embedding alone (`W_e[ξ_t]`,
/// positional encoding left out).
pub fn g_times_word_embedding(
    field: &GradientField,
    doc: &Document,
    params: &ModelParams,
) -> Result<Explanation> {
    let doc = params.prepare(doc)?;
    if doc.len() != field.doc_len() {
        return Err(Error::DimensionMismatch {
            context: "gradient times word embedding",
            expected: field.doc_len(),
            got: doc.len(),
        });
    }
    let weights = doc
        .tokens()
        .iter()
        .zip(field.grads.iter_rows())
        .map(|(&tok, g)| dot(g, params.token_embeddings.row(tok)))
        .collect();
    Ok(Explanation::new(Method::GradTimesInput, weights))
}

/// Row-wise relative L2 error `‖a_t − b_t‖ / ‖b_t‖`, maximized over rows.
///
/// Rows where `b_t` vanishes fall back to the absolute error.
pub fn max_relative_row_error(a: &GradientField, b: &GradientField) -> f64 {
    a.grads
        .iter_rows()
        .zip(b.grads.iter_rows())
        .map(|(x, y)| {
            let diff: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            let denom = norm2(y);
            if denom > 0.0 {
                norm2(&diff) / denom
            } else {
                norm2(&diff)
            }
        })
        .fold(0.0, f64::max)
}
