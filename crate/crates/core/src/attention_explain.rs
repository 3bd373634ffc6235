//! Explanations read straight off the `[CLS]` attention weights.

use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::linalg::{dot, softmax, Matrix};
use crate::model::{AttentionRecord, Document, ModelParams};

/// Mean over heads of the attention each document token receives.
pub fn alpha_avg(record: &AttentionRecord, doc_len: usize) -> Explanation {
    let k = record.heads.len() as f64;
    let weights = (0..doc_len)
        .map(|t| record.heads.iter().map(|h| h.alpha[t]).sum::<f64>() / k)
        .collect();
    Explanation::new(Method::AlphaAvg, weights)
}

/// Largest attention any head gives each document token.
pub fn alpha_max(record: &AttentionRecord, doc_len: usize) -> Explanation {
    let weights = (0..doc_len)
        .map(|t| {
            record
                .heads
                .iter()
                .map(|h| h.alpha[t])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Explanation::new(Method::AlphaMax, weights)
}

/// The `T × T` attention matrix of one head with queries taken at document
/// positions: entry `(s, t)` is the weight slot `t` receives from the query
/// of slot `s`, normalized over the document positions only.
///
/// Only used for display; the classifier itself looks at the `[CLS]` row.
pub fn attention_matrix(doc: &Document, params: &ModelParams, head: usize) -> Result<Matrix> {
    let h = params.heads.get(head).ok_or(Error::HeadOutOfRange {
        head,
        heads: params.heads.len(),
    })?;
    let doc = params.prepare(doc)?;
    let t = doc.len();
    let embedded = params.embed(&doc)?;
    let scale = (params.dims.d_att as f64).sqrt().recip();
    let mut out = Matrix::zeros(t, t);
    let keys: Vec<Vec<f64>> = (0..t)
        .map(|u| h.key.matvec(embedded.embeddings.row(u)))
        .collect::<Result<_>>()?;
    for s in 0..t {
        let q = h.query.matvec(embedded.embeddings.row(s))?;
        let logits: Vec<f64> = keys.iter().map(|k| dot(&q, k) * scale).collect();
        out.row_mut(s).copy_from_slice(&softmax(&logits)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_document, random_params};
    use crate::model::tests::small_dims;
    use crate::model::{forward, HeadRecord};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record_with(alphas: &[&[f64]]) -> AttentionRecord {
        AttentionRecord {
            heads: alphas
                .iter()
                .map(|a| HeadRecord {
                    query: vec![],
                    logits: vec![],
                    alpha: a.to_vec(),
                    values: Matrix::zeros(0, 0),
                    v_tilde: vec![],
                    output: 0.0,
                })
                .collect(),
            output: 0.0,
        }
    }

    #[test]
    fn single_head_is_its_attention() {
        let rec = record_with(&[&[0.5, 0.3, 0.2]]);
        assert_eq!(alpha_avg(&rec, 2).weights, vec![0.5, 0.3]);
        assert_eq!(alpha_max(&rec, 2).weights, vec![0.5, 0.3]);
    }

    #[test]
    fn identical_heads() {
        let rec = record_with(&[&[0.6, 0.4], &[0.6, 0.4], &[0.6, 0.4]]);
        let avg = alpha_avg(&rec, 2).weights;
        assert_abs_diff_eq!(avg[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(avg[1], 0.4, epsilon = 1e-15);
        assert_eq!(alpha_max(&rec, 2).weights, vec![0.6, 0.4]);
    }

    #[test]
    fn two_heads_mean_and_max() {
        let rec = record_with(&[&[0.1, 0.9], &[0.3, 0.7]]);
        assert_abs_diff_eq!(alpha_avg(&rec, 1).weights[0], 0.2, epsilon = 1e-15);
        assert_eq!(alpha_max(&rec, 1).weights[0], 0.3);
    }

    #[test]
    fn positivity_and_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let params = random_params(small_dims(), &mut rng);
            let doc = random_document(20, 6, &mut rng);
            let rec = forward(&doc, &params).unwrap();
            let avg = alpha_avg(&rec, 6);
            let max = alpha_max(&rec, 6);
            assert!(avg.weights.iter().all(|&w| w > 0.0));
            for (a, m) in avg.weights.iter().zip(&max.weights) {
                assert!(m >= a);
            }
            assert!(avg.weights.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn attention_matrix_rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let params = random_params(small_dims(), &mut rng);
        let doc = random_document(20, 5, &mut rng);
        let a = attention_matrix(&doc, &params, 1).unwrap();
        assert_eq!((a.rows(), a.cols()), (5, 5));
        for row in a.iter_rows() {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        }
        assert!(matches!(
            attention_matrix(&doc, &params, 3),
            Err(Error::HeadOutOfRange { head: 3, heads: 3 })
        ));
    }

    #[test]
    fn attention_matrix_zero_query_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut params = random_params(small_dims(), &mut rng);
        params.heads[0].query = Matrix::zeros(4, 6);
        let doc = random_document(20, 4, &mut rng);
        let a = attention_matrix(&doc, &params, 0).unwrap();
        for &x in a.as_slice() {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn attention_matrix_single_token() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut dims = small_dims();
        dims.t_max = 1;
        let params = random_params(dims, &mut rng);
        let a = attention_matrix(&crate::model::Document::new(vec![4]), &params, 0).unwrap();
        assert_eq!(a.as_slice(), &[1.0]);
    }
}
