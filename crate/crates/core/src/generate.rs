//! Seeded random models and documents.
//!
//! Weights are i.i.d. centered Gaussians with standard deviation
//! `1/√fan_in`; embeddings use `d_e` as their fan-in.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::linalg::Matrix;
use crate::model::{Dims, Document, Head, ModelParams};

/// Default dimensions of the reference model (`K = 8`, `T_max = 256`,
/// `d_e = 128`, `d_att = d_out = 64`).
pub const DEFAULT_DIMS: Dims = Dims {
    vocab_size: 1000,
    t_max: 256,
    d_embed: 128,
    d_att: 64,
    d_out: 64,
    heads: 8,
};

/// Small dimensions used throughout the verification suites.
pub const DESK_DIMS: Dims = Dims {
    vocab_size: 64,
    t_max: 32,
    d_embed: 16,
    d_att: 8,
    d_out: 8,
    heads: 4,
};

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Matrix {
    let data = gaussian_vec(rows * cols, fan_in, rng);
    Matrix::from_vec(rows, cols, data).expect("length matches by construction")
}

fn gaussian_vec<R: Rng + ?Sized>(len: usize, fan_in: usize, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("positive std");
    (0..len).map(|_| normal.sample(rng)).collect()
}

/// Draws a full parameter set. Panics if `dims` is invalid.
pub fn random_params<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> ModelParams {
    dims.validate().expect("valid dims");
    let de = dims.d_embed;
    let token_embeddings = gaussian_matrix(dims.vocab_size, de, de, rng);
    let unk_embedding = gaussian_vec(de, de, rng);
    let cls_embedding = gaussian_vec(de, de, rng);
    let heads = (0..dims.heads)
        .map(|_| Head {
            key: gaussian_matrix(dims.d_att, de, de, rng),
            query: gaussian_matrix(dims.d_att, de, de, rng),
            value: gaussian_matrix(dims.d_out, de, de, rng),
            readout: gaussian_vec(dims.d_out, dims.d_out, rng),
        })
        .collect();
    ModelParams {
        dims,
        token_embeddings,
        unk_embedding,
        cls_embedding,
        heads,
    }
}

/// Uniform token ids, repetitions allowed.
pub fn random_document<R: Rng + ?Sized>(vocab_size: usize, len: usize, rng: &mut R) -> Document {
    Document::new((0..len).map(|_| rng.random_range(0..vocab_size)).collect())
}

/// `len` distinct token ids, so that `d = T`.
pub fn random_distinct_document<R: Rng + ?Sized>(vocab_size: usize, len: usize, rng: &mut R) -> Document {
    assert!(len <= vocab_size, "cannot draw {len} distinct ids from {vocab_size}");
    Document::new(sample(rng, vocab_size, len).into_vec())
}

/// Rescales each head's query projection so that every attention score
/// `qᵀk / √d_att` the document can produce lies in `[-bound, bound]`.
///
/// The scores considered are those of the document slots as they are and
/// with the word replaced by the padding embedding, i.e. every value the
/// exponentials `g_t` and `g_{h,t}` can take under LIME perturbations.
pub fn clamp_logits(params: &mut ModelParams, doc: &Document, bound: f64) -> crate::Result<()> {
    let embedded = params.embed(doc)?;
    let scale = (params.dims.d_att as f64).sqrt().recip();
    let unk_rows: Vec<Vec<f64>> = (1..=params.dims.t_max).map(|t| params.unk_row(t)).collect();
    for i in 0..params.heads.len() {
        let q = params.cls_query(i)?;
        let probe = params.heads[i].key.transpose_matvec(&q)?;
        let largest = embedded
            .embeddings
            .iter_rows()
            .chain(unk_rows.iter().map(Vec::as_slice))
            .map(|row| (crate::linalg::dot(row, &probe) * scale).abs())
            .fold(0.0, f64::max);
        if largest > bound {
            params.heads[i].query.scale(bound / largest);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_params() {
        let a = random_params(DESK_DIMS, &mut ChaCha8Rng::seed_from_u64(42));
        let b = random_params(DESK_DIMS, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
        a.validate().unwrap();
    }

    #[test]
    fn distinct_document_has_full_dictionary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let doc = random_distinct_document(30, 12, &mut rng);
        assert_eq!(doc.num_words(), 12);
    }

    #[test]
    fn clamped_logits_stay_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut dims = DESK_DIMS;
        dims.t_max = 40;
        let mut params = random_params(dims, &mut rng);
        for h in &mut params.heads {
            h.query.scale(20.0);
        }
        let doc = random_distinct_document(dims.vocab_size, 16, &mut rng);
        clamp_logits(&mut params, &doc, 3.0).unwrap();
        let rec = params.forward(&doc).unwrap();
        for h in &rec.heads {
            assert!(h.logits.iter().all(|l| l.abs() <= 3.0 + 1e-12));
        }
    }
}
