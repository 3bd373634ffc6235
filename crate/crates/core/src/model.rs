//! The classifier: token embeddings plus sinusoidal positions, one layer of
//! `K` attention heads queried by the `[CLS]` token, a linear readout per
//! head, and an average over heads.
//!
//! Conventions:
//!
//! * document positions are 1-based in the positional encoding, and the
//!   `[CLS]` query sits at position 0;
//! * the `[CLS]` slot produces a query only. Keys and values come from the
//!   `T_max` document slots, so attention normalizes over exactly those slots;
//! * slots past the end of the document hold the padding embedding `h`
//!   (the same vector that stands in for removed words in LIME);
//! * projections carry no bias.

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Model dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    /// Vocabulary size `D`.
    pub vocab_size: usize,
    /// Number of document slots `T_max`.
    pub t_max: usize,
    /// Embedding width `d_e`; must be even.
    pub d_embed: usize,
    /// Key/query width `d_att`.
    pub d_att: usize,
    /// Value width `d_out`.
    pub d_out: usize,
    /// Number of heads `K`.
    pub heads: usize,
}

impl Dims {
    pub fn validate(&self) -> Result<()> {
        if self.d_embed % 2 != 0 {
            return Err(Error::OddEmbeddingDim(self.d_embed));
        }
        let positive = [
            ("vocab_size", self.vocab_size),
            ("t_max", self.t_max),
            ("d_embed", self.d_embed),
            ("d_att", self.d_att),
            ("d_out", self.d_out),
            ("heads", self.heads),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Projections of a single attention head.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    /// `W_k`, `d_att × d_e`.
    pub key: Matrix,
    /// `W_q`, `d_att × d_e`.
    pub query: Matrix,
    /// `W_v`, `d_out × d_e`.
    pub value: Matrix,
    /// `W_ℓ`, the head's slice of the final linear layer (`d_out`).
    pub readout: Vec<f64>,
}

/// Every learned quantity of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    /// Row `j` is the embedding of token `j` (`D × d_e`).
    pub token_embeddings: Matrix,
    /// `h`: embedding of padding slots and of removed words.
    pub unk_embedding: Vec<f64>,
    pub cls_embedding: Vec<f64>,
    pub heads: Vec<Head>,
}

impl ModelParams {
    /// Checks that every array agrees with `dims` and holds finite values.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        d.validate()?;
        let check = |context: &'static str, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    context,
                    expected,
                    got,
                })
            }
        };
        check("token embedding rows", d.vocab_size, self.token_embeddings.rows())?;
        check("token embedding width", d.d_embed, self.token_embeddings.cols())?;
        check("unk embedding", d.d_embed, self.unk_embedding.len())?;
        check("cls embedding", d.d_embed, self.cls_embedding.len())?;
        check("head count", d.heads, self.heads.len())?;
        for head in &self.heads {
            check("key rows", d.d_att, head.key.rows())?;
            check("key cols", d.d_embed, head.key.cols())?;
            check("query rows", d.d_att, head.query.rows())?;
            check("query cols", d.d_embed, head.query.cols())?;
            check("value rows", d.d_out, head.value.rows())?;
            check("value cols", d.d_embed, head.value.cols())?;
            check("readout", d.d_out, head.readout.len())?;
        }

        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !self.token_embeddings.is_finite() {
            return Err(Error::NonFinite("token embeddings".into()));
        }
        if !finite(&self.unk_embedding) || !finite(&self.cls_embedding) {
            return Err(Error::NonFinite("unk/cls embedding".into()));
        }
        for (i, head) in self.heads.iter().enumerate() {
            if !head.key.is_finite()
                || !head.query.is_finite()
                || !head.value.is_finite()
                || !finite(&head.readout)
            {
                return Err(Error::NonFinite(format!("head {i}")));
            }
        }
        Ok(())
    }

    /// Checks token ids against the vocabulary and truncates to `T_max`.
    pub fn prepare(&self, doc: &Document) -> Result<Document> {
        doc.check_vocab(self.dims.vocab_size)?;
        Ok(doc.truncated(self.dims.t_max))
    }

    /// `W_p(t)` for this model's `d_e` and `T_max`.
    pub fn positional(&self, t: usize) -> Vec<f64> {
        positional_encoding(t, self.dims.d_embed, self.dims.t_max)
            .expect("dims validated: even embedding width")
    }

    /// `h + W_p(t)`: what slot `t` holds when it is padding or a removed word.
    pub fn unk_row(&self, t: usize) -> Vec<f64> {
        let mut row = self.positional(t);
        row.iter_mut()
            .zip(&self.unk_embedding)
            .for_each(|(r, h)| *r += h);
        row
    }

    /// The `[CLS]` query `W_q (cls + W_p(0))` of one head.
    pub fn cls_query(&self, head: usize) -> Result<Vec<f64>> {
        let h = self.heads.get(head).ok_or(Error::HeadOutOfRange {
            head,
            heads: self.heads.len(),
        })?;
        let mut cls = self.positional(0);
        cls.iter_mut()
            .zip(&self.cls_embedding)
            .for_each(|(c, e)| *c += e);
        h.query.matvec(&cls)
    }

    /// Embeds `doc` after vocabulary checks and truncation.
    pub fn embed(&self, doc: &Document) -> Result<EmbeddedDocument> {
        embed(doc, self)
    }

    pub fn forward(&self, doc: &Document) -> Result<AttentionRecord> {
        forward(doc, self)
    }
}

/// An ordered token sequence and its local dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    tokens: Vec<usize>,
    /// Distinct ids in order of first occurrence.
    dictionary: Vec<usize>,
    /// For each position, the index of its word in `dictionary`.
    word_of: Vec<usize>,
}

impl Document {
    pub fn new(tokens: Vec<usize>) -> Self {
        let mut dictionary: Vec<usize> = Vec::new();
        let mut word_of = Vec::with_capacity(tokens.len());
        for &tok in &tokens {
            let idx = match dictionary.iter().position(|&w| w == tok) {
                Some(i) => i,
                None => {
                    dictionary.push(tok);
                    dictionary.len() - 1
                }
            };
            word_of.push(idx);
        }
        Self {
            tokens,
            dictionary,
            word_of,
        }
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    /// Document length `T`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The `d` distinct token ids, in order of first occurrence.
    pub fn dictionary(&self) -> &[usize] {
        &self.dictionary
    }

    /// Size `d` of the local dictionary.
    pub fn num_words(&self) -> usize {
        self.dictionary.len()
    }

    /// Dictionary index of the word at each position.
    pub fn word_indices(&self) -> &[usize] {
        &self.word_of
    }

    pub fn truncated(&self, t_max: usize) -> Document {
        if self.tokens.len() <= t_max {
            self.clone()
        } else {
            Document::new(self.tokens[..t_max].to_vec())
        }
    }

    pub fn check_vocab(&self, vocab_size: usize) -> Result<()> {
        match self.tokens.iter().find(|&&id| id >= vocab_size) {
            Some(&id) => Err(Error::TokenOutOfRange { id, vocab_size }),
            None => Ok(()),
        }
    }
}

/// Embedded slots of a document: `T_max` rows of width `d_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDocument {
    pub embeddings: Matrix,
    /// Number of real (non-padding) slots.
    pub doc_len: usize,
}

/// Everything one head computed for the `[CLS]` query.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadRecord {
    pub query: Vec<f64>,
    /// Scaled scores `qᵀk_t / √d_att` over the `T_max` slots.
    pub logits: Vec<f64>,
    /// Attention weights over the `T_max` slots.
    pub alpha: Vec<f64>,
    /// `v_t` for every slot (`T_max × d_out`).
    pub values: Matrix,
    /// `Σ_t α_t v_t`.
    pub v_tilde: Vec<f64>,
    /// `W_ℓ ṽ`.
    pub output: f64,
}

/// Result of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub heads: Vec<HeadRecord>,
    /// Mean of the head outputs.
    pub output: f64,
}

impl AttentionRecord {
    /// Decision rule of the classifier.
    pub fn is_positive(&self) -> bool {
        self.output > 0.0
    }
}

/// Sinusoidal positional encoding.
///
/// For `i` in `1..=d_e/2` the angle is `t / T_max^(2i/d_e)`; component
/// `2i` (1-based) holds its cosine and component `2i − 1` its sine. In
/// 0-based storage the sine lands at `2i − 2` and the cosine at `2i − 1`.
pub fn positional_encoding(t: usize, d_embed: usize, t_max: usize) -> Result<Vec<f64>> {
    if d_embed % 2 != 0 {
        return Err(Error::OddEmbeddingDim(d_embed));
    }
    let mut out = vec![0.0; d_embed];
    let base = t_max as f64;
    for i in 1..=d_embed / 2 {
        let angle = t as f64 / base.powf(2.0 * i as f64 / d_embed as f64);
        out[2 * i - 2] = angle.sin();
        out[2 * i - 1] = angle.cos();
    }
    Ok(out)
}

/// Builds the `T_max` embedded slots of a document (truncating it first).
pub fn embed(doc: &Document, params: &ModelParams) -> Result<EmbeddedDocument> {
    let doc = params.prepare(doc)?;
    let dims = params.dims;
    let mut embeddings = Matrix::zeros(dims.t_max, dims.d_embed);
    for slot in 0..dims.t_max {
        let pos = slot + 1;
        let mut row = params.positional(pos);
        let base: &[f64] = match doc.tokens().get(slot) {
            Some(&tok) => params.token_embeddings.row(tok),
            None => &params.unk_embedding,
        };
        row.iter_mut().zip(base).for_each(|(r, b)| *r += b);
        embeddings.row_mut(slot).copy_from_slice(&row);
    }
    Ok(EmbeddedDocument {
        embeddings,
        doc_len: doc.len(),
    })
}

/// Runs every head on already-embedded slots.
pub fn forward_from_embeddings(
    embedded: &EmbeddedDocument,
    params: &ModelParams,
) -> Result<AttentionRecord> {
    let e = &embedded.embeddings;
    if e.rows() != params.dims.t_max || e.cols() != params.dims.d_embed {
        return Err(Error::DimensionMismatch {
            context: "embedded document",
            expected: params.dims.t_max * params.dims.d_embed,
            got: e.rows() * e.cols(),
        });
    }
    let scale = (params.dims.d_att as f64).sqrt().recip();
    let mut heads = Vec::with_capacity(params.heads.len());
    for (i, head) in params.heads.iter().enumerate() {
        let query = params.cls_query(i)?;
        // Fold the query into the key projection: qᵀ(W_k e) = (W_kᵀ q)ᵀ e.
        let probe = head.key.transpose_matvec(&query)?;
        let logits: Vec<f64> = e.iter_rows().map(|row| dot(row, &probe) * scale).collect();
        let alpha = crate::linalg::softmax(&logits)?;
        let values = e.mul_transpose(&head.value)?;
        let v_tilde = values.transpose_matvec(&alpha)?;
        let output = dot(&head.readout, &v_tilde);
        heads.push(HeadRecord {
            query,
            logits,
            alpha,
            values,
            v_tilde,
            output,
        });
    }
    let output = heads.iter().map(|h| h.output).sum::<f64>() / heads.len() as f64;
    Ok(AttentionRecord { heads, output })
}

/// `f(ξ)` together with the per-head intermediates.
pub fn forward(doc: &Document, params: &ModelParams) -> Result<AttentionRecord> {
    let embedded = embed(doc, params)?;
    forward_from_embeddings(&embedded, params)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::generate::{random_document, random_params};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn small_dims() -> Dims {
        Dims {
            vocab_size: 20,
            t_max: 8,
            d_embed: 6,
            d_att: 4,
            d_out: 3,
            heads: 3,
        }
    }

    #[test]
    fn positional_at_zero() {
        let p = positional_encoding(0, 8, 16).unwrap();
        for i in 0..4 {
            assert_eq!(p[2 * i], 0.0);
            assert_eq!(p[2 * i + 1], 1.0);
        }
    }

    #[test]
    fn positional_single_pair() {
        let p = positional_encoding(1, 2, 4).unwrap();
        assert_abs_diff_eq!(p[0], 0.25f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.25f64.cos(), epsilon = 1e-15);
    }

    #[test]
    fn positional_two_pairs_frozen() {
        // angles 3/16^(1/2) and 3/16^1, evaluated independently
        let expected = [
            0.6816387600233341,
            0.7316888688738209,
            0.18640329676226988,
            0.9824733131012553,
        ];
        let p = positional_encoding(3, 4, 16).unwrap();
        for (a, b) in p.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn positional_rejects_odd_width() {
        assert!(matches!(
            positional_encoding(1, 5, 8),
            Err(Error::OddEmbeddingDim(5))
        ));
    }

    #[test]
    fn empty_document_is_all_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = random_params(small_dims(), &mut rng);
        let e = embed(&Document::new(vec![]), &params).unwrap();
        for slot in 0..params.dims.t_max {
            assert_eq!(e.embeddings.row(slot), params.unk_row(slot + 1).as_slice());
        }
    }

    #[test]
    fn zero_embeddings_leave_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = random_params(small_dims(), &mut rng);
        params.token_embeddings = Matrix::zeros(20, 6);
        params.unk_embedding = vec![0.0; 6];
        let e = embed(&Document::new(vec![3, 4]), &params).unwrap();
        for slot in 0..params.dims.t_max {
            assert_eq!(e.embeddings.row(slot), params.positional(slot + 1).as_slice());
        }
    }

    #[test]
    fn one_token_document() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = random_params(small_dims(), &mut rng);
        let e = embed(&Document::new(vec![7]), &params).unwrap();
        let pos = params.positional(1);
        for (j, p) in pos.iter().enumerate() {
            assert_eq!(e.embeddings[(0, j)], params.token_embeddings[(7, j)] + p);
        }
        for slot in 1..params.dims.t_max {
            assert_eq!(e.embeddings.row(slot), params.unk_row(slot + 1).as_slice());
        }
        assert_eq!(e.doc_len, 1);
    }

    #[test]
    fn out_of_range_token() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = random_params(small_dims(), &mut rng);
        assert!(matches!(
            embed(&Document::new(vec![1, 20]), &params),
            Err(Error::TokenOutOfRange { id: 20, .. })
        ));
    }

    #[test]
    fn zero_readout_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = random_params(small_dims(), &mut rng);
        for h in &mut params.heads {
            h.readout = vec![0.0; 3];
        }
        let doc = random_document(20, 5, &mut rng);
        assert_eq!(forward(&doc, &params).unwrap().output, 0.0);
    }

    #[test]
    fn zero_query_gives_uniform_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut params = random_params(small_dims(), &mut rng);
        for h in &mut params.heads {
            h.query = Matrix::zeros(4, 6);
        }
        let doc = random_document(20, 5, &mut rng);
        let rec = forward(&doc, &params).unwrap();
        for h in &rec.heads {
            for &a in &h.alpha {
                assert_abs_diff_eq!(a, 1.0 / 8.0, epsilon = 1e-15);
            }
            let mut mean = vec![0.0; 3];
            for row in h.values.iter_rows() {
                crate::linalg::axpy(1.0 / 8.0, row, &mut mean);
            }
            for (a, b) in mean.iter().zip(&h.v_tilde) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            }
        }
    }

    /// K = 1, T_max = 3, d_e = d_att = d_out = 2, hand-picked integer weights.
    /// Expected values come from a separate scalar evaluation of the model.
    #[test]
    fn hand_computed_forward() {
        let params = ModelParams {
            dims: Dims {
                vocab_size: 3,
                t_max: 3,
                d_embed: 2,
                d_att: 2,
                d_out: 2,
                heads: 1,
            },
            token_embeddings: Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, -1.0]]).unwrap(),
            unk_embedding: vec![0.0, 0.0],
            cls_embedding: vec![1.0, 1.0],
            heads: vec![Head {
                key: Matrix::identity(2),
                query: Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap(),
                value: Matrix::from_rows(&[[2.0, 0.0], [1.0, -1.0]]).unwrap(),
                readout: vec![1.0, -2.0],
            }],
        };
        params.validate().unwrap();
        let rec = forward(&Document::new(vec![2, 0]), &params).unwrap();
        let alpha = [0.1262629455349122, 0.7691587106629025, 0.10457834380218534];
        for (a, b) in rec.heads[0].alpha.iter().zip(alpha) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(rec.output, 1.3080521088725037, epsilon = 1e-13);
    }

    #[test]
    fn forward_is_deterministic() {
        let params = random_params(small_dims(), &mut ChaCha8Rng::seed_from_u64(9));
        let twin = random_params(small_dims(), &mut ChaCha8Rng::seed_from_u64(9));
        let doc = Document::new(vec![1, 2, 3, 2]);
        assert_eq!(forward(&doc, &params).unwrap(), forward(&doc, &twin).unwrap());
    }

    #[test]
    fn long_documents_are_truncated() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let params = random_params(small_dims(), &mut rng);
        let long = random_document(20, 13, &mut rng);
        let short = long.truncated(8);
        assert_eq!(short.len(), 8);
        assert_eq!(
            forward(&long, &params).unwrap(),
            forward(&short, &params).unwrap()
        );
    }

    #[test]
    fn decision_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let params = random_params(small_dims(), &mut rng);
        for _ in 0..20 {
            let doc = random_document(20, 6, &mut rng);
            let rec = forward(&doc, &params).unwrap();
            assert_eq!(rec.is_positive(), rec.output > 0.0);
        }
    }

    #[test]
    fn record_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let params = random_params(small_dims(), &mut rng);
            let doc = random_document(20, 5, &mut rng);
            let rec = forward(&doc, &params).unwrap();
            let mut total = 0.0;
            for (h, head) in rec.heads.iter().zip(&params.heads) {
                assert_abs_diff_eq!(h.alpha.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
                total += dot(&head.readout, &h.v_tilde);
            }
            assert_abs_diff_eq!(rec.output, total / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn relabeling_vocabulary_leaves_output_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let params = random_params(small_dims(), &mut rng);
        let doc = random_document(20, 6, &mut rng);
        // permutation j -> (7 j + 3) mod 20 (7 is invertible mod 20)
        let perm = |j: usize| (7 * j + 3) % 20;
        let mut relabeled = params.clone();
        for j in 0..20 {
            relabeled
                .token_embeddings
                .row_mut(perm(j))
                .copy_from_slice(params.token_embeddings.row(j));
        }
        let doc2 = Document::new(doc.tokens().iter().map(|&j| perm(j)).collect());
        assert_abs_diff_eq!(
            forward(&doc, &params).unwrap().output,
            forward(&doc2, &relabeled).unwrap().output,
            epsilon = 1e-12
        );
    }

    #[test]
    fn logits_carry_inverse_sqrt_d_att() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let params = random_params(small_dims(), &mut rng);
        let doc = random_document(20, 5, &mut rng);
        let mut wide = params.clone();
        wide.dims.d_att = 8;
        for h in &mut wide.heads {
            let pad = |m: &Matrix| {
                let mut out = Matrix::zeros(8, m.cols());
                for i in 0..m.rows() {
                    out.row_mut(i).copy_from_slice(m.row(i));
                }
                out
            };
            h.key = pad(&h.key);
            h.query = pad(&h.query);
        }
        wide.validate().unwrap();
        let a = forward(&doc, &params).unwrap();
        let b = forward(&doc, &wide).unwrap();
        let factor = (4.0f64 / 8.0).sqrt();
        for (ha, hb) in a.heads.iter().zip(&b.heads) {
            for (la, lb) in ha.logits.iter().zip(&hb.logits) {
                assert_abs_diff_eq!(la * factor, *lb, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dictionary_tracks_first_occurrence() {
        let doc = Document::new(vec![5, 3, 5, 9, 3]);
        assert_eq!(doc.dictionary(), &[5, 3, 9]);
        assert_eq!(doc.word_indices(), &[0, 1, 0, 2, 1]);
        assert_eq!(doc.num_words(), 3);
    }
}
