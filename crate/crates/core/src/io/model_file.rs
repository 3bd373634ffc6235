//! Versioned JSON model files.
//!
//! Files are written in one canonical layout: fixed key order, one matrix
//! row per line, every real with 17 significant digits. Loading and saving
//! a canonical file reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::generate::random_params;
use crate::linalg::Matrix;
use crate::model::{Dims, Head, ModelParams};

pub const FORMAT_VERSION: u32 = 1;

/// Surface form of the unknown/padding token in generated vocabularies.
pub const UNK_TOKEN: &str = "[UNK]";

/// A model together with its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub params: ModelParams,
    /// Token strings; the index is the token id.
    pub vocab: Vec<String>,
    /// Id that out-of-vocabulary words map to.
    pub unk_id: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHead {
    key: Vec<Vec<f64>>,
    query: Vec<Vec<f64>>,
    value: Vec<Vec<f64>>,
    readout: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    format_version: u32,
    dims: Dims,
    unk_id: usize,
    vocab: Vec<String>,
    unk_embedding: Vec<f64>,
    cls_embedding: Vec<f64>,
    token_embeddings: Vec<Vec<f64>>,
    heads: Vec<RawHead>,
}

fn matrix(rows: Vec<Vec<f64>>, shape: (usize, usize), context: &'static str) -> Result<Matrix> {
    if rows.len() != shape.0 {
        return Err(Error::DimensionMismatch {
            context,
            expected: shape.0,
            got: rows.len(),
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != shape.1) {
        return Err(Error::DimensionMismatch {
            context,
            expected: shape.1,
            got: bad.len(),
        });
    }
    if shape.0 == 0 {
        return Ok(Matrix::zeros(0, shape.1));
    }
    Matrix::from_rows(&rows)
}

fn vector(v: Vec<f64>, len: usize, context: &'static str) -> Result<Vec<f64>> {
    if v.len() != len {
        return Err(Error::DimensionMismatch {
            context,
            expected: len,
            got: v.len(),
        });
    }
    Ok(v)
}

impl ModelFile {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.vocab.len() != self.params.dims.vocab_size {
            return Err(Error::DimensionMismatch {
                context: "vocabulary",
                expected: self.params.dims.vocab_size,
                got: self.vocab.len(),
            });
        }
        if self.unk_id >= self.vocab.len() {
            return Err(Error::TokenOutOfRange {
                id: self.unk_id,
                vocab_size: self.vocab.len(),
            });
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text)?;
        if raw.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(raw.format_version));
        }
        let dims = raw.dims;
        dims.validate()?;
        let heads = raw
            .heads
            .into_iter()
            .map(|h| {
                Ok(Head {
                    key: matrix(h.key, (dims.d_att, dims.d_embed), "head key")?,
                    query: matrix(h.query, (dims.d_att, dims.d_embed), "head query")?,
                    value: matrix(h.value, (dims.d_out, dims.d_embed), "head value")?,
                    readout: vector(h.readout, dims.d_out, "head readout")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let file = ModelFile {
            params: ModelParams {
                dims,
                token_embeddings: matrix(raw.token_embeddings, (dims.vocab_size, dims.d_embed), "token embeddings")?,
                unk_embedding: vector(raw.unk_embedding, dims.d_embed, "unk embedding")?,
                cls_embedding: vector(raw.cls_embedding, dims.d_embed, "cls embedding")?,
                heads,
            },
            vocab: raw.vocab,
            unk_id: raw.unk_id,
        };
        file.validate()?;
        Ok(file)
    }

    /// Canonical serialization.
    pub fn to_json(&self) -> String {
        let p = &self.params;
        let d = &p.dims;
        let mut out = String::new();
        out.push_str("{\n");
        let _ = writeln!(out, "  \"format_version\": {FORMAT_VERSION},");
        let _ = writeln!(
            out,
            "  \"dims\": {{\"vocab_size\": {}, \"t_max\": {}, \"d_embed\": {}, \"d_att\": {}, \"d_out\": {}, \"heads\": {}}},",
            d.vocab_size, d.t_max, d.d_embed, d.d_att, d.d_out, d.heads
        );
        let _ = writeln!(out, "  \"unk_id\": {},", self.unk_id);
        out.push_str("  \"vocab\": [");
        for (i, w) in self.vocab.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&serde_json::to_string(w).expect("strings always serialize"));
        }
        out.push_str("],\n");
        let _ = writeln!(out, "  \"unk_embedding\": {},", fmt_vec(&p.unk_embedding));
        let _ = writeln!(out, "  \"cls_embedding\": {},", fmt_vec(&p.cls_embedding));
        let _ = writeln!(out, "  \"token_embeddings\": {},", fmt_matrix(&p.token_embeddings, "    "));
        out.push_str("  \"heads\": [\n");
        for (i, h) in p.heads.iter().enumerate() {
            out.push_str("    {\n");
            let _ = writeln!(out, "      \"key\": {},", fmt_matrix(&h.key, "        "));
            let _ = writeln!(out, "      \"query\": {},", fmt_matrix(&h.query, "        "));
            let _ = writeln!(out, "      \"value\": {},", fmt_matrix(&h.value, "        "));
            let _ = writeln!(out, "      \"readout\": {}", fmt_vec(&h.readout));
            out.push_str(if i + 1 == p.heads.len() { "    }\n" } else { "    },\n" });
        }
        out.push_str("  ]\n}\n");
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn token_id(&self, word: &str) -> Option<usize> {
        self.vocab.iter().position(|w| w == word)
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| fmt_real(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_matrix(m: &Matrix, indent: &str) -> String {
    if m.rows() == 0 {
        return "[]".to_string();
    }
    let rows: Vec<String> = m.iter_rows().map(|r| format!("{indent}{}", fmt_vec(r))).collect();
    let outer = &indent[..indent.len() - 2];
    format!("[\n{}\n{outer}]", rows.join(",\n"))
}

/// Synthetic vocabulary `[UNK], w1, w2, …`.
pub fn synthetic_vocab(size: usize) -> Vec<String> {
    std::iter::once(UNK_TOKEN.to_string())
        .chain((1..size).map(|i| format!("w{i}")))
        .collect()
}

/// Random model with a synthetic vocabulary. Token 0 is `[UNK]` and embeds
/// exactly like padding, so unknown words and removed words coincide.
pub fn gen_model(dims: Dims, seed: u64) -> Result<ModelFile> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = random_params(dims, &mut rng);
    let h = params.unk_embedding.clone();
    params.token_embeddings.row_mut(0).copy_from_slice(&h);
    let file = ModelFile {
        params,
        vocab: synthetic_vocab(dims.vocab_size),
        unk_id: 0,
    };
    file.validate()?;
    Ok(file)
}
