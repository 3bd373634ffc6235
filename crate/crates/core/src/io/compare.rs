//! Side-by-side comparison of explainers over a corpus, written as CSV in
//! long format: `doc, section, key_a, key_b, position, token, value`.
//!
//! Sections:
//!
//! * `weight`: one row per method and token;
//! * `pearson`, `spearman`: one row per pair of methods;
//! * `gap`: `l2` between sampled LIME and the attention approximation of
//!   its limit, and `linf` between sampled LIME and the exact limit when
//!   the dictionary is small enough to enumerate.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::explain::{compute_explanations, ExplainOptions};
use crate::explanation::Method;
use crate::io::tokenize::Tokenized;
use crate::lime::EXACT_LIMIT_MAX_WORDS;
use crate::model::ModelParams;

/// Pearson correlation; `NaN` when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    sab / (saa * sbb).sqrt()
}

/// Ranks starting at 1, ties sharing the average of their ranks.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocComparison {
    pub tokens: Vec<String>,
    pub weights: Vec<(Method, Vec<f64>)>,
    pub pearson: Vec<(Method, Method, f64)>,
    pub spearman: Vec<(Method, Method, f64)>,
    /// `‖lime-empirical − lime-limit-approx‖₂`.
    pub lime_approx_l2: f64,
    /// `‖lime-empirical − lime-limit-exact‖_∞`, when enumerable.
    pub lime_exact_linf: Option<f64>,
}

/// Methods compared for every document.
pub const COMPARED: [Method; 8] = [
    Method::AlphaAvg,
    Method::AlphaMax,
    Method::GradAvg,
    Method::GradL1,
    Method::GradL2,
    Method::GradTimesInput,
    Method::LimeEmpirical,
    Method::LimeLimitApprox,
];

pub fn compare_document(tokenized: &Tokenized, params: &ModelParams, opts: &ExplainOptions) -> Result<DocComparison> {
    let doc = params.prepare(&tokenized.document)?;
    let mut methods = COMPARED.to_vec();
    if doc.num_words() <= EXACT_LIMIT_MAX_WORDS {
        methods.push(Method::LimeLimitExact);
    }
    let set = compute_explanations(&doc, params, &methods, opts)?;
    let weights: Vec<(Method, Vec<f64>)> = set.explanations.into_iter().map(|e| (e.method, e.weights)).collect();
    let get = |m: Method| weights.iter().find(|(k, _)| *k == m).map(|(_, w)| w);

    let mut pearson_rows = Vec::new();
    let mut spearman_rows = Vec::new();
    for (i, (ma, wa)) in weights.iter().enumerate() {
        for (mb, wb) in &weights[i + 1..] {
            pearson_rows.push((*ma, *mb, pearson(wa, wb)));
            spearman_rows.push((*ma, *mb, spearman(wa, wb)));
        }
    }
    let emp = get(Method::LimeEmpirical).expect("compared");
    let approx = get(Method::LimeLimitApprox).expect("compared");
    let lime_approx_l2 = emp.iter().zip(approx).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let lime_exact_linf = get(Method::LimeLimitExact)
        .map(|ex| emp.iter().zip(ex).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    Ok(DocComparison {
        tokens: tokenized.words[..doc.len()].to_vec(),
        weights,
        pearson: pearson_rows,
        spearman: spearman_rows,
        lime_approx_l2,
        lime_exact_linf,
    })
}

/// Compares every document; results come back in input order.
pub fn compare_corpus(docs: &[Tokenized], params: &ModelParams, opts: &ExplainOptions) -> Result<Vec<DocComparison>> {
    docs.par_iter()
        .enumerate()
        .map(|(i, d)| {
            compare_document(d, params, opts).map_err(|e| Error::invalid(format!("document {}: {e}", i + 1)))
        })
        .collect()
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn write_csv<W: Write>(out: W, comparisons: &[DocComparison]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["doc", "section", "key_a", "key_b", "position", "token", "value"])
        .map_err(io)?;
    for (d, c) in comparisons.iter().enumerate() {
        let doc = d.to_string();
        for (m, ws) in &c.weights {
            for (t, (tok, v)) in c.tokens.iter().zip(ws).enumerate() {
                w.write_record([doc.as_str(), "weight", m.tag(), "", &t.to_string(), tok, &fmt_value(*v)])
                    .map_err(io)?;
            }
        }
        for (section, rows) in [("pearson", &c.pearson), ("spearman", &c.spearman)] {
            for (a, b, v) in rows {
                w.write_record([doc.as_str(), section, a.tag(), b.tag(), "", "", &fmt_value(*v)])
                    .map_err(io)?;
            }
        }
        w.write_record([
            doc.as_str(),
            "gap",
            Method::LimeEmpirical.tag(),
            Method::LimeLimitApprox.tag(),
            "l2",
            "",
            &fmt_value(c.lime_approx_l2),
        ])
        .map_err(io)?;
        if let Some(g) = c.lime_exact_linf {
            w.write_record([
                doc.as_str(),
                "gap",
                Method::LimeEmpirical.tag(),
                Method::LimeLimitExact.tag(),
                "linf",
                "",
                &fmt_value(g),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::DESK_DIMS;
    use crate::io::model_file::gen_model;
    use crate::io::tokenize::{tokenize, Vocabulary};
    use crate::lime::LimeConfig;
    use approx::assert_abs_diff_eq;

    #[test]
    fn correlation_examples() {
        assert_abs_diff_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0, epsilon = 1e-15);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_nan());
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
        assert_abs_diff_eq!(spearman(&[1.0, 5.0, 9.0], &[1.0, 100.0, 1000.0]), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn identical_heads_give_perfectly_correlated_attention() {
        let mut model = gen_model(DESK_DIMS, 4).unwrap();
        let first = model.params.heads[0].clone();
        for h in &mut model.params.heads {
            *h = first.clone();
        }
        let vocab = Vocabulary::new(&model.vocab, model.unk_id);
        let tok = tokenize("w1 w2 w3 w4 w5 w6", &vocab);
        let opts = ExplainOptions {
            lime: LimeConfig {
                samples: 300,
                ..LimeConfig::default()
            },
            ..ExplainOptions::default()
        };
        let c = compare_document(&tok, &model.params, &opts).unwrap();
        let r = c
            .pearson
            .iter()
            .find(|(a, b, _)| *a == Method::AlphaAvg && *b == Method::AlphaMax)
            .unwrap()
            .2;
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_document_csv() {
        let model = gen_model(DESK_DIMS, 5).unwrap();
        let vocab = Vocabulary::new(&model.vocab, model.unk_id);
        let docs = vec![tokenize("w3 w9 w3 w4", &vocab)];
        let opts = ExplainOptions {
            lime: LimeConfig {
                samples: 300,
                ..LimeConfig::default()
            },
            ..ExplainOptions::default()
        };
        let cmp = compare_corpus(&docs, &model.params, &opts).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &cmp).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "doc,section,key_a,key_b,position,token,value");
        // 9 methods × 4 tokens + 2 × C(9,2) correlations + 2 gaps
        assert_eq!(lines.len(), 1 + 36 + 72 + 2);
        assert!(lines.iter().skip(1).all(|l| l.starts_with("0,")));
        assert!(text.contains("0,gap,lime-empirical,lime-limit-exact,linf,,"));
    }
}
