//! Whitespace tokenizer: words and tokens coincide.

use std::collections::HashMap;

use crate::model::Document;

/// Word-to-id lookup built from a model vocabulary.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    unk_id: usize,
}

impl Vocabulary {
    pub fn new(words: &[String], unk_id: usize) -> Self {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            index.entry(w.to_lowercase()).or_insert(i);
        }
        Self { index, unk_id }
    }

    pub fn unk_id(&self) -> usize {
        self.unk_id
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tokenized {
    pub document: Document,
    /// Normalized surface forms, one per token.
    pub words: Vec<String>,
    /// `true` where the word was not in the vocabulary and became UNK.
    pub oov: Vec<bool>,
}

impl Tokenized {
    pub fn has_oov(&self) -> bool {
        self.oov.iter().any(|&o| o)
    }
}

/// Lowercases, splits on whitespace and trims punctuation from both ends
/// of each word. Words left empty are dropped.
pub fn tokenize(text: &str, vocab: &Vocabulary) -> Tokenized {
    let mut ids = Vec::new();
    let mut words = Vec::new();
    let mut oov = Vec::new();
    for raw in text.split_whitespace() {
        let word = raw.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase();
        if word.is_empty() {
            continue;
        }
        match vocab.get(&word) {
            Some(id) => {
                ids.push(id);
                oov.push(false);
            }
            None => {
                ids.push(vocab.unk_id());
                oov.push(true);
            }
        }
        words.push(word);
    }
    Tokenized {
        document: Document::new(ids),
        words,
        oov,
    }
}
