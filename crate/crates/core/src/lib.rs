//! A single-layer multi-head attention classifier and the explanations one
//! can compute for it: attention weights, gradients, and LIME, together with
//! exhaustive oracles that check the closed-form expressions for each.

pub mod attention_explain;
pub mod error;
pub mod explain;
pub mod explanation;
pub mod generate;
pub mod gradient_explain;
pub mod io;
pub mod lime;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod verify;

pub use error::{Error, Result};
pub use explanation::{Explanation, Method};
pub use linalg::Matrix;
pub use model::{AttentionRecord, Dims, Document, EmbeddedDocument, Head, ModelParams};

// The guide's code listings run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/attention.md")]
    mod attention {}
    #[doc = include_str!("../../../book/src/gradients.md")]
    mod gradients {}
    #[doc = include_str!("../../../book/src/lime.md")]
    mod lime {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
