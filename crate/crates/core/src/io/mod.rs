//! File formats and text handling around the model.

pub mod compare;
pub mod html;
pub mod model_file;
pub mod tokenize;
