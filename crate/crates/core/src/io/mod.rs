//! File formats: corpora, model files, images and grid exports.

pub mod corpus_text;
pub mod export;
pub mod model_file;
pub mod raster;

pub use corpus_text::{format_corpus, parse_corpus, read_corpus, write_corpus};
pub use model_file::ModelFile;
pub use raster::{image_to_bag, images_to_corpus, Raster};
