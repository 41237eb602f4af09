//! Shared inputs for the pipeline benchmarks.

use std::path::{Path, PathBuf};

use viskey::cas::{render_key_image, GlyphBank};
use viskey::classify::{load_corpus, train_glyphs};
use viskey::vcs::scheme_params;
use viskey::{BitImage, Model};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Model trained through the 2-of-2 pipeline on the bundled corpus.
pub fn model() -> Model {
    let glyphs = load_corpus(&corpus_dir()).expect("bundled corpus");
    train_glyphs(&glyphs, &scheme_params(2).unwrap(), 1)
        .expect("training")
        .model
}

/// A rendered six-character key.
pub fn key_image() -> BitImage {
    let bank = GlyphBank::load(&corpus_dir()).expect("bundled corpus");
    render_key_image("A7K2QZ", &bank, "sans", 4).expect("glyphs present")
}
