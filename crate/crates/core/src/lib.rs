//! Group-key authentication through visual secret sharing.
//!
//! A central administrative server renders a random alphanumeric key as a
//! bilevel image, splits it into visual-cryptography shares, and later
//! reconstructs, denoises, and machine-reads stacked shares to decide whether
//! a group of members may authenticate.
//!
//! Pipeline stages, bottom-up:
//! - [`bitimage`]: bilevel rasters, PBM I/O, raster primitives
//! - [`vcs`]: 2-of-2 and Latin-square (2,n) visual threshold schemes
//! - [`denoise`]: adaptive windowed black-ratio filter
//! - [`ocr`]: glyph segmentation, normalization, 48-d zoning features
//! - [`classify`]: training through the share pipeline, 1-NN decoding
//! - [`cas`]: key generation, groups, authentication, line-protocol server

pub mod bitimage;
pub mod cas;
pub mod classify;
pub mod denoise;
mod error;
pub mod ocr;
pub mod rng;
pub mod vcs;

pub use bitimage::{BitImage, PbmVariant, Rect};
pub use cas::{AuthDecision, Cas, DenyReason, GlyphBank, GroupRecord};
pub use classify::{LabeledSample, Model};
pub use denoise::{Cleanup, FilterParams};
pub use error::{Error, Result};
pub use ocr::{FeatureVector, Glyph};
pub use vcs::{BasisMatrices, LatinSquare, SchemeParams, ShareSet, Variant};

/// The 36-symbol key alphabet, in tie-breaking order (digits before letters).
pub const ALPHABET: &[u8; 36] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
