//! Training through the share pipeline and nearest-neighbor decoding.
//!
//! Training glyphs are not featurized from the clean corpus bitmaps: each is
//! encoded into shares, stacked, cleaned and segmented first, so the model
//! sees exactly the kind of glyph the recognizer later receives.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::bitimage::{read_pbm, BitImage};
use crate::denoise::Cleanup;
use crate::ocr::{extract_features, normalize_glyph, segment, FeatureVector, FEATURE_LEN};
use crate::rng::SeededRng;
use crate::vcs::{encode, reconstruct, SchemeParams};
use crate::{Error, Result, ALPHABET};

const MODEL_MAGIC: &str = "viskey-model";

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub label: char,
    pub features: FeatureVector,
    /// Corpus file stem, `<LABEL>_<FONTID>`.
    pub source_id: String,
}

impl LabeledSample {
    /// Font part of the source id.
    pub fn font_id(&self) -> &str {
        self.source_id
            .split_once('_')
            .map_or(self.source_id.as_str(), |(_, f)| f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    samples: Vec<LabeledSample>,
    feature_len: usize,
    /// Scheme the training glyphs were encoded with. Not persisted.
    pub scheme: Option<SchemeParams>,
}

pub fn is_label(c: char) -> bool {
    c.is_ascii() && ALPHABET.contains(&(c as u8))
}

/// Position in the tie-breaking order: digits, then letters.
fn label_rank(c: char) -> usize {
    ALPHABET
        .iter()
        .position(|&a| a as char == c)
        .unwrap_or(usize::MAX)
}

pub fn euclidean_distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    squared_distance(a, b).map(f64::sqrt)
}

fn squared_distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::FeatureLength(a.len(), b.len()));
    }
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (y - x) * (y - x))
        .sum())
}

/// Nine significant digits.
fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

impl Model {
    pub fn new(samples: Vec<LabeledSample>, scheme: Option<SchemeParams>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyModel)?;
        let feature_len = first.features.len();
        for s in &samples {
            if s.features.len() != feature_len {
                return Err(Error::FeatureLength(feature_len, s.features.len()));
            }
            if !is_label(s.label) {
                return Err(Error::InvalidArgument(format!(
                    "label {:?} not in alphabet",
                    s.label
                )));
            }
        }
        Ok(Model {
            samples,
            feature_len,
            scheme,
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Copy without the samples of one font, e.g. for leave-one-font-out runs.
    pub fn without_font(&self, font_id: &str) -> Result<Model> {
        let samples = self
            .samples
            .iter()
            .filter(|s| s.font_id() != font_id)
            .cloned()
            .collect();
        Model::new(samples, self.scheme)
    }

    /// Text form: a `viskey-model <len> <count>` header, then one
    /// `label source_id f1 .. fN` line per sample.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MODEL_MAGIC} {} {}\n",
            self.feature_len,
            self.samples.len()
        );
        for s in &self.samples {
            let _ = write!(out, "{} {}", s.label, s.source_id);
            for &v in s.features.values() {
                out.push(' ');
                out.push_str(&format_value(v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Model> {
        let bad = |line: usize, message: &str| Error::ModelFormat {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad(1, "missing header"))?
            .split_whitespace()
            .collect();
        if header.len() != 3 || header[0] != MODEL_MAGIC {
            return Err(bad(1, "expected `viskey-model <len> <count>`"));
        }
        let feature_len: usize = header[1]
            .parse()
            .map_err(|_| bad(1, "bad feature length"))?;
        let count: usize = header[2].parse().map_err(|_| bad(1, "bad sample count"))?;

        let mut samples = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != feature_len + 2 {
                return Err(bad(lineno, "wrong number of fields"));
            }
            let mut label_chars = tokens[0].chars();
            let label = match (label_chars.next(), label_chars.next()) {
                (Some(c), None) if is_label(c) => c,
                _ => return Err(bad(lineno, "label must be one of 0-9, A-Z")),
            };
            let values = tokens[2..]
                .iter()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| bad(lineno, "non-numeric feature"))
                })
                .collect::<Result<Vec<_>>>()?;
            samples.push(LabeledSample {
                label,
                features: FeatureVector::new(values),
                source_id: tokens[1].to_string(),
            });
        }
        if samples.len() != count {
            return Err(bad(1, "sample count does not match header"));
        }
        Model::new(samples, None)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Model::from_text(&text)
    }
}

/// Label and distance of the nearest training sample. Equal distances go to
/// the earlier label in `0-9A-Z` order, then to the earlier sample.
pub fn classify_1nn(x: &FeatureVector, model: &Model) -> Result<(char, f64)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, s) in model.samples.iter().enumerate() {
        let d = squared_distance(x, &s.features)?;
        let key = (d, label_rank(s.label), i);
        let better = match best {
            None => true,
            Some((bd, br, _)) => d < bd || (d == bd && key.1 < br),
        };
        if better {
            best = Some(key);
        }
    }
    let (d, _, i) = best.ok_or(Error::EmptyModel)?;
    Ok((model.samples[i].label, d.sqrt()))
}

/// One corpus file.
#[derive(Clone, Debug)]
pub struct CorpusGlyph {
    pub label: char,
    pub font_id: String,
    pub image: BitImage,
    pub path: PathBuf,
}

impl CorpusGlyph {
    pub fn source_id(&self) -> String {
        format!("{}_{}", self.label, self.font_id)
    }
}

/// Splits a `<LABEL>_<FONTID>.pbm` file name.
pub fn parse_corpus_name(name: &str) -> Option<(char, String)> {
    let stem = name.strip_suffix(".pbm")?;
    let (label, font) = stem.split_once('_')?;
    let mut chars = label.chars();
    let c = chars.next()?;
    if chars.next().is_some() || !is_label(c) {
        return None;
    }
    if font.is_empty()
        || !font
            .chars()
            .all(|ch| ch.is_ascii_alphanumeric() || ch == '-')
    {
        return None;
    }
    Some((c, font.to_string()))
}

/// Reads every `.pbm` file of a corpus directory, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusGlyph>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::file(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::file(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "pbm") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Corpus(format!("no .pbm files in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|path| {
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default();
            let (label, font_id) = parse_corpus_name(name)
                .ok_or_else(|| Error::Corpus(format!("{name}: expected <LABEL>_<FONTID>.pbm")))?;
            let bytes = fs::read(&path).map_err(|e| Error::file(&path, e))?;
            let image = read_pbm(&bytes).map_err(|e| Error::Corpus(format!("{name}: {e}")))?;
            Ok(CorpusGlyph {
                label,
                font_id,
                image,
                path,
            })
        })
        .collect()
}

/// Shares 1 and 2 of a fresh encoding, stacked, cleaned and collapsed.
pub fn through_shares(secret: &BitImage, params: &SchemeParams, seed: u64) -> Result<BitImage> {
    let set = encode(secret, params, seed)?;
    let stack = reconstruct(&set.shares[..2])?;
    Cleanup::for_stack(params, &stack).apply(&stack)
}

/// Features of one glyph image after the share round trip; `None` when the
/// cleaned image does not segment into exactly one glyph.
pub fn pipeline_features(
    secret: &BitImage,
    params: &SchemeParams,
    seed: u64,
) -> Result<Option<FeatureVector>> {
    let clean = through_shares(secret, params, seed)?;
    let boxes = segment(&clean);
    if boxes.len() != 1 {
        return Ok(None);
    }
    let glyph = normalize_glyph(&clean, boxes[0])?;
    extract_features(&glyph).map(Some)
}

#[derive(Debug)]
pub struct Training {
    pub model: Model,
    /// Corpus files left out, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Builds a model from corpus glyphs. Glyph `k` (in file-name order) is
/// encoded with the `k`-th draw of a generator seeded by `seed`.
pub fn train_glyphs(glyphs: &[CorpusGlyph], params: &SchemeParams, seed: u64) -> Result<Training> {
    let mut rng = SeededRng::new(seed);
    let mut samples = Vec::with_capacity(glyphs.len());
    let mut skipped = Vec::new();
    for g in glyphs {
        let glyph_seed = rng.next_u64();
        match pipeline_features(&g.image, params, glyph_seed)? {
            Some(features) => samples.push(LabeledSample {
                label: g.label,
                features,
                source_id: g.source_id(),
            }),
            None => {
                warn!(
                    "{}: did not segment into one glyph, skipped",
                    g.path.display()
                );
                skipped.push((
                    g.path.clone(),
                    "segmentation did not yield one glyph".into(),
                ));
            }
        }
    }
    debug_assert!(samples.iter().all(|s| s.features.len() == FEATURE_LEN));
    Ok(Training {
        model: Model::new(samples, Some(*params))?,
        skipped,
    })
}

pub fn train_model(corpus_dir: &Path, params: &SchemeParams, seed: u64) -> Result<Training> {
    train_glyphs(&load_corpus(corpus_dir)?, params, seed)
}

/// Reads the text of a raw stacked key image.
pub fn decode_string(stack: &BitImage, model: &Model, cleanup: &Cleanup) -> Result<String> {
    let clean = cleanup.apply(stack)?;
    segment(&clean)
        .into_iter()
        .map(|b| {
            let g = normalize_glyph(&clean, b)?;
            let f = extract_features(&g)?;
            classify_1nn(&f, model).map(|(label, _)| label)
        })
        .collect()
}
