//! Central administrative server: key generation, key-image rendering,
//! share issue and collection, and automatic authentication.
//!
//! The key lives only in the server's [`GroupRecord`]. Members receive one
//! share each; authentication stacks whatever shares were submitted, reads
//! the stacked image with the recognizer, and compares the text against the
//! stored key.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use crate::bitimage::{or_merge, BitImage};
use crate::classify::{decode_string, load_corpus, Model};
use crate::denoise::Cleanup;
use crate::rng::SeededRng;
use crate::vcs::{block_counts, encode, scheme_params, SchemeParams, ShareHeader};
use crate::{Error, Result, ALPHABET};

pub mod protocol;
pub mod store;

/// Shares needed to authenticate. Both supported schemes are 2-threshold.
pub const THRESHOLD: usize = 2;
/// White border around a rendered key image.
pub const KEY_MARGIN: usize = 2;
pub const DEFAULT_SPACING: usize = 4;
pub const DEFAULT_FONT: &str = "sans";

/// Uniform random key over `0-9A-Z`.
pub fn generate_key(length: usize, seed: u64) -> Result<String> {
    if length == 0 {
        return Err(Error::InvalidArgument(
            "key length must be at least 1".into(),
        ));
    }
    let mut rng = SeededRng::new(seed);
    Ok((0..length)
        .map(|_| ALPHABET[rng.below(ALPHABET.len() as u32) as usize] as char)
        .collect())
}

/// Corpus glyphs indexed by `(label, font)`.
#[derive(Clone, Debug, Default)]
pub struct GlyphBank {
    glyphs: HashMap<(char, String), BitImage>,
}

impl GlyphBank {
    pub fn load(corpus_dir: &Path) -> Result<Self> {
        let glyphs = load_corpus(corpus_dir)?
            .into_iter()
            .map(|g| ((g.label, g.font_id), g.image))
            .collect();
        Ok(GlyphBank { glyphs })
    }

    pub fn get(&self, label: char, font_id: &str) -> Option<&BitImage> {
        self.glyphs.get(&(label, font_id.to_string()))
    }
}

/// Lays the key's glyphs left to right with `spacing` white columns between
/// them and a 2-pixel white margin.
pub fn render_key_image(
    key: &str,
    bank: &GlyphBank,
    font_id: &str,
    spacing: usize,
) -> Result<BitImage> {
    if key.is_empty() {
        return Err(Error::InvalidArgument("cannot render an empty key".into()));
    }
    if spacing < 2 {
        return Err(Error::InvalidArgument(format!(
            "glyph spacing {spacing} is below 2"
        )));
    }
    let glyphs = key
        .chars()
        .map(|c| {
            bank.get(c, font_id)
                .ok_or_else(|| Error::Corpus(format!("no glyph for {c:?} in font {font_id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let inner_w: usize =
        glyphs.iter().map(|g| g.width()).sum::<usize>() + spacing * (glyphs.len() - 1);
    let inner_h = glyphs.iter().map(|g| g.height()).max().unwrap_or(0);
    let mut canvas = BitImage::new(inner_w + 2 * KEY_MARGIN, inner_h + 2 * KEY_MARGIN)?;
    let mut col = KEY_MARGIN;
    for g in glyphs {
        canvas.blit(g, KEY_MARGIN, col);
        col += g.width() + spacing;
    }
    Ok(canvas)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DenyReason {
    InsufficientShares,
    DimensionMismatch,
    /// Carries the decoded text.
    KeyMismatch(String),
    UnknownGroup,
    UnknownMember,
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenyReason::InsufficientShares => f.write_str("InsufficientShares"),
            DenyReason::DimensionMismatch => f.write_str("DimensionMismatch"),
            DenyReason::KeyMismatch(s) => write!(f, "KeyMismatch({s})"),
            DenyReason::UnknownGroup => f.write_str("UnknownGroup"),
            DenyReason::UnknownMember => f.write_str("UnknownMember"),
        }
    }
}

impl std::str::FromStr for DenyReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "InsufficientShares" => DenyReason::InsufficientShares,
            "DimensionMismatch" => DenyReason::DimensionMismatch,
            "UnknownGroup" => DenyReason::UnknownGroup,
            "UnknownMember" => DenyReason::UnknownMember,
            _ => match s
                .strip_prefix("KeyMismatch(")
                .and_then(|r| r.strip_suffix(')'))
            {
                Some(decoded) => DenyReason::KeyMismatch(decoded.to_string()),
                None => return Err(Error::InvalidArgument(format!("unknown deny reason {s:?}"))),
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AuthDecision {
    Granted,
    Denied(DenyReason),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Pending,
    Granted,
    Denied(DenyReason),
}

impl From<&AuthDecision> for Status {
    fn from(d: &AuthDecision) -> Self {
        match d {
            AuthDecision::Granted => Status::Granted,
            AuthDecision::Denied(r) => Status::Denied(r.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IssuedShare {
    pub image: BitImage,
    pub issued: bool,
}

/// Server-side state of one group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupRecord {
    pub group_id: String,
    pub key: String,
    pub params: SchemeParams,
    pub secret_w: usize,
    pub secret_h: usize,
    /// Member `i` (1-based) holds `shares[i - 1]`.
    pub shares: Vec<IssuedShare>,
    pub submissions: BTreeMap<usize, BitImage>,
    pub status: Status,
}

impl GroupRecord {
    pub fn member_count(&self) -> usize {
        self.shares.len()
    }

    pub fn is_member(&self, member: usize) -> bool {
        (1..=self.shares.len()).contains(&member)
    }

    pub fn header(&self, member: usize) -> ShareHeader {
        ShareHeader {
            params: self.params,
            secret_w: self.secret_w,
            secret_h: self.secret_h,
            share_index: member,
            group_id: self.group_id.clone(),
        }
    }

    /// Records a share; a repeat submission from one member replaces the
    /// earlier one. Returns the number of distinct submitters.
    pub fn submit(&mut self, member: usize, share: BitImage) -> Result<usize> {
        if !self.is_member(member) {
            return Err(Error::InvalidArgument(format!(
                "member {member} outside 1..={}",
                self.shares.len()
            )));
        }
        self.submissions.insert(member, share);
        Ok(self.submissions.len())
    }

    pub fn reset(&mut self) {
        self.submissions.clear();
        self.status = Status::Pending;
    }
}

/// Whether every block of a share carries the scheme's constant weight, so
/// the share alone says nothing about the secret.
pub fn share_is_uniform(share: &BitImage, params: &SchemeParams) -> bool {
    share.width().is_multiple_of(params.block_w)
        && share.height().is_multiple_of(params.block_h)
        && block_counts(share, params.block_h, params.block_w)
            .iter()
            .all(|&w| w == params.share_weight())
}

/// Key rendering and recognition resources of a server.
#[derive(Clone, Debug)]
pub struct Cas {
    pub bank: GlyphBank,
    pub model: Model,
    pub font_id: String,
    pub spacing: usize,
}

impl Cas {
    pub fn new(bank: GlyphBank, model: Model) -> Self {
        Cas {
            bank,
            model,
            font_id: DEFAULT_FONT.to_string(),
            spacing: DEFAULT_SPACING,
        }
    }

    /// New group of `n` members. The key is drawn from keystream 0 of
    /// `seed`, the share encoding seed from keystream 1.
    pub fn create_group(
        &self,
        group_id: &str,
        n: usize,
        key_length: usize,
        seed: u64,
    ) -> Result<GroupRecord> {
        let params = scheme_params(n)?;
        let key = generate_key(key_length, seed)?;
        let image = render_key_image(&key, &self.bank, &self.font_id, self.spacing)?;
        let encode_seed = SeededRng::with_stream(seed, 1).next_u64();
        let set = encode(&image, &params, encode_seed)?;
        for share in &set.shares {
            if !share_is_uniform(share, &params) {
                return Err(Error::InvalidArgument(
                    "encoder produced a share with non-constant block weight".into(),
                ));
            }
        }
        Ok(GroupRecord {
            group_id: group_id.to_string(),
            key,
            params,
            secret_w: set.secret_w,
            secret_h: set.secret_h,
            shares: set
                .shares
                .into_iter()
                .map(|image| IssuedShare {
                    image,
                    issued: false,
                })
                .collect(),
            submissions: BTreeMap::new(),
            status: Status::Pending,
        })
    }

    /// Stacks the submitted shares and compares the recognized text with the
    /// stored key. Updates the record's status.
    pub fn authenticate(&self, record: &mut GroupRecord) -> AuthDecision {
        let decision = authenticate(record, &self.model);
        record.status = Status::from(&decision);
        decision
    }
}

pub fn authenticate(record: &GroupRecord, model: &Model) -> AuthDecision {
    if record.submissions.len() < THRESHOLD {
        return AuthDecision::Denied(DenyReason::InsufficientShares);
    }
    let want_w = record.secret_w * record.params.block_w;
    let want_h = record.secret_h * record.params.block_h;
    if record
        .submissions
        .values()
        .any(|s| s.width() != want_w || s.height() != want_h)
    {
        return AuthDecision::Denied(DenyReason::DimensionMismatch);
    }
    let shares: Vec<BitImage> = record.submissions.values().cloned().collect();
    let stack = match or_merge(&shares) {
        Ok(s) => s,
        Err(_) => return AuthDecision::Denied(DenyReason::DimensionMismatch),
    };
    let cleanup = Cleanup::for_stack(&record.params, &stack);
    let decoded = decode_string(&stack, model, &cleanup).unwrap_or_default();
    if decoded == record.key {
        AuthDecision::Granted
    } else {
        AuthDecision::Denied(DenyReason::KeyMismatch(decoded))
    }
}
