//! Data model and on-disk formats for frame banks, narration tracks, score
//! curves, generated embedding sequences and selections.
//!
//! Frame banks use a small binary container:
//!
//! ```text
//! "TGFB" | u32 version (=1) | u32 n | u32 dim | u8 has_brightness
//! n*dim f32 rows | [n f32 brightness]
//! ```
//!
//! All integers and floats are little-endian. Everything else is UTF-8 JSON;
//! the schemas are described in `docs/formats.md`.
//!
//! Embeddings are unit-normalized when loaded, so cosine similarity between
//! any two stored vectors is a plain dot product.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::StoreError;

pub const FRAME_BANK_MAGIC: &[u8; 4] = b"TGFB";
pub const FRAME_BANK_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 1;

/// Frames are sampled at one per second; frame indices and seconds coincide.
pub const FPS: f64 = 1.0;

/// Rows whose L2 norm is within this distance of 1 are stored untouched.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x as f64 * y as f64)
        .sum()
}

/// Cosine similarity of two unit-norm vectors, i.e. their dot product.
pub fn cosine_sim(a: &[f32], b: &[f32]) -> Result<f64, StoreError> {
    if a.len() != b.len() {
        return Err(StoreError::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(dot(a, b))
}

/// Normalizes every `dim`-wide row of `data` in place and returns the indices
/// of rows that actually had to be rescaled.
pub fn normalize_rows(data: &mut [f32], dim: usize) -> Result<Vec<usize>, StoreError> {
    let mut rescaled = Vec::new();
    for (i, row) in data.chunks_exact_mut(dim).enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite(i));
        }
        let norm = dot(row, row).sqrt();
        if norm == 0.0 {
            return Err(StoreError::ZeroNorm(i));
        }
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            for v in row.iter_mut() {
                *v = (*v as f64 / norm) as f32;
            }
            rescaled.push(i);
        }
    }
    Ok(rescaled)
}

fn normalize_vec(v: &mut [f32], what: impl Fn() -> String) -> Result<(), StoreError> {
    normalize_rows(v, v.len().max(1)).map(|_| ()).map_err(|e| match e {
        StoreError::ZeroNorm(_) => StoreError::Track(format!("{} has zero norm", what())),
        StoreError::NonFinite(_) => StoreError::Track(format!("{} is not finite", what())),
        other => other,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, StoreError> {
    fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    fs::write(path, bytes).map_err(|source| StoreError::Io {
        path: path.to_owned(),
        source,
    })
}

fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, StoreError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Per-frame embeddings of the body content at 1 fps.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBank {
    n: usize,
    dim: usize,
    embeddings: Vec<f32>,
    brightness: Option<Vec<f32>>,
    source_id: String,
}

/// What happened while a bank was loaded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub rescaled_rows: Vec<usize>,
}

impl FrameBank {
    /// Builds a bank from a row-major `n*dim` matrix, normalizing each row.
    pub fn new(
        dim: usize,
        embeddings: Vec<f32>,
        brightness: Option<Vec<f32>>,
        source_id: impl Into<String>,
    ) -> Result<Self, StoreError> {
        Self::with_report(dim, embeddings, brightness, source_id).map(|(b, _)| b)
    }

    pub fn with_report(
        dim: usize,
        mut embeddings: Vec<f32>,
        brightness: Option<Vec<f32>>,
        source_id: impl Into<String>,
    ) -> Result<(Self, LoadReport), StoreError> {
        if dim == 0 {
            return Err(StoreError::Header("dim must be >= 1".into()));
        }
        if embeddings.is_empty() || embeddings.len() % dim != 0 {
            return Err(StoreError::Header(format!(
                "{} values do not form a non-empty matrix with {dim} columns",
                embeddings.len()
            )));
        }
        let n = embeddings.len() / dim;
        if let Some(b) = &brightness {
            if b.len() != n {
                return Err(StoreError::Header(format!(
                    "brightness has {} entries for {n} frames",
                    b.len()
                )));
            }
            if let Some(i) = b
                .iter()
                .position(|v| !v.is_finite() || !(0.0..=255.0).contains(v))
            {
                return Err(StoreError::Header(format!(
                    "brightness of frame {i} outside [0, 255]"
                )));
            }
        }
        let rescaled_rows = normalize_rows(&mut embeddings, dim)?;
        Ok((
            FrameBank {
                n,
                dim,
                embeddings,
                brightness,
                source_id: source_id.into(),
            },
            LoadReport { rescaled_rows },
        ))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.embeddings[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.embeddings.chunks_exact(self.dim)
    }

    pub fn embeddings(&self) -> &[f32] {
        &self.embeddings
    }

    pub fn brightness(&self) -> Option<&[f32]> {
        self.brightness.as_deref()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let extra = self.brightness.as_ref().map_or(0, |b| b.len() * 4);
        let mut out = Vec::with_capacity(HEADER_LEN + self.embeddings.len() * 4 + extra);
        out.extend_from_slice(FRAME_BANK_MAGIC);
        out.extend_from_slice(&FRAME_BANK_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.push(self.brightness.is_some() as u8);
        for v in &self.embeddings {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(b) = &self.brightness {
            for v in b {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], source_id: impl Into<String>) -> Result<Self, StoreError> {
        Self::decode(bytes, source_id).map(|(b, _)| b)
    }

    pub fn decode(
        bytes: &[u8],
        source_id: impl Into<String>,
    ) -> Result<(Self, LoadReport), StoreError> {
        if bytes.len() < HEADER_LEN {
            return Err(StoreError::Header(format!(
                "{} bytes is shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[0..4] != FRAME_BANK_MAGIC {
            return Err(StoreError::Header("bad magic, expected TGFB".into()));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != FRAME_BANK_VERSION {
            return Err(StoreError::Header(format!("unsupported version {version}")));
        }
        let n = u32_at(8) as usize;
        let dim = u32_at(12) as usize;
        if n == 0 || dim == 0 {
            return Err(StoreError::Header(format!(
                "n and dim must be >= 1 (n={n}, dim={dim})"
            )));
        }
        let has_brightness = match bytes[16] {
            0 => false,
            1 => true,
            b => return Err(StoreError::Header(format!("has_brightness flag {b}"))),
        };
        let floats = n
            .checked_mul(dim)
            .and_then(|x| x.checked_add(if has_brightness { n } else { 0 }))
            .ok_or_else(|| StoreError::Header("size overflow".into()))?;
        let expected = HEADER_LEN + floats * 4;
        if bytes.len() != expected {
            return Err(StoreError::Header(format!(
                "expected {expected} bytes for n={n}, dim={dim}, found {}",
                bytes.len()
            )));
        }
        let mut values = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let embeddings: Vec<f32> = values.by_ref().take(n * dim).collect();
        let brightness = has_brightness.then(|| values.collect::<Vec<f32>>());
        Self::with_report(dim, embeddings, brightness, source_id)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        write_file(path.as_ref(), &self.to_bytes())
    }
}

fn source_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn load_frame_bank(path: impl AsRef<Path>) -> Result<FrameBank, StoreError> {
    let path = path.as_ref();
    FrameBank::from_bytes(&read_file(path)?, source_id_of(path))
}

/// Like [`load_frame_bank`] but also reports which rows were rescaled.
pub fn load_frame_bank_with_report(
    path: impl AsRef<Path>,
) -> Result<(FrameBank, LoadReport), StoreError> {
    let path = path.as_ref();
    FrameBank::decode(&read_file(path)?, source_id_of(path))
}

/// Seconds of synthesized speech to whole frame slots, rounding half up.
pub fn tau_frames(tau_seconds: f64) -> usize {
    (tau_seconds * FPS + 0.5).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub tau_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
}

impl Sentence {
    pub fn tau_frames(&self) -> usize {
        tau_frames(self.tau_seconds)
    }
}

/// Ordered teaser-narration sentences with their speech durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceTrack {
    sentences: Vec<Sentence>,
}

impl SentenceTrack {
    pub fn new(mut sentences: Vec<Sentence>) -> Result<Self, StoreError> {
        if sentences.is_empty() {
            return Err(StoreError::Track("m must be ≥ 1".into()));
        }
        let mut dim = None;
        for (i, s) in sentences.iter_mut().enumerate() {
            if s.index != i {
                return Err(StoreError::Track(format!(
                    "sentence at position {i} has index {}; indices must be 0..m-1",
                    s.index
                )));
            }
            if !(s.tau_seconds.is_finite() && s.tau_seconds > 0.0) {
                return Err(StoreError::Track(format!(
                    "sentence {i} has non-positive tau_seconds {}",
                    s.tau_seconds
                )));
            }
            if let Some(e) = &mut s.embedding {
                if e.is_empty() {
                    return Err(StoreError::Track(format!("sentence {i} has an empty embedding")));
                }
                match dim {
                    None => dim = Some(e.len()),
                    Some(d) if d != e.len() => {
                        return Err(StoreError::DimMismatch {
                            expected: d,
                            got: e.len(),
                        })
                    }
                    _ => {}
                }
                normalize_vec(e, || format!("embedding of sentence {i}"))?;
            }
        }
        Ok(SentenceTrack { sentences })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn m(&self) -> usize {
        self.sentences.len()
    }

    pub fn total_frames(&self) -> usize {
        self.sentences.iter().map(Sentence::tau_frames).sum()
    }

    /// Embedding dimension, when sentences carry embeddings.
    pub fn dim(&self) -> Option<usize> {
        self.sentences
            .iter()
            .find_map(|s| s.embedding.as_ref().map(Vec::len))
    }

    pub fn to_json(&self) -> Result<String, StoreError> {
        to_canonical_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self, StoreError> {
        #[derive(Deserialize)]
        struct Wire {
            sentences: Vec<Sentence>,
        }
        let wire: Wire = serde_json::from_str(s)?;
        Self::new(wire.sentences)
    }
}

pub fn load_sentence_track(path: impl AsRef<Path>) -> Result<SentenceTrack, StoreError> {
    let bytes = read_file(path.as_ref())?;
    SentenceTrack::from_json(&String::from_utf8_lossy(&bytes))
}

pub fn save_sentence_track(track: &SentenceTrack, path: impl AsRef<Path>) -> Result<(), StoreError> {
    write_file(path.as_ref(), track.to_json()?.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    ExternalHighlight,
    ClipSimilarity,
}

/// One score curve per sentence, each spanning every body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCurveSet {
    pub score_kind: ScoreKind,
    pub curves: Vec<Vec<f32>>,
}

impl ScoreCurveSet {
    /// Checks that every curve has `n` finite entries.
    pub fn validate(&self, n: usize) -> Result<(), StoreError> {
        for (index, curve) in self.curves.iter().enumerate() {
            if curve.len() != n {
                return Err(StoreError::CurveLength {
                    index,
                    expected: n,
                    got: curve.len(),
                });
            }
            if let Some(f) = curve.iter().position(|v| !v.is_finite()) {
                return Err(StoreError::Track(format!(
                    "curve {index} has a non-finite value at frame {f}"
                )));
            }
        }
        Ok(())
    }

    /// Cosine similarity of each sentence embedding against every bank row.
    pub fn from_clip_similarity(
        track: &SentenceTrack,
        bank: &FrameBank,
    ) -> Result<Self, StoreError> {
        let curves = track
            .sentences()
            .iter()
            .map(|s| {
                let e = s.embedding.as_ref().ok_or_else(|| {
                    StoreError::Track(format!("sentence {} has no embedding", s.index))
                })?;
                bank.rows()
                    .map(|r| cosine_sim(e, r).map(|v| v as f32))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScoreCurveSet {
            score_kind: ScoreKind::ClipSimilarity,
            curves,
        })
    }

    pub fn to_json(&self) -> Result<String, StoreError> {
        to_canonical_json(self)
    }
}

pub fn load_score_curves(
    path: impl AsRef<Path>,
    bank: &FrameBank,
) -> Result<ScoreCurveSet, StoreError> {
    let set = read_score_curves(path)?;
    set.validate(bank.n())?;
    Ok(set)
}

/// Reads a curve file without validating it against a bank.
pub fn read_score_curves(path: impl AsRef<Path>) -> Result<ScoreCurveSet, StoreError> {
    let bytes = read_file(path.as_ref())?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn save_score_curves(set: &ScoreCurveSet, path: impl AsRef<Path>) -> Result<(), StoreError> {
    write_file(path.as_ref(), set.to_json()?.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
    pub sentence: usize,
}

impl SentenceSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Generated image embeddings, one per output frame slot, partitioned into
/// sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    dim: usize,
    rows: Vec<f32>,
    spans: Vec<SentenceSpan>,
    slot_sentence: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingSequenceWire {
    dim: usize,
    rows: Vec<Vec<f32>>,
    sentence_boundaries: Vec<SentenceSpan>,
}

impl EmbeddingSequence {
    pub fn new(rows: Vec<Vec<f32>>, spans: Vec<SentenceSpan>) -> Result<Self, StoreError> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| StoreError::Sequence("no rows".into()))?;
        Self::with_dim(dim, rows, spans)
    }

    fn with_dim(
        dim: usize,
        rows: Vec<Vec<f32>>,
        mut spans: Vec<SentenceSpan>,
    ) -> Result<Self, StoreError> {
        if dim == 0 {
            return Err(StoreError::Sequence("dim must be >= 1".into()));
        }
        if rows.is_empty() {
            return Err(StoreError::Sequence("no rows".into()));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(StoreError::Sequence(format!(
                "row {i} has dim {}, expected {dim}",
                r.len()
            )));
        }
        let n_t = rows.len();
        spans.sort_by_key(|s| s.start);
        let mut cursor = 0;
        let mut seen = std::collections::BTreeSet::new();
        for s in &spans {
            if s.start != cursor || s.end <= s.start {
                return Err(StoreError::Sequence(format!(
                    "boundaries must partition [0, {n_t}) into non-empty spans; bad span {}..{} (sentence {})",
                    s.start, s.end, s.sentence
                )));
            }
            if !seen.insert(s.sentence) {
                return Err(StoreError::Sequence(format!(
                    "sentence {} appears in more than one span",
                    s.sentence
                )));
            }
            cursor = s.end;
        }
        if cursor != n_t {
            return Err(StoreError::Sequence(format!(
                "boundaries cover [0, {cursor}) but there are {n_t} slots"
            )));
        }
        let mut flat: Vec<f32> = rows.into_iter().flatten().collect();
        normalize_rows(&mut flat, dim).map_err(|e| StoreError::Sequence(e.to_string()))?;
        let mut slot_sentence = vec![0; n_t];
        for s in &spans {
            slot_sentence[s.start..s.end].fill(s.sentence);
        }
        Ok(EmbeddingSequence {
            dim,
            rows: flat,
            spans,
            slot_sentence,
        })
    }

    pub fn len(&self) -> usize {
        self.slot_sentence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slot_sentence.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.rows[t * self.dim..(t + 1) * self.dim]
    }

    pub fn spans(&self) -> &[SentenceSpan] {
        &self.spans
    }

    pub fn sentence_of(&self, t: usize) -> usize {
        self.slot_sentence[t]
    }

    pub fn slot_sentences(&self) -> &[usize] {
        &self.slot_sentence
    }

    /// Checks span sentences against a narration track: every sentence is
    /// covered and gets exactly its rounded duration in slots.
    pub fn check_against_track(&self, track: &SentenceTrack) -> Result<(), StoreError> {
        if self.spans.len() != track.m() {
            return Err(StoreError::Sequence(format!(
                "{} sentence spans for {} narration sentences",
                self.spans.len(),
                track.m()
            )));
        }
        for span in &self.spans {
            let sentence = track.sentences().get(span.sentence).ok_or_else(|| {
                StoreError::Sequence(format!("span refers to unknown sentence {}", span.sentence))
            })?;
            if span.len() != sentence.tau_frames() {
                return Err(StoreError::Sequence(format!(
                    "sentence {} has {} slots, narration needs {}",
                    span.sentence,
                    span.len(),
                    sentence.tau_frames()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, StoreError> {
        let wire = EmbeddingSequenceWire {
            dim: self.dim,
            rows: self.rows.chunks_exact(self.dim).map(<[f32]>::to_vec).collect(),
            sentence_boundaries: self.spans.clone(),
        };
        to_canonical_json(&wire)
    }

    pub fn from_json(s: &str) -> Result<Self, StoreError> {
        let wire: EmbeddingSequenceWire = serde_json::from_str(s)?;
        Self::with_dim(wire.dim, wire.rows, wire.sentence_boundaries)
    }
}

pub fn load_embedding_sequence(path: impl AsRef<Path>) -> Result<EmbeddingSequence, StoreError> {
    let bytes = read_file(path.as_ref())?;
    EmbeddingSequence::from_json(&String::from_utf8_lossy(&bytes))
}

pub fn save_embedding_sequence(
    seq: &EmbeddingSequence,
    path: impl AsRef<Path>,
) -> Result<(), StoreError> {
    write_file(path.as_ref(), seq.to_json()?.as_bytes())
}

/// One text embedding and the image embedding it is scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPair {
    pub text: Vec<f32>,
    pub image: Vec<f32>,
}

/// Text/image pairs for CLIPScore, both sides unit-normalized on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPairs {
    pub dim: usize,
    pub pairs: Vec<EmbeddingPair>,
}

impl EmbeddingPairs {
    pub fn new(dim: usize, mut pairs: Vec<EmbeddingPair>) -> Result<Self, StoreError> {
        if dim == 0 {
            return Err(StoreError::Pairs("dim must be >= 1".into()));
        }
        for (i, p) in pairs.iter_mut().enumerate() {
            for (side, v) in [("text", &mut p.text), ("image", &mut p.image)] {
                if v.len() != dim {
                    return Err(StoreError::Pairs(format!(
                        "pair {i} {side} has dim {}, expected {dim}",
                        v.len()
                    )));
                }
                normalize_rows(v, dim).map_err(|e| StoreError::Pairs(format!("pair {i} {side}: {e}")))?;
            }
        }
        Ok(EmbeddingPairs { dim, pairs })
    }

    pub fn as_tuples(&self) -> Vec<(&[f32], &[f32])> {
        self.pairs.iter().map(|p| (&p.text[..], &p.image[..])).collect()
    }

    pub fn to_json(&self) -> Result<String, StoreError> {
        to_canonical_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self, StoreError> {
        let raw: EmbeddingPairs = serde_json::from_str(s)?;
        Self::new(raw.dim, raw.pairs)
    }
}

pub fn load_embedding_pairs(path: impl AsRef<Path>) -> Result<EmbeddingPairs, StoreError> {
    let bytes = read_file(path.as_ref())?;
    EmbeddingPairs::from_json(&String::from_utf8_lossy(&bytes))
}

pub fn save_embedding_pairs(pairs: &EmbeddingPairs, path: impl AsRef<Path>) -> Result<(), StoreError> {
    write_file(path.as_ref(), pairs.to_json()?.as_bytes())
}

/// Half-open frame range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Interval { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlap(&self, other: &Interval) -> usize {
        self.end
            .min(other.end)
            .saturating_sub(self.start.max(other.start))
    }

    pub fn frames(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Picks {
    Intervals(Vec<Interval>),
    Frames(Vec<usize>),
}

impl Picks {
    pub fn frame_count(&self) -> usize {
        match self {
            Picks::Intervals(iv) => iv.iter().map(Interval::len).sum(),
            Picks::Frames(f) => f.len(),
        }
    }

    /// Body frame indices in playback order.
    pub fn frames(&self) -> Vec<usize> {
        match self {
            Picks::Intervals(iv) => iv.iter().flat_map(Interval::frames).collect(),
            Picks::Frames(f) => f.clone(),
        }
    }
}

/// Chosen material for one narration sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentencePick {
    pub sentence_index: usize,
    pub target_frames: usize,
    pub picks: Picks,
    /// Score threshold that produced interval picks, if any.
    pub theta: Option<f64>,
    /// Set when fewer than `target_frames` frames could be selected.
    pub shortfall: bool,
}

impl SentencePick {
    pub fn achieved_frames(&self) -> usize {
        self.picks.frame_count()
    }
}

/// Per-sentence picks from one composer run.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub body_frames: usize,
    pub sentences: Vec<SentencePick>,
}

#[derive(Serialize, Deserialize)]
struct IntervalWire {
    start_frame: usize,
    end_frame: usize,
    start_s: f64,
    end_s: f64,
}

#[derive(Serialize, Deserialize)]
struct SentencePickWire {
    sentence_index: usize,
    target_frames: usize,
    achieved_frames: usize,
    shortfall: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intervals: Option<Vec<IntervalWire>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frames: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct SelectionWire {
    body_frames: usize,
    fps: f64,
    sentences: Vec<SentencePickWire>,
}

impl Selection {
    /// Checks index ranges and per-sentence interval ordering.
    pub fn validate(&self) -> Result<(), StoreError> {
        let n = self.body_frames;
        for p in &self.sentences {
            let s = p.sentence_index;
            match &p.picks {
                Picks::Intervals(iv) => {
                    for w in iv.windows(2) {
                        if w[1].start < w[0].end {
                            return Err(StoreError::Selection(format!(
                                "sentence {s}: intervals not sorted and disjoint"
                            )));
                        }
                    }
                    if let Some(bad) = iv.iter().find(|i| i.is_empty() || i.end > n) {
                        return Err(StoreError::Selection(format!(
                            "sentence {s}: interval [{}, {}) invalid for {n} frames",
                            bad.start, bad.end
                        )));
                    }
                }
                Picks::Frames(f) => {
                    if let Some(bad) = f.iter().find(|&&i| i >= n) {
                        return Err(StoreError::Selection(format!(
                            "sentence {s}: frame {bad} out of range for {n} frames"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Every selected body frame in teaser order.
    pub fn frames(&self) -> Vec<usize> {
        self.sentences.iter().flat_map(|p| p.picks.frames()).collect()
    }

    pub fn to_json(&self) -> Result<String, StoreError> {
        let sentences = self
            .sentences
            .iter()
            .map(|p| {
                let (intervals, frames) = match &p.picks {
                    Picks::Intervals(iv) => (
                        Some(
                            iv.iter()
                                .map(|i| IntervalWire {
                                    start_frame: i.start,
                                    end_frame: i.end,
                                    start_s: i.start as f64 / FPS,
                                    end_s: i.end as f64 / FPS,
                                })
                                .collect(),
                        ),
                        None,
                    ),
                    Picks::Frames(f) => (None, Some(f.clone())),
                };
                SentencePickWire {
                    sentence_index: p.sentence_index,
                    target_frames: p.target_frames,
                    achieved_frames: p.achieved_frames(),
                    shortfall: p.shortfall,
                    theta: p.theta,
                    intervals,
                    frames,
                }
            })
            .collect();
        to_canonical_json(&SelectionWire {
            body_frames: self.body_frames,
            fps: FPS,
            sentences,
        })
    }

    pub fn from_json(s: &str) -> Result<Self, StoreError> {
        let wire: SelectionWire = serde_json::from_str(s)?;
        if wire.fps != FPS {
            return Err(StoreError::Selection(format!(
                "unsupported fps {}, only {FPS} is supported",
                wire.fps
            )));
        }
        let sentences = wire
            .sentences
            .into_iter()
            .map(|p| {
                let picks = match (p.intervals, p.frames) {
                    (Some(iv), None) => Picks::Intervals(
                        iv.into_iter()
                            .map(|i| Interval::new(i.start_frame, i.end_frame.max(i.start_frame)))
                            .collect(),
                    ),
                    (None, Some(f)) => Picks::Frames(f),
                    _ => {
                        return Err(StoreError::Selection(format!(
                            "sentence {} needs exactly one of `intervals` or `frames`",
                            p.sentence_index
                        )))
                    }
                };
                if picks.frame_count() != p.achieved_frames {
                    return Err(StoreError::Selection(format!(
                        "sentence {}: achieved_frames {} disagrees with {} selected frames",
                        p.sentence_index,
                        p.achieved_frames,
                        picks.frame_count()
                    )));
                }
                Ok(SentencePick {
                    sentence_index: p.sentence_index,
                    target_frames: p.target_frames,
                    picks,
                    theta: p.theta,
                    shortfall: p.shortfall,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let sel = Selection {
            body_frames: wire.body_frames,
            sentences,
        };
        sel.validate()?;
        Ok(sel)
    }
}

pub fn save_selection(sel: &Selection, path: impl AsRef<Path>) -> Result<(), StoreError> {
    write_file(path.as_ref(), sel.to_json()?.as_bytes())
}

pub fn load_selection(path: impl AsRef<Path>) -> Result<Selection, StoreError> {
    let bytes = read_file(path.as_ref())?;
    Selection::from_json(&String::from_utf8_lossy(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank(rows: &[&[f32]]) -> Result<FrameBank, StoreError> {
        let dim = rows[0].len();
        FrameBank::new(dim, rows.concat(), None, "t")
    }

    #[test]
    fn unit_rows_are_untouched() {
        let rows: &[&[f32]] = &[&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.6, 0.8, 0.0], &[0.0, 0.0, 0.0, -1.0]];
        let b = bank(rows).unwrap();
        assert_eq!(b.embeddings(), rows.concat().as_slice());
        let back = FrameBank::from_bytes(&b.to_bytes(), "t").unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn rows_are_normalized() {
        let b = bank(&[&[3.0, 4.0, 0.0, 0.0]]).unwrap();
        assert_eq!(b.row(0), &[0.6, 0.8, 0.0, 0.0]);
    }

    #[test]
    fn zero_row_is_rejected() {
        let err = bank(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap_err();
        assert_eq!(err.to_string(), "zero-norm row 0");
        let err = bank(&[&[1.0, 0.0], &[f32::NAN, 0.0]]).unwrap_err();
        assert!(matches!(err, StoreError::NonFinite(1)));
    }

    #[test]
    fn malformed_headers() {
        let b = bank(&[&[1.0, 0.0]]).unwrap();
        let mut bytes = b.to_bytes();
        assert!(FrameBank::from_bytes(&bytes[..10], "t").is_err());
        bytes.push(0);
        assert!(matches!(
            FrameBank::from_bytes(&bytes, "t"),
            Err(StoreError::Header(_))
        ));
        let mut bytes = b.to_bytes();
        bytes[0] = b'X';
        assert!(FrameBank::from_bytes(&bytes, "t").is_err());
        let mut bytes = b.to_bytes();
        bytes[4] = 2;
        assert!(FrameBank::from_bytes(&bytes, "t").is_err());
    }

    #[test]
    fn brightness_round_trip() {
        let b = FrameBank::new(2, vec![1.0, 0.0, 0.0, 1.0], Some(vec![10.0, 200.5]), "x").unwrap();
        let bytes = b.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 6 * 4);
        let back = FrameBank::from_bytes(&bytes, "x").unwrap();
        assert_eq!(back.brightness(), Some(&[10.0, 200.5][..]));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_sim(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_sim(&[0.6, 0.8], &[0.8, 0.6]).unwrap();
        assert!((c - 0.96).abs() < 1e-7);
        assert!(cosine_sim(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn tau_rounds_half_up() {
        assert_eq!(tau_frames(2.5), 3);
        assert_eq!(tau_frames(2.49), 2);
        assert_eq!(tau_frames(0.2), 0);
        assert_eq!(tau_frames(4.0), 4);
    }

    fn sentence(i: usize, tau: f64) -> Sentence {
        Sentence {
            index: i,
            text: format!("sentence {i}"),
            tau_seconds: tau,
            embedding: Some(vec![0.6, 0.8]),
        }
    }

    #[test]
    fn track_round_trip_and_errors() {
        let t = SentenceTrack::new(vec![sentence(0, 2.0), sentence(1, 3.5)]).unwrap();
        let back = SentenceTrack::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        let err = SentenceTrack::new(vec![]).unwrap_err();
        assert!(err.to_string().contains("m must be ≥ 1"));
        assert!(SentenceTrack::new(vec![sentence(1, 2.0)]).is_err());
        assert!(SentenceTrack::new(vec![sentence(0, 0.0)]).is_err());
        let mut s = sentence(0, 1.0);
        s.embedding = Some(vec![0.0, 0.0]);
        assert!(SentenceTrack::new(vec![s]).is_err());
    }

    #[test]
    fn curve_length_is_checked() {
        let b = bank(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]).unwrap();
        let set = ScoreCurveSet {
            score_kind: ScoreKind::ExternalHighlight,
            curves: vec![vec![0.1, 0.2, 0.3], vec![0.1, 0.2]],
        };
        let err = set.validate(b.n()).unwrap_err();
        assert!(matches!(err, StoreError::CurveLength { index: 1, expected: 3, got: 2 }));
    }

    #[test]
    fn sequence_boundaries_must_partition() {
        let rows = vec![vec![1.0, 0.0]; 4];
        let ok = EmbeddingSequence::new(
            rows.clone(),
            vec![
                SentenceSpan { start: 2, end: 4, sentence: 1 },
                SentenceSpan { start: 0, end: 2, sentence: 0 },
            ],
        )
        .unwrap();
        assert_eq!(ok.slot_sentences(), &[0, 0, 1, 1]);
        let gap = EmbeddingSequence::new(
            rows.clone(),
            vec![
                SentenceSpan { start: 0, end: 1, sentence: 0 },
                SentenceSpan { start: 2, end: 4, sentence: 1 },
            ],
        );
        assert!(gap.is_err());
        let short = EmbeddingSequence::new(rows, vec![SentenceSpan { start: 0, end: 3, sentence: 0 }]);
        assert!(short.is_err());
    }

    #[test]
    fn selection_round_trip() {
        let sel = Selection {
            body_frames: 20,
            sentences: vec![
                SentencePick {
                    sentence_index: 0,
                    target_frames: 5,
                    picks: Picks::Intervals(vec![Interval::new(2, 4), Interval::new(10, 13)]),
                    theta: Some(0.25),
                    shortfall: false,
                },
                SentencePick {
                    sentence_index: 1,
                    target_frames: 3,
                    picks: Picks::Frames(vec![7, 7, 19]),
                    theta: None,
                    shortfall: false,
                },
            ],
        };
        let json = sel.to_json().unwrap();
        let back = Selection::from_json(&json).unwrap();
        assert_eq!(back, sel);
        assert_eq!(back.to_json().unwrap(), json);
        assert_eq!(sel.frames(), vec![2, 3, 10, 11, 12, 7, 7, 19]);
    }

    #[test]
    fn selection_rejects_out_of_range() {
        let sel = Selection {
            body_frames: 5,
            sentences: vec![SentencePick {
                sentence_index: 0,
                target_frames: 1,
                picks: Picks::Frames(vec![5]),
                theta: None,
                shortfall: false,
            }],
        };
        assert!(sel.validate().is_err());
    }
}
