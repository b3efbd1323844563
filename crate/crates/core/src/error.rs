use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the media store: container parsing, sidecar validation
/// and similarity arithmetic.
#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed frame-bank header: {0}")]
    Header(String),
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
    #[error("zero-norm row {0}")]
    ZeroNorm(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("curve {index} has length {got}, bank has {expected} frames")]
    CurveLength {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid sentence track: {0}")]
    Track(String),
    #[error("invalid embedding sequence: {0}")]
    Sequence(String),
    #[error("invalid selection: {0}")]
    Selection(String),
    #[error("invalid embedding pairs: {0}")]
    Pairs(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum PtError {
    #[error("narration longer than body content: {tau_frames} frames requested, {n} available")]
    NarrationTooLong { tau_frames: usize, n: usize },
    #[error("curve count {curves} does not match sentence count {sentences}")]
    CurveCount { curves: usize, sentences: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("empty score curve")]
    EmptyCurve,
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("decoded length {decoded} does not match generated length {generated}")]
    LengthMismatch { decoded: usize, generated: usize },
    #[error("dimension mismatch: bank dim {bank}, generated dim {generated}")]
    DimMismatch { bank: usize, generated: usize },
    #[error("frame index {index} out of range for bank of {n}")]
    FrameOutOfRange { index: usize, n: usize },
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("dimension mismatch in pair {pair}: {text} vs {image}")]
    DimMismatch {
        pair: usize,
        text: usize,
        image: usize,
    },
    #[error("missing pixels for {side} frame {frame}")]
    MissingPixels { side: &'static str, frame: usize },
    #[error("pixel resolution mismatch: {expected} vs {got} bytes")]
    Resolution { expected: usize, got: usize },
    #[error("invalid match params: {0}")]
    Params(String),
}

#[derive(Debug, Error)]
pub enum TimelineError {
    #[error("frame index {index} out of range for body of {n} frames (sentence {sentence})")]
    IndexOutOfRange {
        sentence: usize,
        index: usize,
        n: usize,
    },
    #[error("sentence {sentence}: selected {got} frames, narration needs {expected}")]
    Duration {
        sentence: usize,
        expected: usize,
        got: usize,
    },
    #[error("selection covers sentence {0} which is not in the narration track")]
    UnknownSentence(usize),
    #[error("unsupported cutlist format `{0}`")]
    UnsupportedFormat(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("empty waveform")]
    Empty,
    #[error("sample-rate mismatch: {expected} Hz vs {got} Hz (chunk {chunk})")]
    SampleRate {
        chunk: usize,
        expected: u32,
        got: u32,
    },
    #[error("chunk {chunk} has {len} samples, shorter than the {window}-sample crossfade window")]
    ChunkTooShort {
        chunk: usize,
        len: usize,
        window: usize,
    },
    #[error("invalid config: {0}")]
    Config(String),
}

/// Crate-level error: every variant carries the module that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("media-store: {0}")]
    Store(#[from] StoreError),
    #[error("pt-selector: {0}")]
    Pt(#[from] PtError),
    #[error("lr-decoder: {0}")]
    Decode(#[from] DecodeError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("timeline: {0}")]
    Timeline(#[from] TimelineError),
    #[error("audio-prep: {0}")]
    Audio(#[from] AudioError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
