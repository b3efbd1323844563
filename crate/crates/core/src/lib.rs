//! Narration-driven teaser composition from precomputed embeddings.
//!
//! The crate covers the numerical core of the pipeline:
//!
//! - [`store`]: frame banks, narration tracks, score curves, generated
//!   embedding sequences, selections, and their file formats.
//! - [`pt`]: threshold-based clip selection over per-sentence score curves.
//! - [`lr`]: greedy and regularized beam-search decoding of generated image
//!   embeddings, plus smoothing of repeated frames.
//! - [`metrics`]: REP, SCR, CLIPScore, F1 and ground-truth frame matching.
//! - [`timeline`]: edit decision lists and cut lists.
//! - [`audio`]: chunking, crossfade merging and silence labelling.

pub mod audio;
pub mod error;
pub mod lr;
pub mod metrics;
pub mod pt;
pub mod store;
pub mod timeline;

pub use error::{Error, Result};
