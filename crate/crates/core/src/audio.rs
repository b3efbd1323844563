//! Audio preparation: fixed-length chunking, crossfaded reassembly, and
//! RMS-based silence labelling of separated stems.

use serde::{Deserialize, Serialize};

use crate::error::AudioError;

pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;
pub const DEFAULT_CHUNK_SECONDS: f64 = 60.0;
/// Crossfade length as a share of the sample rate (2205 samples at 44.1 kHz).
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::Config("sample_rate must be > 0".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::Config(format!("sample {i} is not finite")));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn chunk_len(w: &Waveform, chunk_seconds: f64) -> Result<usize, AudioError> {
    if w.is_empty() {
        return Err(AudioError::Empty);
    }
    if !(chunk_seconds.is_finite() && chunk_seconds > 0.0) {
        return Err(AudioError::Config("chunk_seconds must be > 0".into()));
    }
    Ok(((chunk_seconds * w.sample_rate as f64).round() as usize).max(1))
}

/// Splits into consecutive `chunk_seconds` pieces; the last may be shorter.
pub fn chunk(w: &Waveform, chunk_seconds: f64) -> Result<Vec<Waveform>, AudioError> {
    let len = chunk_len(w, chunk_seconds)?;
    Ok(w.samples
        .chunks(len)
        .map(|c| Waveform {
            samples: c.to_vec(),
            sample_rate: w.sample_rate,
        })
        .collect())
}

/// Like [`chunk`], but every chunk except the last also carries the first
/// `overlap` samples of the next one, which [`crossfade_merge`] blends.
pub fn chunk_with_overlap(
    w: &Waveform,
    chunk_seconds: f64,
    overlap: usize,
) -> Result<Vec<Waveform>, AudioError> {
    let len = chunk_len(w, chunk_seconds)?;
    let total = w.len();
    let mut out = Vec::with_capacity(total.div_ceil(len));
    let mut start = 0;
    while start < total {
        let end = if start + len >= total {
            total
        } else {
            (start + len + overlap).min(total)
        };
        out.push(Waveform {
            samples: w.samples[start..end].to_vec(),
            sample_rate: w.sample_rate,
        });
        start += len;
    }
    Ok(out)
}

/// Plain concatenation of chunk samples.
pub fn concatenate(chunks: &[Waveform]) -> Result<Waveform, AudioError> {
    let rate = chunks.first().ok_or(AudioError::Empty)?.sample_rate;
    check_rates(chunks, rate)?;
    Ok(Waveform {
        samples: chunks.iter().flat_map(|c| c.samples.iter().copied()).collect(),
        sample_rate: rate,
    })
}

fn check_rates(chunks: &[Waveform], rate: u32) -> Result<(), AudioError> {
    match chunks.iter().position(|c| c.sample_rate != rate) {
        Some(chunk) => Err(AudioError::SampleRate {
            chunk,
            expected: rate,
            got: chunks[chunk].sample_rate,
        }),
        None => Ok(()),
    }
}

pub fn crossfade_window(sample_rate: u32, window_fraction: f64) -> usize {
    (window_fraction * sample_rate as f64).round() as usize
}

/// Linear `(fade_out, fade_in)` weights sampled at the centre of each of the
/// `window` samples. Each pair sums to exactly 1.
pub fn crossfade_weights(window: usize) -> Vec<(f64, f64)> {
    (0..window)
        .map(|s| {
            let fade_in = (2 * s + 1) as f64 / (2 * window) as f64;
            (1.0 - fade_in, fade_in)
        })
        .collect()
}

/// Reassembles chunks from [`chunk_with_overlap`], blending each overlap of
/// `round(window_fraction * sample_rate)` samples (shorter at the very end
/// when the last chunk is shorter than that).
pub fn crossfade_merge(chunks: &[Waveform], window_fraction: f64) -> Result<Waveform, AudioError> {
    let first = chunks.first().ok_or(AudioError::Empty)?;
    let rate = first.sample_rate;
    check_rates(chunks, rate)?;
    if !(window_fraction.is_finite() && window_fraction >= 0.0) {
        return Err(AudioError::Config("window_fraction must be >= 0".into()));
    }
    let window = crossfade_window(rate, window_fraction);

    let mut out = first.samples.clone();
    for (j, c) in chunks.iter().enumerate().skip(1) {
        let overlap = window.min(c.len());
        if out.len() < overlap || chunks[j - 1].len() < overlap {
            return Err(AudioError::ChunkTooShort {
                chunk: j - 1,
                len: chunks[j - 1].len(),
                window: overlap,
            });
        }
        let base = out.len() - overlap;
        for (s, (w_out, w_in)) in crossfade_weights(overlap).into_iter().enumerate() {
            let blended = out[base + s] as f64 * w_out + c.samples[s] as f64 * w_in;
            out[base + s] = blended as f32;
        }
        out.extend_from_slice(&c.samples[overlap..]);
    }
    Ok(Waveform {
        samples: out,
        sample_rate: rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stem {
    Dialogue,
    Music,
    Effects,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilenceConfig {
    pub threshold_db: f64,
    pub frame_ms: f64,
}

impl SilenceConfig {
    /// Tuned thresholds per separated stem: -25 dB for dialogue, -40 dB for
    /// music and sound effects.
    pub fn for_stem(stem: Stem) -> Self {
        let threshold_db = match stem {
            Stem::Dialogue => -25.0,
            Stem::Music | Stem::Effects => -40.0,
        };
        SilenceConfig {
            threshold_db,
            frame_ms: 100.0,
        }
    }

    pub fn validate(&self) -> Result<(), AudioError> {
        if !(self.threshold_db < 0.0) {
            return Err(AudioError::Config("threshold_db must be < 0".into()));
        }
        if !(self.frame_ms.is_finite() && self.frame_ms > 0.0) {
            return Err(AudioError::Config("frame_ms must be > 0".into()));
        }
        Ok(())
    }
}

impl Default for SilenceConfig {
    fn default() -> Self {
        SilenceConfig::for_stem(Stem::Music)
    }
}

const RMS_FLOOR: f64 = 1e-9;

/// RMS level in dB relative to a full-scale RMS of 1.0.
pub fn rms_dbfs(samples: &[f32]) -> f64 {
    let mean_sq = if samples.is_empty() {
        0.0
    } else {
        samples.iter().map(|&s| s as f64 * s as f64).sum::<f64>() / samples.len() as f64
    };
    20.0 * mean_sq.sqrt().max(RMS_FLOOR).log10()
}

/// One label per `frame_ms` window (the last window may be partial):
/// 1 for sound, 0 for silence.
pub fn silence_labels(w: &Waveform, cfg: &SilenceConfig) -> Result<Vec<u8>, AudioError> {
    cfg.validate()?;
    if w.is_empty() {
        return Err(AudioError::Empty);
    }
    let window = ((cfg.frame_ms * w.sample_rate as f64 / 1000.0).round() as usize).max(1);
    Ok(w.samples
        .chunks(window)
        .map(|c| u8::from(rms_dbfs(c) >= cfg.threshold_db))
        .collect())
}
