//! Decoding generated image embeddings back to body frames.
//!
//! A generated sequence has one embedding per output slot. Greedy decoding
//! takes the nearest body frame for every slot. Beam decoding maximizes
//!
//! ```text
//! phi = sum_t cos(gen_t, frame_t) - lambda * sum_{t<u, sent(t) != sent(u)} cos(frame_t, frame_u)
//! ```
//!
//! over the top-`candidates` frames of each slot, which discourages reusing
//! the same material across sentences. Because bank rows are unit-norm the
//! penalty for extending a beam is a single dot product against the running
//! sum of frames decoded for earlier sentences.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::DecodeError;
use crate::store::{dot, EmbeddingSequence, FrameBank, Picks, Selection, SentencePick, SentenceSpan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamConfig {
    pub lambda: f64,
    /// Beams kept after every slot.
    pub beam_size: usize,
    /// Nearest frames considered per slot.
    pub candidates: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            lambda: 1.0,
            beam_size: 5,
            candidates: 10,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(DecodeError::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.beam_size < 1 || self.candidates < 1 {
            return Err(DecodeError::Config(
                "beam_size and candidates must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn by_similarity(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The `k` bank frames most similar to `query`, best first; equal
/// similarities are ordered by frame index.
pub fn nearest_frames(query: &[f32], bank: &FrameBank, k: usize) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = bank
        .rows()
        .enumerate()
        .map(|(i, row)| (i, dot(query, row)))
        .collect();
    let k = k.min(scored.len());
    if k == 0 {
        return Vec::new();
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, by_similarity);
        scored.truncate(k);
    }
    scored.sort_by(by_similarity);
    scored
}

fn check_dims(generated: &EmbeddingSequence, bank: &FrameBank) -> Result<(), DecodeError> {
    if generated.dim() != bank.dim() {
        return Err(DecodeError::DimMismatch {
            bank: bank.dim(),
            generated: generated.dim(),
        });
    }
    Ok(())
}

/// Direct evaluation of the decoding objective for a complete sequence.
pub fn phi_score(
    generated: &EmbeddingSequence,
    decoded: &[usize],
    bank: &FrameBank,
    lambda: f64,
) -> Result<f64, DecodeError> {
    check_dims(generated, bank)?;
    if decoded.len() != generated.len() {
        return Err(DecodeError::LengthMismatch {
            decoded: decoded.len(),
            generated: generated.len(),
        });
    }
    if let Some(&index) = decoded.iter().find(|&&i| i >= bank.n()) {
        return Err(DecodeError::FrameOutOfRange { index, n: bank.n() });
    }
    let fidelity: f64 = decoded
        .iter()
        .enumerate()
        .map(|(t, &f)| dot(generated.row(t), bank.row(f)))
        .sum();
    let mut penalty = 0.0;
    for t in 0..decoded.len() {
        for u in t + 1..decoded.len() {
            if generated.sentence_of(t) != generated.sentence_of(u) {
                penalty += dot(bank.row(decoded[t]), bank.row(decoded[u]));
            }
        }
    }
    Ok(fidelity - lambda * penalty)
}

/// Nearest body frame for every slot.
pub fn greedy_decode(
    generated: &EmbeddingSequence,
    bank: &FrameBank,
) -> Result<Vec<usize>, DecodeError> {
    check_dims(generated, bank)?;
    Ok((0..generated.len())
        .map(|t| nearest_frames(generated.row(t), bank, 1)[0].0)
        .collect())
}

/// A completed beam and the score accumulated while extending it.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub frames: Vec<usize>,
    pub incremental_score: f64,
}

#[derive(Clone)]
struct Beam {
    frames: Vec<usize>,
    score: f64,
    /// Sum of frames decoded for sentences before the current one.
    earlier: Vec<f64>,
    /// Sum of frames decoded so far for the current sentence.
    current: Vec<f64>,
}

fn dot_f64(row: &[f32], acc: &[f64]) -> f64 {
    row.iter().zip(acc).map(|(&a, &b)| a as f64 * b).sum()
}

fn lexicographic(a: &[usize], a_last: usize, b: &[usize], b_last: usize) -> Ordering {
    a.cmp(b).then(a_last.cmp(&b_last))
}

/// Runs the beam search and returns every surviving beam, best first by
/// incremental score.
pub fn beam_search(
    generated: &EmbeddingSequence,
    bank: &FrameBank,
    cfg: &BeamConfig,
) -> Result<Vec<Hypothesis>, DecodeError> {
    cfg.validate()?;
    check_dims(generated, bank)?;
    let dim = bank.dim();
    let mut beams = vec![Beam {
        frames: Vec::with_capacity(generated.len()),
        score: 0.0,
        earlier: vec![0.0; dim],
        current: vec![0.0; dim],
    }];

    for t in 0..generated.len() {
        if t > 0 && generated.sentence_of(t) != generated.sentence_of(t - 1) {
            for b in &mut beams {
                for (e, c) in b.earlier.iter_mut().zip(b.current.iter_mut()) {
                    *e += *c;
                    *c = 0.0;
                }
            }
        }
        let candidates = nearest_frames(generated.row(t), bank, cfg.candidates);

        let mut extensions: Vec<(f64, usize, usize)> =
            Vec::with_capacity(beams.len() * candidates.len());
        for (bi, b) in beams.iter().enumerate() {
            for &(frame, sim) in &candidates {
                let penalty = dot_f64(bank.row(frame), &b.earlier);
                extensions.push((b.score + sim - cfg.lambda * penalty, bi, frame));
            }
        }
        extensions.sort_by(|x, y| {
            y.0.total_cmp(&x.0)
                .then_with(|| lexicographic(&beams[x.1].frames, x.2, &beams[y.1].frames, y.2))
        });
        extensions.truncate(cfg.beam_size);

        beams = extensions
            .into_iter()
            .map(|(score, bi, frame)| {
                let parent = &beams[bi];
                let mut frames = Vec::with_capacity(generated.len());
                frames.extend_from_slice(&parent.frames);
                frames.push(frame);
                let mut current = parent.current.clone();
                for (c, &v) in current.iter_mut().zip(bank.row(frame)) {
                    *c += v as f64;
                }
                Beam {
                    frames,
                    score,
                    earlier: parent.earlier.clone(),
                    current,
                }
            })
            .collect();
    }

    Ok(beams
        .into_iter()
        .map(|b| Hypothesis {
            frames: b.frames,
            incremental_score: b.score,
        })
        .collect())
}

/// Beam decoding: the completed sequence with the highest objective value.
///
/// The per-slot nearest-frame path competes alongside the surviving beams,
/// so the result never scores below greedy decoding.
pub fn beam_decode(
    generated: &EmbeddingSequence,
    bank: &FrameBank,
    cfg: &BeamConfig,
) -> Result<Vec<usize>, DecodeError> {
    let mut finalists: Vec<Vec<usize>> = beam_search(generated, bank, cfg)?
        .into_iter()
        .map(|h| h.frames)
        .collect();
    finalists.push(greedy_decode(generated, bank)?);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for frames in finalists {
        let score = phi_score(generated, &frames, bank, cfg.lambda)?;
        let better = match &best {
            None => true,
            Some((bs, bf)) => match score.total_cmp(bs) {
                Ordering::Greater => true,
                Ordering::Equal => frames < *bf,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((score, frames));
        }
    }
    Ok(best.map(|(_, f)| f).unwrap_or_default())
}

/// Groups a decoded sequence into one frame pick per sentence span.
pub fn decoded_selection(generated: &EmbeddingSequence, decoded: &[usize], n: usize) -> Selection {
    let mut spans = generated.spans().to_vec();
    spans.sort_by_key(|s| s.sentence);
    Selection {
        body_frames: n,
        sentences: spans
            .iter()
            .map(|s| SentencePick {
                sentence_index: s.sentence,
                target_frames: s.len(),
                picks: Picks::Frames(decoded[s.start..s.end].to_vec()),
                theta: None,
                shortfall: false,
            })
            .collect(),
    }
}

/// Replaces every within-sentence run of `k > 1` identical frames `i` with
/// `k` consecutive frames starting at `i - floor(k/2)`.
///
/// Windows that would leave `[0, n)` are shifted back inside. When the
/// window would collide with a neighbouring frame the nearest shift that
/// still contains `i` and avoids the collision is used. If every such shift
/// collides, the nearest collision-free window elsewhere in the body is
/// taken, provided it does not reduce the number of distinct frames in the
/// sequence; failing that the run is left alone. Passes repeat until no
/// repeated run remains or nothing changes. The number of distinct frames
/// never decreases.
pub fn smooth(decoded: &[usize], boundaries: &[SentenceSpan], n: usize) -> Vec<usize> {
    let mut out = decoded.to_vec();
    if n == 0 {
        return out;
    }
    let whole = [SentenceSpan {
        start: 0,
        end: decoded.len(),
        sentence: 0,
    }];
    let spans = if boundaries.is_empty() { &whole[..] } else { boundaries };
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &f in &out {
        *counts.entry(f).or_default() += 1;
    }
    for span in spans {
        let end = span.end.min(out.len());
        if span.start >= end {
            continue;
        }
        for _ in 0..(end - span.start).max(1) {
            if !smooth_pass(&mut out[span.start..end], n, &mut counts) {
                break;
            }
        }
    }
    out
}

/// Maximal runs as `(value, start, len)`.
fn runs(seg: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut out: Vec<(usize, usize, usize)> = Vec::new();
    for (pos, &v) in seg.iter().enumerate() {
        match out.last_mut() {
            Some((val, _, len)) if *val == v => *len += 1,
            _ => out.push((v, pos, 1)),
        }
    }
    out
}

/// One left-to-right smoothing pass. Returns whether anything changed.
fn smooth_pass(seg: &mut [usize], n: usize, counts: &mut HashMap<usize, usize>) -> bool {
    let runs = runs(seg);
    if runs.iter().all(|r| r.2 == 1) {
        return false;
    }
    let before = seg.to_vec();
    for (ri, &(value, start, k)) in runs.iter().enumerate() {
        if k == 1 {
            continue;
        }
        let prev = (start > 0).then(|| seg[start - 1]);
        let next_fixed = runs.get(ri + 1).filter(|r| r.2 == 1).map(|r| r.0);
        let Some(s) = window_start(value, k, n, prev, next_fixed, counts) else {
            continue;
        };
        for j in 0..k {
            let old = seg[start + j];
            let new = s + j;
            if let Some(c) = counts.get_mut(&old) {
                *c -= 1;
            }
            *counts.entry(new).or_default() += 1;
            seg[start + j] = new;
        }
    }
    seg != before.as_slice()
}

fn window_start(
    value: usize,
    k: usize,
    n: usize,
    prev: Option<usize>,
    next: Option<usize>,
    counts: &HashMap<usize, usize>,
) -> Option<usize> {
    if n < k {
        return None;
    }
    let ok = |s: usize| prev.is_none_or(|p| p != s) && next.is_none_or(|q| q != s + k - 1);
    let preferred = value.saturating_sub(k / 2).min(n - k);
    let nearest = |range: std::ops::RangeInclusive<usize>, accept: &dyn Fn(usize) -> bool| {
        range
            .filter(|&s| ok(s) && accept(s))
            .min_by_key(|&s| (s.abs_diff(preferred), s))
    };
    let lo = (value + 1).saturating_sub(k);
    let hi = value.min(n - k);
    if let Some(s) = nearest(lo..=hi, &|_| true) {
        return Some(s);
    }
    // Frames that only occur in this run disappear when it is replaced.
    let present = |f: usize| counts.get(&f).copied().unwrap_or(0) > 0;
    let lost = usize::from(counts.get(&value).copied().unwrap_or(0) <= k);
    let keeps_variety = |s: usize| (s..s + k).filter(|&f| f != value && !present(f)).count() >= lost;
    nearest(0..=n - k, &keeps_variety)
}
