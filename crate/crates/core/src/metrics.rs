//! Objective teaser metrics and ground-truth frame matching.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::store::{dot, FrameBank};

/// Repetitiveness: `1 - unique / total`.
pub fn rep(frames: &[usize]) -> Result<f64, MetricsError> {
    if frames.is_empty() {
        return Err(MetricsError::Empty);
    }
    let unique: HashSet<usize> = frames.iter().copied().collect();
    Ok((frames.len() - unique.len()) as f64 / frames.len() as f64)
}

/// Repetitiveness lower bound when some teaser frames have no body match:
/// every unmatched frame counts as distinct.
pub fn rep_lower_bound(mapping: &[Option<usize>]) -> Result<f64, MetricsError> {
    if mapping.is_empty() {
        return Err(MetricsError::Empty);
    }
    let matched: HashSet<usize> = mapping.iter().flatten().copied().collect();
    let unmatched = mapping.iter().filter(|m| m.is_none()).count();
    Ok((mapping.len() - matched.len() - unmatched) as f64 / mapping.len() as f64)
}

/// Scene change rate: the share of frames that start a new run of
/// consecutive body indices, i.e. `runs / total`.
pub fn scr(frames: &[usize]) -> Result<f64, MetricsError> {
    if frames.is_empty() {
        return Err(MetricsError::Empty);
    }
    let continuing = frames.windows(2).filter(|w| w[1] == w[0] + 1).count();
    Ok((frames.len() - continuing) as f64 / frames.len() as f64)
}

/// `2.5 * mean(max(cos(text, image), 0))` over unit-norm pairs. Cosines are
/// clamped to 1 so rounding cannot push the score above 2.5.
pub fn clip_score<T, I>(pairs: &[(T, I)]) -> Result<f64, MetricsError>
where
    T: AsRef<[f32]>,
    I: AsRef<[f32]>,
{
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut total = 0.0;
    for (pair, (t, i)) in pairs.iter().enumerate() {
        let (t, i) = (t.as_ref(), i.as_ref());
        if t.len() != i.len() {
            return Err(MetricsError::DimMismatch {
                pair,
                text: t.len(),
                image: i.len(),
            });
        }
        total += dot(t, i).clamp(0.0, 1.0);
    }
    Ok(2.5 * total / pairs.len() as f64)
}

/// Frame-set F1; zero when either set is empty or they do not intersect.
pub fn f1(selected: &BTreeSet<usize>, gt: &BTreeSet<usize>) -> f64 {
    let hit = selected.intersection(gt).count();
    if hit == 0 {
        return 0.0;
    }
    let precision = hit as f64 / selected.len() as f64;
    let recall = hit as f64 / gt.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchParams {
    pub top_k_cosine: usize,
    /// Maximum raw-pixel L2 distance for a match.
    pub l2_threshold: f64,
    /// Share of darkest body frames whose brightness marks a frame as dark.
    pub dark_fraction: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            top_k_cosine: 20,
            l2_threshold: 88.92,
            dark_fraction: 0.05,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.top_k_cosine < 1 {
            return Err(MetricsError::Params("top_k_cosine must be >= 1".into()));
        }
        if !(self.l2_threshold > 0.0) {
            return Err(MetricsError::Params("l2_threshold must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dark_fraction) {
            return Err(MetricsError::Params("dark_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Source of raw frame pixels; implementors decode video however they like.
pub trait PixelAccessor {
    fn pixels(&self, frame: usize) -> Option<&[u8]>;
}

/// Pixels held in memory, one buffer per frame.
#[derive(Debug, Clone, Default)]
pub struct InMemoryPixels {
    pub frames: Vec<Vec<u8>>,
}

impl PixelAccessor for InMemoryPixels {
    fn pixels(&self, frame: usize) -> Option<&[u8]> {
        self.frames.get(frame).map(Vec::as_slice)
    }
}

impl<P: PixelAccessor + ?Sized> PixelAccessor for &P {
    fn pixels(&self, frame: usize) -> Option<&[u8]> {
        (**self).pixels(frame)
    }
}

/// Mean of all raw pixel values.
pub fn mean_brightness(pixels: &[u8]) -> f64 {
    if pixels.is_empty() {
        return 0.0;
    }
    pixels.iter().map(|&p| p as f64).sum::<f64>() / pixels.len() as f64
}

/// Euclidean distance between two equally sized pixel buffers.
pub fn pixel_l2(a: &[u8], b: &[u8]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::Resolution {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// Brightness below which a frame counts as dark: the value at rank
/// `floor(fraction * n)` of the sorted body brightness. Without ties, the
/// darkest `floor(fraction * n)` body frames fall below it.
pub fn dark_threshold(body_brightness: &[f64], fraction: f64) -> f64 {
    let mut sorted = body_brightness.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((fraction * sorted.len() as f64).floor() as usize).min(sorted.len().saturating_sub(1));
    sorted.get(rank).copied().unwrap_or(f64::NEG_INFINITY)
}

fn brightness_of<P: PixelAccessor>(
    bank: &FrameBank,
    pixels: &P,
    side: &'static str,
) -> Result<Vec<f64>, MetricsError> {
    match bank.brightness() {
        Some(b) => Ok(b.iter().map(|&v| v as f64).collect()),
        None => (0..bank.n())
            .map(|f| {
                pixels
                    .pixels(f)
                    .map(mean_brightness)
                    .ok_or(MetricsError::MissingPixels { side, frame: f })
            })
            .collect(),
    }
}

/// Maps every teaser frame to the body frame it was cut from, if any.
///
/// Dark teaser frames map to `None`. Otherwise the `top_k_cosine` body
/// frames closest in embedding space are compared pixel by pixel and the
/// nearest one is accepted when its distance is within `l2_threshold`.
pub fn match_ground_truth<T, B>(
    teaser_bank: &FrameBank,
    body_bank: &FrameBank,
    teaser_pixels: &T,
    body_pixels: &B,
    params: &MatchParams,
) -> Result<Vec<Option<usize>>, MetricsError>
where
    T: PixelAccessor,
    B: PixelAccessor,
{
    params.validate()?;
    if teaser_bank.dim() != body_bank.dim() {
        return Err(MetricsError::DimMismatch {
            pair: 0,
            text: teaser_bank.dim(),
            image: body_bank.dim(),
        });
    }
    let body_brightness = brightness_of(body_bank, body_pixels, "body")?;
    let teaser_brightness = brightness_of(teaser_bank, teaser_pixels, "teaser")?;
    let dark_below = dark_threshold(&body_brightness, params.dark_fraction);

    let mut resolution: Option<usize> = None;
    let mut check_resolution = |len: usize| match resolution {
        None => {
            resolution = Some(len);
            Ok(())
        }
        Some(r) if r == len => Ok(()),
        Some(r) => Err(MetricsError::Resolution { expected: r, got: len }),
    };

    let mut out = Vec::with_capacity(teaser_bank.n());
    for t in 0..teaser_bank.n() {
        if teaser_brightness[t] < dark_below {
            out.push(None);
            continue;
        }
        let tp = teaser_pixels
            .pixels(t)
            .ok_or(MetricsError::MissingPixels { side: "teaser", frame: t })?;
        check_resolution(tp.len())?;
        let candidates = crate::lr::nearest_frames(teaser_bank.row(t), body_bank, params.top_k_cosine);
        let mut best: Option<(f64, usize)> = None;
        for (b, _) in candidates {
            let bp = body_pixels
                .pixels(b)
                .ok_or(MetricsError::MissingPixels { side: "body", frame: b })?;
            check_resolution(bp.len())?;
            let d = pixel_l2(tp, bp)?;
            if best.is_none_or(|(bd, bi)| d < bd || (d == bd && b < bi)) {
                best = Some((d, b));
            }
        }
        out.push(best.filter(|(d, _)| *d <= params.l2_threshold).map(|(_, b)| b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rep_examples() {
        assert_eq!(rep(&[1, 2, 3, 4]).unwrap(), 0.0);
        assert_eq!(rep(&[5, 5, 5, 5]).unwrap(), 0.75);
        assert!(rep(&[]).is_err());
    }

    #[test]
    fn rep_lower_bound_counts_unmatched_as_distinct() {
        assert_eq!(rep_lower_bound(&[Some(1), Some(1), None, None]).unwrap(), 0.25);
    }

    #[test]
    fn scr_examples() {
        assert_eq!(scr(&[10, 11, 12, 13]).unwrap(), 0.25);
        assert_eq!(scr(&[1, 5, 9, 13]).unwrap(), 1.0);
        assert_eq!(scr(&[3, 3, 4]).unwrap(), 2.0 / 3.0);
        assert!(scr(&[]).is_err());
    }

    #[test]
    fn clip_score_examples() {
        let a = vec![0.0f32, 1.0];
        assert_eq!(clip_score(&[(a.clone(), a.clone()), (a.clone(), a)]).unwrap(), 2.5);
        let b = vec![0.6f32, 0.8];
        assert_eq!(clip_score(&[(b.clone(), b)]).unwrap(), 2.5);
        let x = vec![1.0f32, 0.0];
        let y = vec![0.0f32, 1.0];
        assert_eq!(clip_score(&[(x.clone(), y)]).unwrap(), 0.0);
        let half = vec![0.5f32, 0.75f32.sqrt()];
        let neg = vec![-0.5f32, 0.75f32.sqrt()];
        let s = clip_score(&[(x.clone(), x.clone()), (x.clone(), neg), (x.clone(), half)]).unwrap();
        assert!((s - 1.25).abs() < 1e-12);
        assert!(clip_score::<Vec<f32>, Vec<f32>>(&[]).is_err());
        assert!(clip_score(&[(vec![1.0f32], x)]).is_err());
    }

    #[test]
    fn f1_examples() {
        let a: BTreeSet<usize> = (1..=10).collect();
        let b: BTreeSet<usize> = (6..=15).collect();
        assert_eq!(f1(&a, &a), 1.0);
        assert_eq!(f1(&a, &(20..30).collect()), 0.0);
        assert_eq!(f1(&a, &b), 0.5);
        assert_eq!(f1(&BTreeSet::new(), &b), 0.0);
    }

    #[test]
    fn dark_threshold_ranks() {
        let b: Vec<f64> = (0..40).map(|v| v as f64).collect();
        // floor(0.05 * 40) = 2: frames 0 and 1 are dark.
        assert_eq!(dark_threshold(&b, 0.05), 2.0);
        assert_eq!(dark_threshold(&b, 0.0), 0.0);
    }

    fn bank(rows: Vec<Vec<f32>>, brightness: Option<Vec<f32>>) -> FrameBank {
        let dim = rows[0].len();
        FrameBank::new(dim, rows.concat(), brightness, "b").unwrap()
    }

    #[test]
    fn identical_frame_is_matched_and_far_frame_is_not() {
        let body = bank(vec![vec![1.0, 0.0], vec![0.0, 1.0]], None);
        let body_px = InMemoryPixels {
            frames: vec![vec![100; 12], vec![200; 12]],
        };
        let teaser = bank(vec![vec![0.0, 1.0], vec![1.0, 0.0]], None);
        let teaser_px = InMemoryPixels {
            frames: vec![vec![200; 12], vec![160; 12]],
        };
        let params = MatchParams {
            dark_fraction: 0.0,
            ..MatchParams::default()
        };
        let m = match_ground_truth(&teaser, &body, &teaser_px, &body_px, &params).unwrap();
        // Teaser frame 1 is 40 levels from its closest body frame: sqrt(12) * 40 > 88.92.
        assert_eq!(m, vec![Some(1), None]);
    }

    #[test]
    fn missing_pixels_and_resolution_errors() {
        let body = bank(vec![vec![1.0, 0.0]], Some(vec![100.0]));
        let teaser = bank(vec![vec![1.0, 0.0]], Some(vec![100.0]));
        let params = MatchParams {
            dark_fraction: 0.0,
            ..MatchParams::default()
        };
        let empty = InMemoryPixels::default();
        let px = InMemoryPixels { frames: vec![vec![1; 4]] };
        assert!(matches!(
            match_ground_truth(&teaser, &body, &px, &empty, &params),
            Err(MetricsError::MissingPixels { side: "body", frame: 0 })
        ));
        let other = InMemoryPixels { frames: vec![vec![1; 5]] };
        assert!(matches!(
            match_ground_truth(&teaser, &body, &px, &other, &params),
            Err(MetricsError::Resolution { .. })
        ));
    }
}
