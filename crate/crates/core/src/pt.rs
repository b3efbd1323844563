//! Threshold-based clip selection.
//!
//! For each sentence the score curve is cut at a threshold; maximal runs of
//! frames scoring at or above it become candidate clips. Short runs are
//! discarded and clips are truncated so they overlap the clips chosen for the
//! previous sentences by at most one second. The threshold is found by
//! bisection over the distinct curve values so the surviving clips cover at
//! least the narration duration, and any overshoot is trimmed away.

use serde::{Deserialize, Serialize};

use crate::error::PtError;
use crate::store::{Interval, Picks, ScoreCurveSet, Selection, SentencePick, SentenceTrack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PtConfig {
    pub min_clip_seconds: usize,
    pub max_overlap_seconds: usize,
    pub lookback_sentences: usize,
    /// Shortfalls up to this many frames are flagged but not reported as
    /// warnings by the CLI.
    pub duration_tolerance_frames: usize,
    pub max_bisection_iters: usize,
}

impl Default for PtConfig {
    fn default() -> Self {
        PtConfig {
            min_clip_seconds: 3,
            max_overlap_seconds: 1,
            lookback_sentences: 2,
            duration_tolerance_frames: 1,
            max_bisection_iters: 64,
        }
    }
}

impl PtConfig {
    pub fn validate(&self) -> Result<(), PtError> {
        if self.min_clip_seconds < 1 {
            return Err(PtError::Config("min_clip_seconds must be >= 1".into()));
        }
        if self.lookback_sentences < 1 {
            return Err(PtError::Config("lookback_sentences must be >= 1".into()));
        }
        if self.max_bisection_iters < 1 {
            return Err(PtError::Config("max_bisection_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Maximal runs of frames scoring `>= theta` that are at least `min_len` long.
pub fn runs_above_threshold(curve: &[f32], theta: f64, min_len: usize) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &v) in curve.iter().enumerate() {
        match (v as f64 >= theta, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s >= min_len {
                    out.push(Interval::new(s, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if curve.len() - s >= min_len {
            out.push(Interval::new(s, curve.len()));
        }
    }
    out
}

/// Frames of `h` that no candidate may cover, leaving at most `max_overlap`
/// frames of overlap at either end of `h`.
fn blocked_core(h: &Interval, max_overlap: usize) -> Option<Interval> {
    let len = h.len();
    if len <= max_overlap {
        None
    } else if len <= 2 * max_overlap {
        Some(Interval::new(h.start + max_overlap, h.end))
    } else {
        Some(Interval::new(h.start + max_overlap, h.end - max_overlap))
    }
}

/// Truncates candidates so each overlaps every historical clip by at most
/// `max_overlap` frames, then drops pieces shorter than `min_len`.
///
/// A candidate overlapping a clip on one side keeps the overlap frames
/// nearest to its own remainder; a candidate spanning a clip is split
/// around it.
pub fn apply_overlap_constraint(
    candidates: &[Interval],
    history: &[Interval],
    max_overlap: usize,
    min_len: usize,
) -> Vec<Interval> {
    let mut cores: Vec<Interval> = history
        .iter()
        .filter_map(|h| blocked_core(h, max_overlap))
        .collect();
    cores.sort();
    let mut merged: Vec<Interval> = Vec::with_capacity(cores.len());
    for c in cores {
        match merged.last_mut() {
            Some(last) if c.start <= last.end => last.end = last.end.max(c.end),
            _ => merged.push(c),
        }
    }

    let mut out = Vec::new();
    for cand in candidates {
        let mut cursor = cand.start;
        for core in merged.iter().filter(|k| k.end > cand.start && k.start < cand.end) {
            if core.start > cursor {
                out.push(Interval::new(cursor, core.start));
            }
            cursor = cursor.max(core.end);
        }
        if cursor < cand.end {
            out.push(Interval::new(cursor, cand.end));
        }
    }
    out.retain(|i| i.len() >= min_len.max(1));
    out
}

/// Outcome of the threshold search for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub theta: f64,
    pub intervals: Vec<Interval>,
    pub achieved_frames: usize,
    /// Fewer than the requested frames could be selected.
    pub shortfall: bool,
}

fn mean_score(curve: &[f32], iv: &Interval) -> f64 {
    curve[iv.start..iv.end].iter().map(|&v| v as f64).sum::<f64>() / iv.len() as f64
}

/// Lowest-mean interval among those accepted by `eligible`; ties go to the
/// latest-starting one.
fn weakest(curve: &[f32], intervals: &[Interval], eligible: impl Fn(&Interval) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, iv) in intervals.iter().enumerate().filter(|(_, iv)| eligible(iv)) {
        let m = mean_score(curve, iv);
        // Later intervals win ties, so `<=` keeps replacing.
        if best.is_none_or(|(_, bm)| m <= bm) {
            best = Some((i, m));
        }
    }
    best.map(|(i, _)| i)
}

fn total_frames(intervals: &[Interval]) -> usize {
    intervals.iter().map(Interval::len).sum()
}

fn trimming_slack(intervals: &[Interval], min_len: usize) -> usize {
    intervals.iter().map(|i| i.len().saturating_sub(min_len)).sum()
}

/// Removes frames from the tails of the weakest intervals until exactly
/// `target` frames remain. Intervals are first shortened no further than
/// `min_len`; only if that is not enough are they cut below it or removed.
fn trim_to(curve: &[f32], intervals: &mut Vec<Interval>, target: usize, min_len: usize) {
    let mut excess = total_frames(intervals).saturating_sub(target);
    while excess > 0 {
        let Some(i) = weakest(curve, intervals, |iv| iv.len() > min_len) else {
            break;
        };
        let cut = excess.min(intervals[i].len() - min_len);
        intervals[i].end -= cut;
        excess -= cut;
    }
    while excess > 0 {
        let i = weakest(curve, intervals, |_| true).expect("excess implies intervals");
        let cut = excess.min(intervals[i].len());
        intervals[i].end -= cut;
        excess -= cut;
        if intervals[i].is_empty() {
            intervals.remove(i);
        }
    }
}

/// Distinct curve values, highest first.
fn threshold_lattice(curve: &[f32]) -> Vec<f64> {
    let mut levels: Vec<f64> = curve.iter().map(|&v| v as f64).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    levels
}

/// Finds the highest threshold whose constrained clips cover at least
/// `tau_frames` frames and trims the result to exactly `tau_frames`.
///
/// If the clips at that threshold can only be trimmed to length by cutting
/// some clip below `min_clip_seconds`, lower thresholds are tried first; the
/// cut-below-minimum trim is the last resort.
pub fn binary_search_threshold(
    curve: &[f32],
    tau_frames: usize,
    history: &[Interval],
    cfg: &PtConfig,
) -> Result<ThresholdResult, PtError> {
    cfg.validate()?;
    let n = curve.len();
    if n == 0 {
        return Err(PtError::EmptyCurve);
    }
    if tau_frames > n {
        return Err(PtError::NarrationTooLong { tau_frames, n });
    }
    let levels = threshold_lattice(curve);
    if tau_frames == 0 {
        return Ok(ThresholdResult {
            theta: levels[0],
            intervals: Vec::new(),
            achieved_frames: 0,
            shortfall: false,
        });
    }

    let min_len = cfg.min_clip_seconds;
    let select = |theta: f64| {
        let runs = runs_above_threshold(curve, theta, min_len);
        apply_overlap_constraint(&runs, history, cfg.max_overlap_seconds, min_len)
    };

    // Covered duration never decreases as the threshold drops, so bisect
    // for the first lattice level reaching the target.
    let (mut lo, mut hi) = (0usize, levels.len());
    for _ in 0..cfg.max_bisection_iters {
        if lo >= hi {
            break;
        }
        let mid = lo + (hi - lo) / 2;
        if total_frames(&select(levels[mid])) >= tau_frames {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let first_feasible = hi;

    if first_feasible == levels.len() {
        let theta = *levels.last().unwrap();
        let intervals = select(theta);
        let achieved = total_frames(&intervals);
        return Ok(ThresholdResult {
            theta,
            intervals,
            achieved_frames: achieved,
            shortfall: achieved < tau_frames,
        });
    }

    let clean = (first_feasible..levels.len()).find_map(|i| {
        let iv = select(levels[i]);
        let excess = total_frames(&iv) - tau_frames;
        (excess <= trimming_slack(&iv, min_len)).then_some((levels[i], iv))
    });
    let (theta, mut intervals) =
        clean.unwrap_or_else(|| (levels[first_feasible], select(levels[first_feasible])));
    trim_to(curve, &mut intervals, tau_frames, min_len);
    let achieved = total_frames(&intervals);
    Ok(ThresholdResult {
        theta,
        intervals,
        achieved_frames: achieved,
        shortfall: achieved < tau_frames,
    })
}

/// Runs the threshold search sentence by sentence, carrying the clips of the
/// previous `lookback_sentences` sentences as overlap history.
pub fn select_for_narration(
    curves: &ScoreCurveSet,
    track: &SentenceTrack,
    cfg: &PtConfig,
) -> Result<Selection, PtError> {
    cfg.validate()?;
    if curves.curves.len() != track.m() {
        return Err(PtError::CurveCount {
            curves: curves.curves.len(),
            sentences: track.m(),
        });
    }
    let body_frames = curves.curves.first().map_or(0, Vec::len);
    let mut picked: Vec<Vec<Interval>> = Vec::with_capacity(track.m());
    let mut sentences = Vec::with_capacity(track.m());
    for (sentence, curve) in track.sentences().iter().zip(&curves.curves) {
        let i = sentence.index;
        let history: Vec<Interval> = picked[i.saturating_sub(cfg.lookback_sentences)..i]
            .iter()
            .flatten()
            .copied()
            .collect();
        let target = sentence.tau_frames();
        let result = binary_search_threshold(curve, target, &history, cfg)?;
        picked.push(result.intervals.clone());
        sentences.push(SentencePick {
            sentence_index: i,
            target_frames: target,
            picks: Picks::Intervals(result.intervals),
            theta: Some(result.theta),
            shortfall: result.shortfall,
        });
    }
    Ok(Selection {
        body_frames,
        sentences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Sentence;

    fn iv(s: usize, e: usize) -> Interval {
        Interval::new(s, e)
    }

    #[test]
    fn runs_examples() {
        assert_eq!(runs_above_threshold(&[0., 1., 1., 1., 0.], 0.5, 3), vec![iv(1, 4)]);
        assert!(runs_above_threshold(&[1., 1., 0., 1., 1.], 0.5, 3).is_empty());
        let curve = [0.2, 0.9, 0.9, 0.9, 0.9, 0.1, 0.8, 0.8, 0.8];
        assert_eq!(runs_above_threshold(&curve, 0.5, 3), vec![iv(1, 5), iv(6, 9)]);
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(apply_overlap_constraint(&[iv(10, 20)], &[iv(12, 30)], 1, 3), vec![iv(10, 13)]);
        let cands = vec![iv(0, 5), iv(9, 20)];
        assert_eq!(apply_overlap_constraint(&cands, &[], 1, 3), cands);
        assert!(apply_overlap_constraint(&[iv(10, 14)], &[iv(8, 30)], 1, 3).is_empty());
    }

    #[test]
    fn overlap_from_the_left_keeps_trailing_overlap() {
        assert_eq!(apply_overlap_constraint(&[iv(10, 20)], &[iv(0, 15)], 1, 3), vec![iv(14, 20)]);
    }

    #[test]
    fn spanning_candidate_is_split() {
        assert_eq!(
            apply_overlap_constraint(&[iv(0, 30)], &[iv(10, 20)], 1, 3),
            vec![iv(0, 11), iv(19, 30)]
        );
    }

    #[test]
    fn short_history_clip_blocks_beyond_allowance() {
        // A 3-frame clip with a 2-frame allowance only blocks its last frame.
        assert_eq!(apply_overlap_constraint(&[iv(0, 10)], &[iv(4, 7)], 2, 1), vec![iv(0, 6), iv(7, 10)]);
        // Clips no longer than the allowance never block anything.
        assert_eq!(apply_overlap_constraint(&[iv(0, 10)], &[iv(4, 5)], 1, 1), vec![iv(0, 10)]);
    }

    #[test]
    fn zero_tau_selects_nothing() {
        let r = binary_search_threshold(&[0.1, 0.5, 0.2], 0, &[], &PtConfig::default()).unwrap();
        assert!(r.intervals.is_empty());
        assert_eq!(r.achieved_frames, 0);
    }

    #[test]
    fn constant_curve_trims_from_end() {
        let r = binary_search_threshold(&[1.0; 100], 10, &[], &PtConfig::default()).unwrap();
        assert_eq!(r.intervals, vec![iv(0, 10)]);
        assert_eq!(r.theta, 1.0);
        assert_eq!(r.achieved_frames, 10);
    }

    #[test]
    fn increasing_curve_takes_the_top() {
        let curve: Vec<f32> = (0..100).map(|v| v as f32).collect();
        let r = binary_search_threshold(&curve, 5, &[], &PtConfig::default()).unwrap();
        assert_eq!(r.intervals, vec![iv(95, 100)]);
        assert_eq!(r.theta, 95.0);
    }

    #[test]
    fn too_long_narration_errors() {
        let err = binary_search_threshold(&[1.0; 4], 5, &[], &PtConfig::default()).unwrap_err();
        assert!(err.to_string().contains("narration longer than body content"));
    }

    #[test]
    fn infeasible_target_is_flagged() {
        // History blocks most of the body; the maximum achievable is reported.
        let r = binary_search_threshold(&[1.0; 7], 6, &[iv(0, 5)], &PtConfig::default()).unwrap();
        assert!(r.shortfall);
        assert_eq!(r.intervals, vec![iv(4, 7)]);
        assert_eq!(r.achieved_frames, 3);
    }

    #[test]
    fn trimming_prefers_weakest_interval_tail() {
        // Two runs of 5 at theta 0.5; 8 frames wanted.
        let mut curve = vec![0.0f32; 20];
        curve[2..7].fill(0.9);
        curve[12..17].fill(0.6);
        let r = binary_search_threshold(&curve, 8, &[], &PtConfig::default()).unwrap();
        assert_eq!(r.intervals, vec![iv(2, 7), iv(12, 15)]);
    }

    #[test]
    fn lower_threshold_avoids_breaking_min_clip() {
        // At the top level two 3-frame runs give 6 frames; 4 cannot be
        // reached without cutting a clip below 3, the full plateau can.
        let curve = [0.5, 1.0, 1.0, 1.0, 0.6, 1.0, 1.0, 1.0, 0.5];
        let r = binary_search_threshold(&curve, 4, &[], &PtConfig::default()).unwrap();
        assert_eq!(r.theta, 0.6f32 as f64);
        assert_eq!(r.intervals, vec![iv(1, 5)]);
    }

    #[test]
    fn last_resort_cuts_below_min_clip() {
        // Narration shorter than the minimum clip length.
        let r = binary_search_threshold(&[1.0; 10], 2, &[], &PtConfig::default()).unwrap();
        assert_eq!(r.achieved_frames, 2);
        assert!(!r.shortfall);
        assert_eq!(r.intervals, vec![iv(0, 2)]);
    }

    fn track(taus: &[f64]) -> SentenceTrack {
        SentenceTrack::new(
            taus.iter()
                .enumerate()
                .map(|(i, &t)| Sentence {
                    index: i,
                    text: String::new(),
                    tau_seconds: t,
                    embedding: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn curves(curves: Vec<Vec<f32>>) -> ScoreCurveSet {
        ScoreCurveSet {
            score_kind: crate::store::ScoreKind::ExternalHighlight,
            curves,
        }
    }

    #[test]
    fn single_sentence_matches_direct_search() {
        let curve: Vec<f32> = (0..30).map(|i| ((i as f32) * 0.7).sin()).collect();
        let cfg = PtConfig::default();
        let sel = select_for_narration(&curves(vec![curve.clone()]), &track(&[6.0]), &cfg).unwrap();
        let direct = binary_search_threshold(&curve, 6, &[], &cfg).unwrap();
        assert_eq!(sel.sentences[0].picks, Picks::Intervals(direct.intervals));
        assert_eq!(sel.sentences[0].theta, Some(direct.theta));
    }

    #[test]
    fn repeated_peak_respects_overlap() {
        let mut peak = vec![0.1f32; 40];
        for (i, v) in peak.iter_mut().enumerate().take(26).skip(14) {
            *v = 1.0 - (i as f32 - 20.0).abs() * 0.05;
        }
        let sel = select_for_narration(&curves(vec![peak.clone(), peak]), &track(&[5.0, 5.0]), &PtConfig::default())
            .unwrap();
        let first = match &sel.sentences[0].picks {
            Picks::Intervals(i) => i.clone(),
            _ => unreachable!(),
        };
        let Picks::Intervals(second) = &sel.sentences[1].picks else {
            unreachable!()
        };
        assert_eq!(sel.sentences[1].achieved_frames(), 5);
        for a in second {
            for b in &first {
                assert!(a.overlap(b) <= 1);
            }
        }
    }

    #[test]
    fn lookback_forgets_older_sentences() {
        // Sentences 0 and 2 both want frames 0..6; sentence 1 scores elsewhere.
        let hot: Vec<f32> = (0..20).map(|i| if i < 6 { 1.0 } else { 0.0 }).collect();
        let other: Vec<f32> = (0..20).map(|i| if i >= 10 { 1.0 } else { 0.0 }).collect();
        let c = curves(vec![hot.clone(), other, hot]);
        let t = track(&[6.0, 4.0, 6.0]);
        let sel = select_for_narration(&c, &t, &PtConfig::default()).unwrap();
        // With lookback 2 the third sentence cannot reuse frames 1..5.
        assert_eq!(sel.sentences[2].picks, Picks::Intervals(vec![iv(5, 8), iv(13, 16)]));
        let cfg = PtConfig {
            lookback_sentences: 1,
            ..PtConfig::default()
        };
        let sel = select_for_narration(&c, &t, &cfg).unwrap();
        assert_eq!(sel.sentences[2].picks, Picks::Intervals(vec![iv(0, 6)]));
    }

    #[test]
    fn curve_count_must_match() {
        let err = select_for_narration(&curves(vec![vec![1.0; 5]]), &track(&[1.0, 1.0]), &PtConfig::default());
        assert!(matches!(err, Err(PtError::CurveCount { curves: 1, sentences: 2 })));
    }
}
