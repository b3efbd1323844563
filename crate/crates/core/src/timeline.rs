//! Edit decision lists: where each piece of the teaser comes from in the
//! body content, and renderer cut lists derived from them.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TimelineError;
use crate::store::{Interval, Picks, Selection, SentenceTrack, FPS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub sentence_index: usize,
    pub body_start_s: f64,
    pub body_end_s: f64,
    pub teaser_start_s: f64,
    pub teaser_end_s: f64,
}

impl Segment {
    pub fn duration_s(&self) -> f64 {
        self.teaser_end_s - self.teaser_start_s
    }
}

/// A sentence that received less footage than its narration needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shortfall {
    pub sentence_index: usize,
    pub expected_frames: usize,
    pub achieved_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub segments: Vec<Segment>,
    pub total_seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shortfalls: Vec<Shortfall>,
}

impl Timeline {
    pub fn empty() -> Self {
        Timeline {
            segments: Vec::new(),
            total_seconds: 0.0,
            shortfalls: Vec::new(),
        }
    }
}

/// Collapses runs of consecutive frame indices into half-open intervals,
/// keeping playback order.
pub fn merge_frames(frames: &[usize]) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::new();
    for &f in frames {
        match out.last_mut() {
            Some(last) if last.end == f => last.end += 1,
            _ => out.push(Interval::new(f, f + 1)),
        }
    }
    out
}

/// Lays out the selection sentence by sentence along the teaser timeline.
///
/// Interval picks play in chronological body order; frame sequences keep
/// their decoded order and consecutive frames merge into one segment.
/// Segments never span two sentences.
pub fn assemble(selection: &Selection, track: &SentenceTrack) -> Result<Timeline, TimelineError> {
    let n = selection.body_frames;
    let mut picks: Vec<_> = selection.sentences.iter().collect();
    picks.sort_by_key(|p| p.sentence_index);

    let mut segments = Vec::new();
    let mut shortfalls = Vec::new();
    let mut cursor = 0usize;
    let mut next_sentence = 0;
    for pick in picks {
        let sentence = track
            .sentences()
            .get(pick.sentence_index)
            .ok_or(TimelineError::UnknownSentence(pick.sentence_index))?;
        if pick.sentence_index != next_sentence {
            let missing = next_sentence;
            return Err(TimelineError::Duration {
                sentence: missing,
                expected: track.sentences()[missing].tau_frames(),
                got: 0,
            });
        }
        next_sentence += 1;

        let frames = match &pick.picks {
            Picks::Intervals(iv) => {
                let mut iv = iv.clone();
                iv.sort();
                iv.iter().flat_map(Interval::frames).collect::<Vec<_>>()
            }
            Picks::Frames(f) => f.clone(),
        };
        if let Some(&index) = frames.iter().find(|&&f| f >= n) {
            return Err(TimelineError::IndexOutOfRange {
                sentence: pick.sentence_index,
                index,
                n,
            });
        }
        let expected = sentence.tau_frames();
        if frames.len() != expected {
            if pick.shortfall && frames.len() < expected {
                shortfalls.push(Shortfall {
                    sentence_index: pick.sentence_index,
                    expected_frames: expected,
                    achieved_frames: frames.len(),
                });
            } else {
                return Err(TimelineError::Duration {
                    sentence: pick.sentence_index,
                    expected,
                    got: frames.len(),
                });
            }
        }
        for run in merge_frames(&frames) {
            segments.push(Segment {
                sentence_index: pick.sentence_index,
                body_start_s: run.start as f64 / FPS,
                body_end_s: run.end as f64 / FPS,
                teaser_start_s: cursor as f64 / FPS,
                teaser_end_s: (cursor + run.len()) as f64 / FPS,
            });
            cursor += run.len();
        }
    }
    if next_sentence < track.m() {
        return Err(TimelineError::Duration {
            sentence: next_sentence,
            expected: track.sentences()[next_sentence].tau_frames(),
            got: 0,
        });
    }
    Ok(Timeline {
        segments,
        total_seconds: cursor as f64 / FPS,
        shortfalls,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutlistFormat {
    EdlJson,
    FfconcatText,
}

impl FromStr for CutlistFormat {
    type Err = TimelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edl-json" => Ok(CutlistFormat::EdlJson),
            "ffconcat-text" => Ok(CutlistFormat::FfconcatText),
            other => Err(TimelineError::UnsupportedFormat(other.to_owned())),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EdlDocument {
    version: u32,
    source: String,
    fps: f64,
    #[serde(flatten)]
    timeline: Timeline,
}

fn quote_concat_path(path: &str) -> String {
    format!("'{}'", path.replace('\'', r"'\''"))
}

/// Serializes a timeline for `source` (the body-content media file).
pub fn emit_cutlist(
    timeline: &Timeline,
    format: CutlistFormat,
    source: &str,
) -> Result<String, TimelineError> {
    match format {
        CutlistFormat::EdlJson => {
            let doc = EdlDocument {
                version: 1,
                source: source.to_owned(),
                fps: FPS,
                timeline: timeline.clone(),
            };
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            Ok(s)
        }
        CutlistFormat::FfconcatText => {
            let mut s = String::from("ffconcat version 1.0\n");
            for seg in &timeline.segments {
                let _ = writeln!(s, "# sentence {}", seg.sentence_index);
                let _ = writeln!(s, "file {}", quote_concat_path(source));
                let _ = writeln!(s, "inpoint {:.3}", seg.body_start_s);
                let _ = writeln!(s, "outpoint {:.3}", seg.body_end_s);
            }
            Ok(s)
        }
    }
}

/// Parses an `edl-json` document back into its timeline and source.
pub fn parse_edl_json(s: &str) -> Result<(Timeline, String), TimelineError> {
    let doc: EdlDocument = serde_json::from_str(s)?;
    Ok((doc.timeline, doc.source))
}
