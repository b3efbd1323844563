//! Composition, evaluation and the end-to-end pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};
use teasergen_core::audio::{self, SilenceConfig, Stem};
use teasergen_core::lr::{beam_decode, decoded_selection, greedy_decode, smooth};
use teasergen_core::metrics::{clip_score, f1, rep, scr};
use teasergen_core::pt::{select_for_narration, PtConfig};
use teasergen_core::store::{
    load_embedding_pairs, load_embedding_sequence, load_frame_bank, load_score_curves, load_selection,
    load_sentence_track, EmbeddingPairs, EmbeddingSequence, FrameBank, ScoreCurveSet, Selection,
    SentenceTrack, FPS,
};
use teasergen_core::timeline::{assemble, emit_cutlist, CutlistFormat, Timeline};

use crate::config::{Composer, LrConfig, PipelineConfig};
use crate::diagnostics::{has_errors, validate, Severity, ValidateInputs};
use crate::wav::{read_wav, write_wav};
use crate::{Invalid, Tagged};

pub fn compose_pt(
    bank: &FrameBank,
    curves: &ScoreCurveSet,
    track: &SentenceTrack,
    cfg: &PtConfig,
) -> anyhow::Result<Selection> {
    curves.validate(bank.n()).tagged()?;
    select_for_narration(curves, track, cfg).tagged()
}

pub fn compose_lr(
    bank: &FrameBank,
    generated: &EmbeddingSequence,
    composer: Composer,
    cfg: &LrConfig,
) -> anyhow::Result<Selection> {
    let decoded = match composer {
        Composer::LrBeam => beam_decode(generated, bank, &cfg.beam()).tagged()?,
        _ => greedy_decode(generated, bank).tagged()?,
    };
    let frames = if cfg.smoothing {
        smooth(&decoded, generated.spans(), bank.n())
    } else {
        decoded
    };
    Ok(decoded_selection(generated, &frames, bank.n()))
}

/// Sentences whose selection fell short of the narration by more than
/// `tolerance` frames.
pub fn shortfall_warnings(sel: &Selection, tolerance: usize) -> Vec<String> {
    sel.sentences
        .iter()
        .filter(|p| p.shortfall && p.target_frames - p.achieved_frames() > tolerance)
        .map(|p| {
            format!(
                "sentence {}: selected {} of {} frames",
                p.sentence_index,
                p.achieved_frames(),
                p.target_frames
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthMetrics {
    pub frames: usize,
    pub rep: f64,
    pub scr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub frames: usize,
    pub sentences: usize,
    pub rep: f64,
    pub scr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_curve_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthMetrics>,
    pub shortfall_sentences: usize,
    pub parameters: BTreeMap<String, Value>,
}

impl Report {
    pub fn to_json(&self) -> anyhow::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Default)]
pub struct EvalInputs<'a> {
    pub gt: Option<&'a Selection>,
    pub pairs: Option<&'a EmbeddingPairs>,
    pub narration: Option<&'a SentenceTrack>,
    pub curves: Option<&'a ScoreCurveSet>,
}

/// Text/image pairs built from the narration: each sentence embedding paired
/// with every frame selected for that sentence.
fn narration_pairs<'a>(sel: &Selection, track: &'a SentenceTrack, bank: &'a FrameBank) -> Vec<(&'a [f32], &'a [f32])> {
    let mut out = Vec::new();
    for p in &sel.sentences {
        let Some(emb) = track.sentences().get(p.sentence_index).and_then(|s| s.embedding.as_deref()) else {
            continue;
        };
        for f in p.picks.frames() {
            out.push((emb, bank.row(f)));
        }
    }
    out
}

pub fn evaluate(sel: &Selection, bank: &FrameBank, extra: &EvalInputs) -> anyhow::Result<Report> {
    if sel.body_frames != bank.n() {
        return Err(Invalid(format!(
            "selection is over {} frames, bank has {}",
            sel.body_frames,
            bank.n()
        ))
        .into());
    }
    let frames = sel.frames();
    let mut parameters = BTreeMap::new();
    parameters.insert("fps".to_owned(), json!(FPS));

    let pairs: Option<(Vec<(&[f32], &[f32])>, &str)> = match (extra.pairs, extra.narration) {
        (Some(p), _) => Some((p.as_tuples(), "pairs")),
        (None, Some(track)) if track.dim().is_some() => Some((narration_pairs(sel, track, bank), "narration")),
        _ => None,
    };
    let clip = match &pairs {
        Some((p, source)) if !p.is_empty() => {
            parameters.insert("clip_pairs".to_owned(), json!(p.len()));
            parameters.insert("clip_pairs_source".to_owned(), json!(source));
            Some(clip_score(p).tagged()?)
        }
        _ => None,
    };

    let (f1_value, ground_truth) = match extra.gt {
        Some(gt) => {
            let gt_frames = gt.frames();
            let metrics = if gt_frames.is_empty() {
                None
            } else {
                Some(GroundTruthMetrics {
                    frames: gt_frames.len(),
                    rep: rep(&gt_frames).tagged()?,
                    scr: scr(&gt_frames).tagged()?,
                })
            };
            let a = frames.iter().copied().collect();
            let b = gt_frames.iter().copied().collect();
            (Some(f1(&a, &b)), metrics)
        }
        None => (None, None),
    };

    let mean_curve_score = match extra.curves {
        Some(curves) => {
            let mut total = 0.0;
            let mut count = 0usize;
            for p in &sel.sentences {
                let curve = curves.curves.get(p.sentence_index).ok_or_else(|| {
                    Invalid(format!("no score curve for sentence {}", p.sentence_index))
                })?;
                for f in p.picks.frames() {
                    total += curve[f] as f64;
                    count += 1;
                }
            }
            (count > 0).then(|| total / count as f64)
        }
        None => None,
    };

    Ok(Report {
        frames: frames.len(),
        sentences: sel.sentences.len(),
        rep: rep(&frames).tagged()?,
        scr: scr(&frames).tagged()?,
        clip_score: clip,
        f1: f1_value,
        mean_curve_score,
        ground_truth,
        shortfall_sentences: sel.sentences.iter().filter(|p| p.shortfall).count(),
        parameters,
    })
}

pub fn cutlist_extension(format: CutlistFormat) -> &'static str {
    match format {
        CutlistFormat::EdlJson => "edl.json",
        CutlistFormat::FfconcatText => "ffconcat",
    }
}

pub fn timeline_json(timeline: &Timeline) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(timeline)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub selection: Selection,
    pub timeline: Timeline,
    pub report: Report,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

fn write(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    files.push(path);
    Ok(())
}

/// Validates the inputs, composes a selection, lays out the timeline and
/// evaluates it. Writes `selection.json`, `timeline.json`, the cut list and
/// `report.json` into the output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> anyhow::Result<PipelineOutput> {
    let diags = validate(&ValidateInputs::from(cfg));
    if has_errors(&diags) {
        let lines: Vec<String> = diags
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .map(ToString::to_string)
            .collect();
        return Err(Invalid(lines.join("; ")).into());
    }
    let mut warnings: Vec<String> = diags.iter().map(ToString::to_string).collect();
    let format: CutlistFormat = cfg.output.cutlist_format.parse().map_err(|e| Invalid(format!("{e}")))?;

    let inputs = &cfg.inputs;
    let bank = load_frame_bank(&inputs.bank).tagged()?;
    let track = load_sentence_track(&inputs.narration).tagged()?;
    let curves = match &inputs.curves {
        Some(p) => Some(load_score_curves(p, &bank).tagged()?),
        None => None,
    };

    let mut parameters: BTreeMap<String, Value> = BTreeMap::new();
    parameters.insert("composer".into(), json!(cfg.composer.name()));
    let selection = match cfg.composer {
        Composer::Pt => {
            let curves = curves.as_ref().ok_or_else(|| Invalid("curves required for pt".into()))?;
            parameters.insert("pt".into(), serde_json::to_value(cfg.pt)?);
            let sel = compose_pt(&bank, curves, &track, &cfg.pt)?;
            warnings.extend(shortfall_warnings(&sel, cfg.pt.duration_tolerance_frames));
            sel
        }
        composer => {
            let path = inputs
                .generated
                .as_ref()
                .ok_or_else(|| Invalid("generated embeddings required for lr".into()))?;
            let generated = load_embedding_sequence(path).tagged()?;
            parameters.insert("lr".into(), serde_json::to_value(cfg.lr)?);
            compose_lr(&bank, &generated, composer, &cfg.lr)?
        }
    };

    let timeline = assemble(&selection, &track).tagged()?;
    let gt = match &inputs.gt_selection {
        Some(p) => Some(load_selection(p).tagged()?),
        None => None,
    };
    let pairs = match &inputs.pairs {
        Some(p) => Some(load_embedding_pairs(p).tagged()?),
        None => None,
    };
    let mut report = evaluate(
        &selection,
        &bank,
        &EvalInputs {
            gt: gt.as_ref(),
            pairs: pairs.as_ref(),
            narration: Some(&track),
            curves: curves.as_ref(),
        },
    )?;
    report.parameters.extend(parameters);

    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    write(dir.join("selection.json"), &selection.to_json().tagged()?, &mut files)?;
    write(dir.join("timeline.json"), &timeline_json(&timeline)?, &mut files)?;
    write(
        dir.join(format!("cutlist.{}", cutlist_extension(format))),
        &emit_cutlist(&timeline, format, &cfg.output.source).tagged()?,
        &mut files,
    )?;
    write(dir.join("report.json"), &report.to_json()?, &mut files)?;

    Ok(PipelineOutput {
        selection,
        timeline,
        report,
        warnings,
        files,
    })
}

/// Writes `chunk_000.wav`, `chunk_001.wav`, ... into `out_dir`. Every chunk
/// but the last carries `round(overlap_fraction * sample_rate)` samples of
/// the next one for crossfading.
pub fn audio_chunk(
    input: &Path,
    out_dir: &Path,
    chunk_seconds: f64,
    overlap_fraction: f64,
) -> anyhow::Result<Vec<PathBuf>> {
    let w = read_wav(input)?;
    let overlap = audio::crossfade_window(w.sample_rate, overlap_fraction);
    let chunks = audio::chunk_with_overlap(&w, chunk_seconds, overlap).tagged()?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut out = Vec::with_capacity(chunks.len());
    for (i, c) in chunks.iter().enumerate() {
        let path = out_dir.join(format!("chunk_{i:03}.wav"));
        write_wav(&path, c)?;
        out.push(path);
    }
    Ok(out)
}

pub fn audio_merge(inputs: &[PathBuf], output: &Path, window_fraction: f64) -> anyhow::Result<()> {
    let chunks = inputs.iter().map(|p| read_wav(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let merged = audio::crossfade_merge(&chunks, window_fraction).tagged()?;
    write_wav(output, &merged)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SilenceReport {
    pub stem: Stem,
    pub threshold_db: f64,
    pub frame_ms: f64,
    pub sample_rate: u32,
    pub labels: Vec<u8>,
}

pub fn audio_silence(input: &Path, stem: Stem, cfg: &SilenceConfig) -> anyhow::Result<SilenceReport> {
    let w = read_wav(input)?;
    let labels = audio::silence_labels(&w, cfg).tagged()?;
    Ok(SilenceReport {
        stem,
        threshold_db: cfg.threshold_db,
        frame_ms: cfg.frame_ms,
        sample_rate: w.sample_rate,
        labels,
    })
}

