//! Cross-file consistency checks run before any pipeline.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use teasergen_core::store::{
    load_embedding_pairs, load_embedding_sequence, load_frame_bank_with_report, load_selection,
    load_sentence_track, read_score_curves, EmbeddingPairs, EmbeddingSequence, FrameBank, ScoreCurveSet,
    Selection, SentenceTrack,
};

use crate::config::{Composer, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{level}: {}: {}", self.subject, self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// Files to check; any subset may be given.
#[derive(Debug, Clone, Default)]
pub struct ValidateInputs {
    pub bank: Option<PathBuf>,
    pub narration: Option<PathBuf>,
    pub curves: Option<PathBuf>,
    pub generated: Option<PathBuf>,
    pub selection: Option<PathBuf>,
    pub gt_selection: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub composer: Option<Composer>,
}

impl From<&PipelineConfig> for ValidateInputs {
    fn from(cfg: &PipelineConfig) -> Self {
        let i = &cfg.inputs;
        ValidateInputs {
            bank: Some(i.bank.clone()),
            narration: Some(i.narration.clone()),
            curves: i.curves.clone(),
            generated: i.generated.clone(),
            selection: None,
            gt_selection: i.gt_selection.clone(),
            pairs: i.pairs.clone(),
            composer: Some(cfg.composer),
        }
    }
}

struct Collector(Vec<Diagnostic>);

impl Collector {
    fn push(&mut self, severity: Severity, subject: &str, message: impl Into<String>) {
        self.0.push(Diagnostic {
            severity,
            subject: subject.to_owned(),
            message: message.into(),
        });
    }

    fn error(&mut self, subject: &str, message: impl Into<String>) {
        self.push(Severity::Error, subject, message);
    }

    fn warning(&mut self, subject: &str, message: impl Into<String>) {
        self.push(Severity::Warning, subject, message);
    }

    fn load<T, E: fmt::Display>(
        &mut self,
        subject: &str,
        path: Option<&Path>,
        f: impl FnOnce(&Path) -> Result<T, E>,
    ) -> Option<T> {
        match f(path?) {
            Ok(v) => Some(v),
            Err(e) => {
                self.error(subject, format!("{}: {e}", path?.display()));
                None
            }
        }
    }
}

/// Loads every given file and checks sizes, dimensions and sentence counts
/// against each other. An empty result means the inputs are runnable.
pub fn validate(inputs: &ValidateInputs) -> Vec<Diagnostic> {
    let mut c = Collector(Vec::new());

    let bank: Option<FrameBank> = c
        .load("bank", inputs.bank.as_deref(), |p| load_frame_bank_with_report(p))
        .map(|(bank, report)| {
            if !report.rescaled_rows.is_empty() {
                c.warning(
                    "bank",
                    format!(
                        "{} of {} rows were not unit-norm and were rescaled (first: row {})",
                        report.rescaled_rows.len(),
                        bank.n(),
                        report.rescaled_rows[0]
                    ),
                );
            }
            bank
        });
    let track: Option<SentenceTrack> = c.load("narration", inputs.narration.as_deref(), |p| load_sentence_track(p));
    let curves: Option<ScoreCurveSet> = c.load("curves", inputs.curves.as_deref(), |p| read_score_curves(p));
    let generated: Option<EmbeddingSequence> =
        c.load("generated", inputs.generated.as_deref(), |p| load_embedding_sequence(p));
    let selection: Option<Selection> = c.load("selection", inputs.selection.as_deref(), |p| load_selection(p));
    let gt: Option<Selection> = c.load("gt-selection", inputs.gt_selection.as_deref(), |p| load_selection(p));
    let pairs: Option<EmbeddingPairs> = c.load("pairs", inputs.pairs.as_deref(), |p| load_embedding_pairs(p));

    match inputs.composer {
        Some(Composer::Pt) if inputs.curves.is_none() => c.error("config", "curves required for pt"),
        Some(Composer::LrGreedy | Composer::LrBeam) if inputs.generated.is_none() => {
            c.error("config", "generated embeddings required for lr")
        }
        _ => {}
    }

    if let (Some(track), Some(bank)) = (&track, &bank) {
        if let Some(d) = track.dim() {
            if d != bank.dim() {
                c.error("narration", format!("sentence embeddings have dim {d}, bank has {}", bank.dim()));
            }
        }
        let total = track.total_frames();
        if total > bank.n() {
            c.warning(
                "narration",
                format!("narration needs {total} frames in total, body has {}", bank.n()),
            );
        }
        for s in track.sentences() {
            if s.tau_frames() > bank.n() {
                c.error(
                    "narration",
                    format!("sentence {} needs {} frames, body has {}", s.index, s.tau_frames(), bank.n()),
                );
            }
        }
    }

    if let Some(curves) = &curves {
        if let Some(bank) = &bank {
            if let Err(e) = curves.validate(bank.n()) {
                c.error("curves", e.to_string());
            }
        }
        if let Some(track) = &track {
            if curves.curves.len() != track.m() {
                c.error(
                    "curves",
                    format!("{} curves for {} narration sentences", curves.curves.len(), track.m()),
                );
            }
        }
    }

    if let Some(g) = &generated {
        if let Some(bank) = &bank {
            if g.dim() != bank.dim() {
                c.error("generated", format!("dim {} does not match bank dim {}", g.dim(), bank.dim()));
            }
        }
        if let Some(track) = &track {
            if let Err(e) = g.check_against_track(track) {
                c.error("generated", e.to_string());
            }
        }
    }

    for (subject, sel) in [("selection", &selection), ("gt-selection", &gt)] {
        if let (Some(sel), Some(bank)) = (sel, &bank) {
            if sel.body_frames != bank.n() {
                c.error(
                    subject,
                    format!("selection is over {} frames, bank has {}", sel.body_frames, bank.n()),
                );
            }
        }
    }
    if let (Some(sel), Some(track)) = (&selection, &track) {
        if let Some(p) = sel.sentences.iter().find(|p| p.sentence_index >= track.m()) {
            c.error(
                "selection",
                format!("sentence {} not in narration of {} sentences", p.sentence_index, track.m()),
            );
        }
    }

    if let (Some(pairs), Some(bank)) = (&pairs, &bank) {
        if pairs.dim != bank.dim() {
            c.error("pairs", format!("dim {} does not match bank dim {}", pairs.dim, bank.dim()));
        }
    }

    c.0
}
