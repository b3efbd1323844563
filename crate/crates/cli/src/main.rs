use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use teasergen_cli::config::{Composer, LrConfig, PipelineConfig};
use teasergen_cli::diagnostics::{has_errors, validate, ValidateInputs};
use teasergen_cli::pipeline::{
    audio_chunk, audio_merge, audio_silence, compose_lr, compose_pt, evaluate, shortfall_warnings, EvalInputs,
};
use teasergen_cli::{exit, exit_code, fixtures, Invalid, Tagged};
use teasergen_core::audio::{SilenceConfig, Stem, DEFAULT_CHUNK_SECONDS, DEFAULT_WINDOW_FRACTION};
use teasergen_core::pt::PtConfig;
use teasergen_core::store::{
    load_embedding_pairs, load_embedding_sequence, load_frame_bank, load_score_curves, load_selection,
    load_sentence_track, save_selection,
};
use teasergen_core::timeline::{assemble, emit_cutlist, CutlistFormat};

#[derive(Parser)]
#[command(name = "teasergen", version, about = "Compose documentary teasers from narration and frame embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum StemArg {
    Dialogue,
    Music,
    Effects,
}

impl From<StemArg> for Stem {
    fn from(s: StemArg) -> Stem {
        match s {
            StemArg::Dialogue => Stem::Dialogue,
            StemArg::Music => Stem::Music,
            StemArg::Effects => Stem::Effects,
        }
    }
}

#[derive(Args)]
struct PtArgs {
    /// Shortest clip kept, in seconds.
    #[arg(long)]
    min_clip: Option<usize>,
    /// Largest allowed overlap with recent sentences' clips, in seconds.
    #[arg(long)]
    max_overlap: Option<usize>,
    /// How many previous sentences count for the overlap limit.
    #[arg(long)]
    lookback: Option<usize>,
}

impl PtArgs {
    fn apply(&self, cfg: &mut PtConfig) {
        if let Some(v) = self.min_clip {
            cfg.min_clip_seconds = v;
        }
        if let Some(v) = self.max_overlap {
            cfg.max_overlap_seconds = v;
        }
        if let Some(v) = self.lookback {
            cfg.lookback_sentences = v;
        }
    }
}

#[derive(Args)]
struct LrArgs {
    /// Weight of the cross-sentence similarity penalty.
    #[arg(long)]
    lambda: Option<f64>,
    /// Beams kept after each step.
    #[arg(long)]
    beam: Option<usize>,
    /// Candidate frames considered per slot.
    #[arg(long)]
    cands: Option<usize>,
    #[arg(long, value_enum)]
    smoothing: Option<Switch>,
}

impl LrArgs {
    fn apply(&self, cfg: &mut LrConfig) {
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.beam {
            cfg.beam_size = v;
        }
        if let Some(v) = self.cands {
            cfg.candidates = v;
        }
        if let Some(s) = self.smoothing {
            cfg.smoothing = matches!(s, Switch::On);
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Select clips by thresholding per-sentence score curves.
    ComposePt {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        narration: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pt: PtArgs,
    },
    /// Decode generated image embeddings to body frames.
    ComposeLr {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Check slot counts against this narration track.
        #[arg(long)]
        narration: Option<PathBuf>,
        /// Nearest-frame decoding instead of beam search.
        #[arg(long)]
        greedy: bool,
        #[command(flatten)]
        lr: LrArgs,
    },
    /// Compute REP, SCR, CLIPScore and F1 for a selection.
    Evaluate {
        #[arg(long)]
        selection: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        gt_selection: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Narration with sentence embeddings, used for CLIPScore when no pairs are given.
        #[arg(long)]
        narration: Option<PathBuf>,
        /// Score curves to average over the selected frames.
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Lay a selection out along the narration and emit a cut list.
    Assemble {
        #[arg(long)]
        selection: PathBuf,
        #[arg(long)]
        narration: PathBuf,
        /// edl-json or ffconcat-text.
        #[arg(long, default_value = "edl-json")]
        format: String,
        /// Body-content media file the cut list refers to.
        #[arg(long, default_value = "body.mp4")]
        source: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chunk, merge and label audio stems.
    AudioPrep {
        #[command(subcommand)]
        command: AudioCommand,
    },
    /// Check inputs for consistency; exits 2 when any error is found.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        narration: Option<PathBuf>,
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        generated: Option<PathBuf>,
        #[arg(long)]
        selection: Option<PathBuf>,
        #[arg(long)]
        gt_selection: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, value_enum)]
        composer: Option<Composer>,
        /// Print diagnostics as a JSON array.
        #[arg(long)]
        json: bool,
    },
    /// Synthetic corpus for tests and demos.
    Fixtures {
        #[command(subcommand)]
        command: FixtureCommand,
    },
    /// Run a full pipeline from a config file; flags override the file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        composer: Option<Composer>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        source: Option<String>,
        #[command(flatten)]
        pt: PtArgs,
        #[command(flatten)]
        lr: LrArgs,
    },
}

#[derive(Subcommand)]
enum AudioCommand {
    /// Split a mono WAV into fixed-length chunks that overlap by the crossfade window.
    Chunk {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CHUNK_SECONDS)]
        chunk_seconds: f64,
        /// Overlap as a fraction of the sample rate; 0 for plain chunks.
        #[arg(long, default_value_t = DEFAULT_WINDOW_FRACTION)]
        window_fraction: f64,
    },
    /// Crossfade chunks back into one file.
    Merge {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW_FRACTION)]
        window_fraction: f64,
        #[arg(required = true)]
        chunks: Vec<PathBuf>,
    },
    /// Label each window as sound (1) or silence (0).
    Silence {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "music")]
        stem: StemArg,
        /// Overrides the stem's default threshold.
        #[arg(long, allow_hyphen_values = true)]
        threshold_db: Option<f64>,
        #[arg(long, default_value_t = 100.0)]
        frame_ms: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum FixtureCommand {
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn write_text(path: &PathBuf, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn json_text<T: serde::Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::ComposePt {
            bank,
            curves,
            narration,
            out,
            pt,
        } => {
            let mut cfg = PtConfig::default();
            pt.apply(&mut cfg);
            cfg.validate().map_err(|e| Invalid(e.to_string()))?;
            let bank = load_frame_bank(&bank).tagged()?;
            let curves = load_score_curves(&curves, &bank).tagged()?;
            let track = load_sentence_track(&narration).tagged()?;
            let sel = compose_pt(&bank, &curves, &track, &cfg)?;
            for w in shortfall_warnings(&sel, cfg.duration_tolerance_frames) {
                eprintln!("warning: {w}");
            }
            save_selection(&sel, &out).tagged()?;
        }
        Command::ComposeLr {
            bank,
            generated,
            out,
            narration,
            greedy,
            lr,
        } => {
            let mut cfg = LrConfig::default();
            lr.apply(&mut cfg);
            cfg.beam().validate().map_err(|e| Invalid(e.to_string()))?;
            let bank = load_frame_bank(&bank).tagged()?;
            let generated = load_embedding_sequence(&generated).tagged()?;
            if let Some(p) = narration {
                generated.check_against_track(&load_sentence_track(&p).tagged()?).tagged()?;
            }
            let composer = if greedy { Composer::LrGreedy } else { Composer::LrBeam };
            let sel = compose_lr(&bank, &generated, composer, &cfg)?;
            save_selection(&sel, &out).tagged()?;
        }
        Command::Evaluate {
            selection,
            bank,
            gt_selection,
            pairs,
            narration,
            curves,
            report,
        } => {
            let bank = load_frame_bank(&bank).tagged()?;
            let sel = load_selection(&selection).tagged()?;
            let gt = gt_selection.map(|p| load_selection(p).tagged()).transpose()?;
            let pairs = pairs.map(|p| load_embedding_pairs(p).tagged()).transpose()?;
            let track = narration.map(|p| load_sentence_track(p).tagged()).transpose()?;
            let curves = curves.map(|p| load_score_curves(p, &bank).tagged()).transpose()?;
            let r = evaluate(
                &sel,
                &bank,
                &EvalInputs {
                    gt: gt.as_ref(),
                    pairs: pairs.as_ref(),
                    narration: track.as_ref(),
                    curves: curves.as_ref(),
                },
            )?;
            write_text(&report, &r.to_json()?)?;
        }
        Command::Assemble {
            selection,
            narration,
            format,
            source,
            out,
        } => {
            let format: CutlistFormat = format.parse().map_err(|e| Invalid(format!("{e}")))?;
            let sel = load_selection(&selection).tagged()?;
            let track = load_sentence_track(&narration).tagged()?;
            let timeline = assemble(&sel, &track).tagged()?;
            write_text(&out, &emit_cutlist(&timeline, format, &source).tagged()?)?;
        }
        Command::AudioPrep { command } => match command {
            AudioCommand::Chunk {
                input,
                out_dir,
                chunk_seconds,
                window_fraction,
            } => {
                for p in audio_chunk(&input, &out_dir, chunk_seconds, window_fraction)? {
                    println!("{}", p.display());
                }
            }
            AudioCommand::Merge {
                out,
                window_fraction,
                chunks,
            } => audio_merge(&chunks, &out, window_fraction)?,
            AudioCommand::Silence {
                input,
                stem,
                threshold_db,
                frame_ms,
                out,
            } => {
                let stem = Stem::from(stem);
                let mut cfg = SilenceConfig::for_stem(stem);
                cfg.frame_ms = frame_ms;
                if let Some(t) = threshold_db {
                    cfg.threshold_db = t;
                }
                write_text(&out, &json_text(&audio_silence(&input, stem, &cfg)?)?)?;
            }
        },
        Command::Validate {
            config,
            bank,
            narration,
            curves,
            generated,
            selection,
            gt_selection,
            pairs,
            composer,
            json,
        } => {
            let mut inputs = match &config {
                Some(p) => ValidateInputs::from(&PipelineConfig::load(p)?),
                None => ValidateInputs::default(),
            };
            let over = |slot: &mut Option<PathBuf>, v: Option<PathBuf>| {
                if v.is_some() {
                    *slot = v;
                }
            };
            over(&mut inputs.bank, bank);
            over(&mut inputs.narration, narration);
            over(&mut inputs.curves, curves);
            over(&mut inputs.generated, generated);
            over(&mut inputs.selection, selection);
            over(&mut inputs.gt_selection, gt_selection);
            over(&mut inputs.pairs, pairs);
            if composer.is_some() {
                inputs.composer = composer;
            }
            let diags = validate(&inputs);
            if json {
                print!("{}", json_text(&diags)?);
            } else {
                for d in &diags {
                    println!("{d}");
                }
            }
            return Ok(if has_errors(&diags) { exit::INVALID } else { exit::OK });
        }
        Command::Fixtures {
            command: FixtureCommand::Gen { out, seed },
        } => {
            for p in fixtures::generate(&out, seed)? {
                println!("{}", p.display());
            }
        }
        Command::Run {
            config,
            composer,
            out_dir,
            format,
            source,
            pt,
            lr,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(c) = composer {
                cfg.composer = c;
            }
            if let Some(d) = out_dir {
                cfg.output.dir = d;
            }
            if let Some(f) = format {
                cfg.output.cutlist_format = f;
            }
            if let Some(s) = source {
                cfg.output.source = s;
            }
            pt.apply(&mut cfg.pt);
            lr.apply(&mut cfg.lr);
            cfg.pt.validate().map_err(|e| Invalid(e.to_string()))?;
            cfg.lr.beam().validate().map_err(|e| Invalid(e.to_string()))?;
            let out = teasergen_cli::pipeline::run_pipeline(&cfg)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for p in &out.files {
                println!("{}", p.display());
            }
        }
    }
    Ok(exit::OK)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
