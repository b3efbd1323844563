//! Pipeline configuration files (TOML).
//!
//! ```toml
//! composer = "pt"            # pt | lr-greedy | lr-beam
//!
//! [inputs]
//! bank = "bank.tgfb"
//! narration = "narration.json"
//! curves = "curves.json"
//!
//! [output]
//! dir = "out"
//! cutlist_format = "edl-json"
//! source = "body.mp4"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use teasergen_core::lr::BeamConfig;
use teasergen_core::pt::PtConfig;

use crate::Invalid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Composer {
    Pt,
    LrGreedy,
    LrBeam,
}

impl Composer {
    pub fn name(self) -> &'static str {
        match self {
            Composer::Pt => "pt",
            Composer::LrGreedy => "lr-greedy",
            Composer::LrBeam => "lr-beam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub bank: PathBuf,
    pub narration: PathBuf,
    #[serde(default)]
    pub curves: Option<PathBuf>,
    #[serde(default)]
    pub generated: Option<PathBuf>,
    #[serde(default)]
    pub gt_selection: Option<PathBuf>,
    #[serde(default)]
    pub pairs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
    pub cutlist_format: String,
    pub source: String,
}

impl Default for Output {
    fn default() -> Self {
        Output {
            dir: PathBuf::from("out"),
            cutlist_format: "edl-json".into(),
            source: "body.mp4".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrConfig {
    pub lambda: f64,
    pub beam_size: usize,
    pub candidates: usize,
    pub smoothing: bool,
}

impl Default for LrConfig {
    fn default() -> Self {
        let b = BeamConfig::default();
        LrConfig {
            lambda: b.lambda,
            beam_size: b.beam_size,
            candidates: b.candidates,
            smoothing: true,
        }
    }
}

impl LrConfig {
    pub fn beam(&self) -> BeamConfig {
        BeamConfig {
            lambda: self.lambda,
            beam_size: self.beam_size,
            candidates: self.candidates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub composer: Composer,
    /// Only used when generating fixtures; composition is deterministic.
    #[serde(default)]
    pub seed: u64,
    pub inputs: Inputs,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub pt: PtConfig,
    #[serde(default)]
    pub lr: LrConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| Invalid(format!("bad pipeline config: {e}")).into())
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let i = &mut self.inputs;
        fix(&mut i.bank);
        fix(&mut i.narration);
        for p in [&mut i.curves, &mut i.generated, &mut i.gt_selection, &mut i.pairs]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.output.dir);
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = PipelineConfig::from_toml(
            "composer = \"lr-beam\"\n[inputs]\nbank = \"b.tgfb\"\nnarration = \"n.json\"\n",
        )
        .unwrap();
        assert_eq!(cfg.composer, Composer::LrBeam);
        assert_eq!(cfg.pt, PtConfig::default());
        assert_eq!(cfg.lr.beam(), BeamConfig::default());
        assert!(cfg.lr.smoothing);
        assert_eq!(cfg.output.cutlist_format, "edl-json");
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let mut cfg = PipelineConfig::from_toml(
            "composer = \"pt\"\n[inputs]\nbank = \"b.tgfb\"\nnarration = \"/abs/n.json\"\ncurves = \"c.json\"\n",
        )
        .unwrap();
        cfg.rebase(Path::new("/data"));
        assert_eq!(cfg.inputs.bank, Path::new("/data/b.tgfb"));
        assert_eq!(cfg.inputs.narration, Path::new("/abs/n.json"));
        assert_eq!(cfg.inputs.curves.as_deref(), Some(Path::new("/data/c.json")));
        assert_eq!(cfg.output.dir, Path::new("/data/out"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = PipelineConfig::from_toml(
            "composer = \"pt\"\nbeam = 3\n[inputs]\nbank = \"b\"\nnarration = \"n\"\n",
        )
        .unwrap_err();
        assert_eq!(crate::exit_code(&err), crate::exit::INVALID);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = PipelineConfig::from_toml(
            "composer = \"lr-greedy\"\nseed = 9\n[inputs]\nbank = \"b\"\nnarration = \"n\"\ngenerated = \"g\"\n[lr]\nsmoothing = false\n",
        )
        .unwrap();
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }
}
