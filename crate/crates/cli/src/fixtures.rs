//! Seeded synthetic corpus: a body of a dozen "scenes", a narration whose
//! sentences describe some of them, and everything the pipelines consume.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teasergen_core::audio::Waveform;
use teasergen_core::store::{
    save_embedding_pairs, save_embedding_sequence, save_score_curves, save_selection, save_sentence_track,
    EmbeddingPair, EmbeddingPairs, EmbeddingSequence, FrameBank, Picks, ScoreCurveSet, Selection, Sentence,
    SentencePick, SentenceSpan, SentenceTrack,
};

use crate::config::{Composer, Inputs, LrConfig, Output, PipelineConfig};
use crate::wav::write_wav;
use crate::Tagged;

pub const BODY_FRAMES: usize = 120;
pub const DIM: usize = 16;
const SCENES: usize = 12;
const SCENE_LEN: usize = BODY_FRAMES / SCENES;
const NARRATION_SECONDS: [f64; 4] = [6.2, 4.5, 8.0, 5.4];
const NARRATED_SCENES: [usize; 4] = [2, 7, 4, 10];

fn unit(v: Vec<f32>) -> Vec<f32> {
    let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    v.into_iter().map(|x| (x as f64 / norm) as f32).collect()
}

fn noisy(rng: &mut impl Rng, base: &[f32], amount: f32) -> Vec<f32> {
    unit(base.iter().map(|b| b + amount * rng.gen_range(-1.0f32..1.0)).collect())
}

fn tone(freq: f64, amp: f64, seconds: f64, rate: u32, gate: impl Fn(f64) -> bool) -> Waveform {
    let n = (seconds * rate as f64) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            if gate(t) {
                (amp * (2.0 * std::f64::consts::PI * freq * t).sin()) as f32
            } else {
                0.0
            }
        })
        .collect();
    Waveform::new(samples, rate).expect("finite tone")
}

/// Writes the corpus into `out` and returns the paths written.
pub fn generate(out: &Path, seed: u64) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut files = Vec::new();

    let scenes: Vec<Vec<f32>> = (0..SCENES)
        .map(|_| unit((0..DIM).map(|_| rng.gen_range(-1.0f32..1.0)).collect()))
        .collect();
    let mut rows = Vec::with_capacity(BODY_FRAMES * DIM);
    let mut brightness = Vec::with_capacity(BODY_FRAMES);
    for (s, scene) in scenes.iter().enumerate() {
        let level = rng.gen_range(40.0f32..200.0);
        for k in 0..SCENE_LEN {
            rows.extend(noisy(&mut rng, scene, 0.25));
            let b = if s == 0 && k < 3 { rng.gen_range(2.0f32..10.0) } else { level + rng.gen_range(-8.0f32..8.0) };
            brightness.push(b);
        }
    }
    let bank = FrameBank::new(DIM, rows, Some(brightness), "bank").tagged()?;
    let path = out.join("bank.tgfb");
    bank.save(&path).tagged()?;
    files.push(path);

    let track = SentenceTrack::new(
        NARRATION_SECONDS
            .iter()
            .zip(NARRATED_SCENES)
            .enumerate()
            .map(|(i, (&tau, scene))| Sentence {
                index: i,
                text: format!("Sentence {} about scene {scene}.", i + 1),
                tau_seconds: tau,
                embedding: Some(noisy(&mut rng, &scenes[scene], 0.3)),
            })
            .collect(),
    )
    .tagged()?;
    let path = out.join("narration.json");
    save_sentence_track(&track, &path).tagged()?;
    files.push(path);

    let curves = ScoreCurveSet::from_clip_similarity(&track, &bank).tagged()?;
    let path = out.join("curves.json");
    save_score_curves(&curves, &path).tagged()?;
    files.push(path);

    // Decoder output drifts towards a few frames of the narrated scene, so
    // greedy decoding repeats frames and beam search has something to fix.
    let mut gen_rows = Vec::new();
    let mut spans = Vec::new();
    for (i, s) in track.sentences().iter().enumerate() {
        let start = gen_rows.len();
        let scene = NARRATED_SCENES[i];
        for _ in 0..s.tau_frames() {
            let f = scene * SCENE_LEN + rng.gen_range(0..3);
            gen_rows.push(noisy(&mut rng, bank.row(f), 0.2));
        }
        spans.push(SentenceSpan {
            start,
            end: gen_rows.len(),
            sentence: i,
        });
    }
    let generated = EmbeddingSequence::new(gen_rows, spans).tagged()?;
    let path = out.join("generated.json");
    save_embedding_sequence(&generated, &path).tagged()?;
    files.push(path);

    let gt = Selection {
        body_frames: BODY_FRAMES,
        sentences: track
            .sentences()
            .iter()
            .zip(NARRATED_SCENES)
            .map(|(s, scene)| {
                let start = scene * SCENE_LEN + 1;
                SentencePick {
                    sentence_index: s.index,
                    target_frames: s.tau_frames(),
                    picks: Picks::Frames((start..start + s.tau_frames()).collect()),
                    theta: None,
                    shortfall: false,
                }
            })
            .collect(),
    };
    let path = out.join("gt_selection.json");
    save_selection(&gt, &path).tagged()?;
    files.push(path);

    let pairs = EmbeddingPairs::new(
        DIM,
        track
            .sentences()
            .iter()
            .zip(NARRATED_SCENES)
            .map(|(s, scene)| EmbeddingPair {
                text: s.embedding.clone().unwrap_or_default(),
                image: bank.row(scene * SCENE_LEN + SCENE_LEN / 2).to_vec(),
            })
            .collect(),
    )
    .tagged()?;
    let path = out.join("pairs.json");
    save_embedding_pairs(&pairs, &path).tagged()?;
    files.push(path);

    let path = out.join("tone.wav");
    write_wav(&path, &tone(440.0, 0.5, 2.5, 8000, |_| true))?;
    files.push(path);
    let path = out.join("dialogue.wav");
    write_wav(&path, &tone(220.0, 0.3, 2.0, 8000, |t| (t * 2.0) as usize % 2 == 0))?;
    files.push(path);

    for composer in [Composer::Pt, Composer::LrGreedy, Composer::LrBeam] {
        let cfg = PipelineConfig {
            composer,
            seed,
            inputs: Inputs {
                bank: "bank.tgfb".into(),
                narration: "narration.json".into(),
                curves: Some("curves.json".into()),
                generated: Some("generated.json".into()),
                gt_selection: Some("gt_selection.json".into()),
                pairs: None,
            },
            output: Output {
                dir: format!("out-{}", composer.name()).into(),
                ..Output::default()
            },
            pt: Default::default(),
            lr: LrConfig::default(),
        };
        let path = out.join(format!("pipeline-{}.toml", composer.name()));
        fs::write(&path, cfg.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
        files.push(path);
    }
    Ok(files)
}
