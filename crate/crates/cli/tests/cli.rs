use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use teasergen_core::store::{load_selection, save_sentence_track, FrameBank, Sentence, SentenceTrack};

fn teasergen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teasergen")).args(args).output().unwrap()
}

fn fixtures(dir: &Path) {
    let out = teasergen(&["fixtures", "gen", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn diagnostics(out: &Output) -> Vec<serde_json::Value> {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn consistent_fixture_validates_clean() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out = teasergen(&["validate", "--config", &path(dir.path(), "pipeline-pt.toml"), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(diagnostics(&out).is_empty());
}

#[test]
fn missing_curves_for_pt_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let cfg = fs::read_to_string(dir.path().join("pipeline-pt.toml")).unwrap();
    let cfg: String = cfg.lines().filter(|l| !l.starts_with("curves")).map(|l| format!("{l}\n")).collect();
    fs::write(dir.path().join("no-curves.toml"), cfg).unwrap();
    let out = teasergen(&["run", "--config", &path(dir.path(), "no-curves.toml")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("curves required for pt"));
}

#[test]
fn unreadable_audio_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = teasergen(&[
        "audio-prep", "merge", "--out", &path(dir.path(), "m.wav"), &path(dir.path(), "missing.wav"),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn dimension_mismatch_is_one_error() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let bank = FrameBank::new(8, vec![0.5; 8 * 120], None, "narrow").unwrap();
    bank.save(dir.path().join("narrow.tgfb")).unwrap();
    let out = teasergen(&[
        "validate", "--bank", &path(dir.path(), "narrow.tgfb"), "--narration", &path(dir.path(), "narration.json"),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let diags = diagnostics(&out);
    assert_eq!(diags.len(), 1, "{diags:?}");
    assert_eq!(diags[0]["severity"], "error");
    assert_eq!(diags[0]["subject"], "narration");
}

#[test]
fn narration_longer_than_body_is_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let track = SentenceTrack::new(
        (0..4)
            .map(|i| Sentence { index: i, text: format!("s{i}"), tau_seconds: 40.0, embedding: None })
            .collect(),
    )
    .unwrap();
    save_sentence_track(&track, dir.path().join("long.json")).unwrap();
    let out = teasergen(&[
        "validate", "--bank", &path(dir.path(), "bank.tgfb"), "--narration", &path(dir.path(), "long.json"), "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let diags = diagnostics(&out);
    assert_eq!(diags.len(), 1, "{diags:?}");
    assert_eq!(diags[0]["severity"], "warning");
}

#[test]
fn trivial_beam_matches_greedy() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let compose = |name: &str, extra: &[&str]| {
        let mut args = vec![
            "compose-lr".to_owned(),
            "--bank".into(),
            path(dir.path(), "bank.tgfb"),
            "--generated".into(),
            path(dir.path(), "generated.json"),
            "--smoothing".into(),
            "off".into(),
            "--out".into(),
            path(dir.path(), name),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert!(teasergen(&args).status.success());
        fs::read(dir.path().join(name)).unwrap()
    };
    let beam = compose("beam.json", &["--beam", "1", "--cands", "1", "--lambda", "0"]);
    let greedy = compose("greedy.json", &["--greedy"]);
    assert_eq!(beam, greedy);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out_dir = path(dir.path(), "flagged");
    let out = teasergen(&[
        "run", "--config", &path(dir.path(), "pipeline-pt.toml"), "--composer", "lr-greedy", "--out-dir", &out_dir,
        "--format", "ffconcat-text",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let flagged = Path::new(&out_dir);
    assert!(flagged.join("cutlist.ffconcat").exists());
    assert!(!dir.path().join("out-pt").exists());
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(flagged.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["parameters"]["composer"], "lr-greedy");
    let sel = load_selection(flagged.join("selection.json")).unwrap();
    assert_eq!(sel.sentences.len(), 4);
}
