use proptest::prelude::*;
use teasergen_core::audio::{
    chunk, chunk_with_overlap, concatenate, crossfade_merge, crossfade_weights, crossfade_window, rms_dbfs,
    silence_labels, SilenceConfig, Waveform, DEFAULT_WINDOW_FRACTION,
};

fn sine(freq: f64, amp: f64, secs: f64, rate: u32) -> Waveform {
    let n = (secs * rate as f64) as usize;
    let samples = (0..n)
        .map(|i| (amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin()) as f32)
        .collect();
    Waveform::new(samples, rate).unwrap()
}

#[test]
fn crossfade_weights_partition_unity() {
    for window in [1, 2, 3, 7, 100, 2205, 4410] {
        let w = crossfade_weights(window);
        assert_eq!(w.len(), window);
        for (out, inn) in &w {
            assert_eq!(out + inn, 1.0);
            assert!((0.0..=1.0).contains(out) && (0.0..=1.0).contains(inn));
        }
        assert!(w.windows(2).all(|p| p[1].1 > p[0].1));
    }
}

#[test]
fn sine_survives_chunk_and_merge() {
    let rate = 44_100;
    let w = sine(440.0, 0.8, 150.0, rate);
    let window = crossfade_window(rate, DEFAULT_WINDOW_FRACTION);
    let chunks = chunk_with_overlap(&w, 60.0, window).unwrap();
    assert_eq!(chunks.len(), 3);
    let merged = crossfade_merge(&chunks, DEFAULT_WINDOW_FRACTION).unwrap();
    assert_eq!(merged.len(), w.len());
    let chunk_len = 60 * rate as usize;
    let in_window = |i: usize| (1..3).any(|k| i >= k * chunk_len && i < k * chunk_len + window);
    let (mut outside, mut inside) = (0.0f64, 0.0f64);
    for (i, (a, b)) in merged.samples.iter().zip(&w.samples).enumerate() {
        let e = (a - b).abs() as f64;
        if in_window(i) {
            inside = inside.max(e);
        } else {
            outside = outside.max(e);
        }
    }
    assert!(outside < 1e-3, "outside {outside}");
    assert!(inside < 2e-2, "inside {inside}");
}

#[test]
fn silence_of_reference_signals() {
    let rate = 16_000;
    let quiet = sine(440.0, 0.01, 1.0, rate);
    assert!(silence_labels(&quiet, &SilenceConfig::default()).unwrap().iter().all(|&l| l == 0));
    let loud = sine(440.0, 0.5, 1.0, rate);
    assert!(silence_labels(&loud, &SilenceConfig::default()).unwrap().iter().all(|&l| l == 1));
    let expected = 20.0 * (0.5f64 / 2f64.sqrt()).log10();
    assert!((rms_dbfs(&loud.samples) - expected).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chunks_concatenate_back(samples in prop::collection::vec(-1.0f32..1.0, 1..2000), secs in 0.01f64..3.0) {
        let w = Waveform::new(samples, 100).unwrap();
        let back = concatenate(&chunk(&w, secs).unwrap()).unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn lower_threshold_never_silences(
        samples in prop::collection::vec(-1.0f32..1.0, 1..3000),
        gain in 0.0f32..1.0,
        a in -90.0f64..-1.0,
        b in -90.0f64..-1.0,
    ) {
        let w = Waveform::new(samples.iter().map(|s| s * gain * gain * gain).collect(), 8000).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        let cfg = |t| SilenceConfig { threshold_db: t, frame_ms: 100.0 };
        let at_hi = silence_labels(&w, &cfg(hi)).unwrap();
        let at_lo = silence_labels(&w, &cfg(lo)).unwrap();
        for (h, l) in at_hi.iter().zip(&at_lo) {
            prop_assert!(l >= h);
        }
    }

    #[test]
    fn merge_without_overlap_is_concatenation(samples in prop::collection::vec(-1.0f32..1.0, 1..500)) {
        let w = Waveform::new(samples, 100).unwrap();
        let merged = crossfade_merge(&chunk(&w, 1.0).unwrap(), 0.0).unwrap();
        prop_assert_eq!(merged, w);
    }
}
