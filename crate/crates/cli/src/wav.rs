//! Mono WAV input and output. Files are written as 32-bit float PCM; integer
//! PCM is accepted on input and scaled to [-1, 1).

use std::path::Path;

use anyhow::{bail, Context};
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use teasergen_core::audio::Waveform;

use crate::Tagged;

pub fn read_wav(path: &Path) -> anyhow::Result<Waveform> {
    let mut reader = WavReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        bail!("{}: expected mono audio, found {} channels", path.display(), spec.channels);
    }
    let samples: Vec<f32> = match spec.sample_format {
        SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<Result<_, _>>()?
        }
    };
    Waveform::new(samples, spec.sample_rate)
        .tagged()
        .with_context(|| format!("reading {}", path.display()))
}

pub fn write_wav(path: &Path, w: &Waveform) -> anyhow::Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec).with_context(|| format!("creating {}", path.display()))?;
    for &s in &w.samples {
        writer.write_sample(s)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_samples_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let w = Waveform::new(vec![0.0, 0.25, -1.0, 0.123_456_79], 22_050).unwrap();
        write_wav(&path, &w).unwrap();
        assert_eq!(read_wav(&path).unwrap(), w);
    }

    #[test]
    fn int_samples_are_scaled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut wr = WavWriter::create(&path, spec).unwrap();
        for s in [0i16, 16384, -32768] {
            wr.write_sample(s).unwrap();
        }
        wr.finalize().unwrap();
        assert_eq!(read_wav(&path).unwrap().samples, vec![0.0, 0.5, -1.0]);
    }
}
