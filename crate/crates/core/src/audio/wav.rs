use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use super::{AudioFormat, MultichannelAudio};
use crate::error::{Result, SeldError};

/// On-disk sample encodings accepted by [`read_wav`] and produced by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleEncoding {
    Pcm16,
    Float32,
}

const PCM16_FULL_SCALE: f64 = 32768.0;

/// Reads a PCM16 or float32 RIFF/WAVE file. No resampling is done: the file
/// must match `expected` exactly.
pub fn read_wav(path: impl AsRef<Path>, expected: AudioFormat) -> Result<MultichannelAudio> {
    let reader = WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels != expected.num_channels {
        return Err(SeldError::ChannelMismatch {
            expected: expected.num_channels,
            found: channels,
        });
    }
    if spec.sample_rate != expected.sample_rate_hz {
        return Err(SeldError::SampleRateMismatch {
            expected: expected.sample_rate_hz,
            found: spec.sample_rate,
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_FULL_SCALE))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(SeldError::MalformedWav(format!(
                "unsupported encoding {fmt:?} {bits}-bit (PCM16 or float32 only)"
            )))
        }
    };
    if !interleaved.len().is_multiple_of(channels) {
        return Err(SeldError::MalformedWav("truncated sample frame".into()));
    }

    let frames = interleaved.len() / channels;
    let mut out = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (dst, &s) in out.iter_mut().zip(frame) {
            dst.push(s);
        }
    }
    if frames == 0 {
        return Ok(MultichannelAudio::silence(expected, 0));
    }
    MultichannelAudio::from_channels(expected.sample_rate_hz, out)
}

pub fn write_wav(
    path: impl AsRef<Path>,
    audio: &MultichannelAudio,
    encoding: SampleEncoding,
) -> Result<()> {
    let format = audio.format();
    let spec = WavSpec {
        channels: u16::try_from(format.num_channels)
            .map_err(|_| SeldError::InvalidRange("too many channels for WAV".into()))?,
        sample_rate: format.sample_rate_hz,
        bits_per_sample: match encoding {
            SampleEncoding::Pcm16 => 16,
            SampleEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            SampleEncoding::Pcm16 => SampleFormat::Int,
            SampleEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path.as_ref(), spec)?;
    for n in 0..audio.num_samples() {
        for ch in audio.channels() {
            match encoding {
                SampleEncoding::Pcm16 => {
                    let v = (ch[n] * PCM16_FULL_SCALE)
                        .round()
                        .clamp(i16::MIN as f64, i16::MAX as f64);
                    writer.write_sample(v as i16)?;
                }
                SampleEncoding::Float32 => writer.write_sample(ch[n] as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(format: AudioFormat, n: usize) -> MultichannelAudio {
        let channels = (0..format.num_channels)
            .map(|c| {
                (0..n)
                    .map(|i| 0.5 * ((i as f64) * 0.01 * (c + 1) as f64).sin())
                    .collect()
            })
            .collect();
        MultichannelAudio::from_channels(format.sample_rate_hz, channels).unwrap()
    }

    #[test]
    fn silence_reads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.wav");
        let fmt = AudioFormat::default();
        write_wav(&path, &MultichannelAudio::silence(fmt, 2400), SampleEncoding::Pcm16).unwrap();
        let audio = read_wav(&path, fmt).unwrap();
        assert_eq!(audio.num_channels(), 4);
        assert_eq!(audio.num_samples(), 2400);
        assert!(audio.channels().iter().flatten().all(|&s| s == 0.0));
    }

    #[test]
    fn float32_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.wav");
        let b = dir.path().join("b.wav");
        let fmt = AudioFormat::default();
        write_wav(&a, &tone(fmt, 1000), SampleEncoding::Float32).unwrap();
        let audio = read_wav(&a, fmt).unwrap();
        write_wav(&b, &audio, SampleEncoding::Float32).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn pcm16_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.wav");
        let b = dir.path().join("b.wav");
        let fmt = AudioFormat::new(24_000, 2).unwrap();
        write_wav(&a, &tone(fmt, 500), SampleEncoding::Pcm16).unwrap();
        let audio = read_wav(&a, fmt).unwrap();
        write_wav(&b, &audio, SampleEncoding::Pcm16).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn channel_and_rate_mismatch_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let stereo = AudioFormat::new(24_000, 2).unwrap();
        write_wav(&path, &tone(stereo, 100), SampleEncoding::Pcm16).unwrap();

        let err = read_wav(&path, AudioFormat::default()).unwrap_err();
        assert!(matches!(err, SeldError::ChannelMismatch { expected: 4, found: 2 }));

        let err = read_wav(&path, AudioFormat::new(48_000, 2).unwrap()).unwrap_err();
        assert!(matches!(err, SeldError::SampleRateMismatch { .. }));
    }

    #[test]
    fn garbage_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.wav");
        std::fs::write(&path, b"RIFF\x00\x00\x00\x00NOPE").unwrap();
        assert!(matches!(
            read_wav(&path, AudioFormat::default()),
            Err(SeldError::MalformedWav(_))
        ));
    }
}
