//! Mono audio buffers and RIFF/WAVE PCM input and output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Seek, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A mono clip with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting empty buffers, non-finite samples and a zero rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteAudio);
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Mean of squared samples.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Same rate, new samples. Used by transforms that keep the invariants.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.sample_rate)
    }
}

/// On-disk sample encoding for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcmFormat {
    Int16,
    Int24,
    Float32,
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::Unsupported => Error::UnsupportedFormat("codec is not linear PCM or IEEE float".into()),
        hound::Error::IoError(e) => Error::Decode(e.to_string()),
        other => Error::Decode(other.to_string()),
    }
}

fn decode<R: Read>(reader: R) -> Result<AudioClip> {
    let mut wav = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = wav.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 {
        return Err(Error::Decode("zero channels".into()));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            if !matches!(spec.bits_per_sample, 8 | 16 | 24 | 32) {
                return Err(Error::UnsupportedFormat(format!(
                    "{}-bit integer PCM",
                    spec.bits_per_sample
                )));
            }
            let scale = f64::from(1u32 << (spec.bits_per_sample - 1));
            wav.samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(map_hound)?
        }
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::UnsupportedFormat(format!("{}-bit float", spec.bits_per_sample)));
            }
            wav.samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()
                .map_err(map_hound)?
        }
    };
    let frames = interleaved.len() / channels;
    if frames == 0 {
        return Err(Error::EmptyAudio);
    }
    let mono = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    AudioClip::new(mono, spec.sample_rate)
}

/// Decodes an in-memory WAV file, averaging channels down to mono.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    decode(Cursor::new(bytes))
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode(BufReader::new(file))
}

fn encode<W: Write + Seek>(writer: W, clip: &AudioClip, format: PcmFormat) -> Result<()> {
    let (bits, sample_format) = match format {
        PcmFormat::Int16 => (16, hound::SampleFormat::Int),
        PcmFormat::Int24 => (24, hound::SampleFormat::Int),
        PcmFormat::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: bits,
        sample_format,
    };
    let mut w = hound::WavWriter::new(writer, spec).map_err(map_hound)?;
    match format {
        PcmFormat::Float32 => {
            for &s in &clip.samples {
                w.write_sample(s as f32).map_err(map_hound)?;
            }
        }
        PcmFormat::Int16 | PcmFormat::Int24 => {
            let full = f64::from(1u32 << (bits - 1));
            let (lo, hi) = (-full, full - 1.0);
            for &s in &clip.samples {
                let q = (s * full).round().clamp(lo, hi) as i32;
                w.write_sample(q).map_err(map_hound)?;
            }
        }
    }
    w.finalize().map_err(map_hound)
}

pub fn encode_wav(clip: &AudioClip, format: PcmFormat) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    encode(&mut buf, clip, format)?;
    Ok(buf.into_inner())
}

/// Writes a mono WAV. Integer formats clip to full scale.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip, format: PcmFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    encode(BufWriter::new(file), clip, format).map_err(|e| match e {
        Error::Decode(msg) => Error::io(path, std::io::Error::other(msg)),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(spec: hound::WavSpec, samples: &[i32]) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        let mut w = hound::WavWriter::new(&mut buf, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        buf.into_inner()
    }

    #[test]
    fn sixteen_bit_scaling() {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let clip = decode_wav(&wav_bytes(spec, &[0, 16384, -16384])).unwrap();
        assert_eq!(clip.sample_rate(), 16000);
        assert_eq!(clip.samples(), &[0.0, 0.5, -0.5]);
    }

    #[test]
    fn stereo_is_averaged() {
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let clip = decode_wav(&wav_bytes(spec, &[32767, 0, 32767, 0])).unwrap();
        for s in clip.samples() {
            assert!((s - 0.5).abs() < 1e-4);
        }
    }

    #[test]
    fn eight_bit_is_supported() {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: hound::SampleFormat::Int,
        };
        let clip = decode_wav(&wav_bytes(spec, &[64, -64])).unwrap();
        assert_eq!(clip.samples(), &[0.5, -0.5]);
    }

    #[test]
    fn zero_length_is_empty_audio() {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        assert!(matches!(decode_wav(&wav_bytes(spec, &[])), Err(Error::EmptyAudio)));
    }

    #[test]
    fn non_pcm_codec_is_unsupported() {
        // Minimal RIFF header declaring format tag 0x0055 (MP3).
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&36u32.to_le_bytes());
        b.extend_from_slice(b"WAVEfmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&0x0055u16.to_le_bytes());
        b.extend_from_slice(&1u16.to_le_bytes());
        b.extend_from_slice(&8000u32.to_le_bytes());
        b.extend_from_slice(&16000u32.to_le_bytes());
        b.extend_from_slice(&2u16.to_le_bytes());
        b.extend_from_slice(&16u16.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_wav(&b), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn garbage_is_a_decode_error() {
        assert!(matches!(decode_wav(b"not a wav file"), Err(Error::Decode(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_wav("/nonexistent/x.wav"), Err(Error::Io { .. })));
    }

    #[test]
    fn clip_invariants() {
        assert!(matches!(AudioClip::new(vec![], 8000), Err(Error::EmptyAudio)));
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert!(matches!(
            AudioClip::new(vec![f64::NAN], 8000),
            Err(Error::NonFiniteAudio)
        ));
    }
}
