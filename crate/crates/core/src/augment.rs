//! Training-side data augmentation: additive noise, circular time shift,
//! phase-vocoder time stretch and pitch shift.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::{load_wav, write_wav, AudioClip, PcmFormat};
use crate::corpus::{CorpusManifest, ManifestEntry, Origin, AUGMENTED_MARKER};
use crate::dsp::{resample, ComplexStft, StftEngine};
use crate::error::{Error, Result};
use crate::seed;

pub const VOCODER_N_FFT: usize = 2048;
pub const VOCODER_HOP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Noise,
    Shift,
    Stretch,
    Pitch,
}

impl Technique {
    pub const ALL: [Technique; 4] = [Technique::Noise, Technique::Shift, Technique::Stretch, Technique::Pitch];

    pub fn as_str(self) -> &'static str {
        match self {
            Technique::Noise => "noise",
            Technique::Shift => "shift",
            Technique::Stretch => "stretch",
            Technique::Pitch => "pitch",
        }
    }
}

/// Magnitudes for the four augmentations. One derivative per technique is
/// drawn for each source clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPlan {
    pub snr_db: f64,
    /// Magnitude of the circular shift as a fraction of clip length; the
    /// direction is drawn per clip.
    pub shift_fraction: f64,
    pub stretch_lo: f64,
    pub stretch_hi: f64,
    /// Candidate pitch offsets, one drawn uniformly per clip.
    pub semitones: Vec<f64>,
    pub seed: u64,
}

impl Default for AugmentPlan {
    fn default() -> Self {
        Self {
            snr_db: 20.0,
            shift_fraction: 0.1,
            stretch_lo: 0.9,
            stretch_hi: 1.1,
            semitones: vec![-2.0, -1.0, 1.0, 2.0],
            seed: 0,
        }
    }
}

impl AugmentPlan {
    pub fn validate(&self) -> Result<()> {
        if !self.snr_db.is_finite() {
            return Err(Error::Parameter("snr_db must be finite".into()));
        }
        if !(self.shift_fraction.abs() < 1.0) {
            return Err(Error::Parameter("|shift fraction| must be < 1".into()));
        }
        check_rate(self.stretch_lo)?;
        check_rate(self.stretch_hi)?;
        if self.stretch_lo > self.stretch_hi {
            return Err(Error::Parameter("stretch range is empty".into()));
        }
        if self.semitones.is_empty() {
            return Err(Error::Parameter("semitone set is empty".into()));
        }
        self.semitones.iter().try_for_each(|&s| check_semitones(s))
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.5..=2.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("stretch rate {rate} is outside [0.5, 2]")))
    }
}

fn check_semitones(semitones: f64) -> Result<()> {
    if semitones.abs() <= 12.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "pitch shift of {semitones} semitones exceeds 12"
        )))
    }
}

/// Adds white Gaussian noise scaled to exactly `snr_db` below the clip power.
pub fn add_noise(clip: &AudioClip, snr_db: f64, seed: u64) -> Result<AudioClip> {
    if !snr_db.is_finite() {
        return Err(Error::Parameter("snr_db must be finite".into()));
    }
    let signal_power = clip.power();
    if signal_power == 0.0 {
        return Err(Error::ZeroSignalPower);
    }
    let mut rng = seed::rng(seed);
    let noise: Vec<f64> = (0..clip.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let noise_power = noise.iter().map(|n| n * n).sum::<f64>() / noise.len() as f64;
    let target = signal_power / 10f64.powf(snr_db / 10.0);
    let scale = if noise_power > 0.0 {
        (target / noise_power).sqrt()
    } else {
        0.0
    };
    clip.with_samples(clip.samples().iter().zip(&noise).map(|(s, n)| s + scale * n).collect())
}

/// Circular shift by `round(fraction * len)` samples; positive delays the clip.
pub fn time_shift(clip: &AudioClip, fraction: f64) -> Result<AudioClip> {
    if !(fraction.abs() < 1.0) {
        return Err(Error::Parameter("|shift fraction| must be < 1".into()));
    }
    let len = clip.len();
    let shift = (fraction * len as f64).round() as i64;
    let by = shift.rem_euclid(len as i64) as usize;
    let mut out = clip.samples().to_vec();
    out.rotate_right(by);
    clip.with_samples(out)
}

/// [`time_shift`] by `magnitude` in a direction drawn from `seed`.
pub fn time_shift_random(clip: &AudioClip, magnitude: f64, seed: u64) -> Result<AudioClip> {
    let forward: bool = seed::rng(seed).gen();
    let m = magnitude.abs();
    time_shift(clip, if forward { m } else { -m })
}

fn wrap_phase(p: f64) -> f64 {
    p - 2.0 * PI * (p / (2.0 * PI)).round()
}

/// Phase-vocoder resynthesis at `rate` frames per output frame.
fn phase_vocoder(spec: &ComplexStft, rate: f64) -> ComplexStft {
    let n_bins = spec.n_bins();
    let n_frames = spec.n_frames();
    let polar: Vec<(Vec<f64>, Vec<f64>)> = spec
        .frames
        .iter()
        .map(|f| {
            (
                f.iter().map(|c| c.norm()).collect(),
                f.iter().map(|c| c.arg()).collect(),
            )
        })
        .collect();
    let zero = (vec![0.0; n_bins], vec![0.0; n_bins]);
    let column = |t: usize| polar.get(t).unwrap_or(&zero);
    let advance: Vec<f64> = (0..n_bins)
        .map(|k| 2.0 * PI * spec.hop as f64 * k as f64 / spec.n_fft as f64)
        .collect();
    let mut phase = polar[0].1.clone();
    let mut frames = Vec::new();
    let mut step = 0usize;
    loop {
        let t = step as f64 * rate;
        if t >= n_frames as f64 {
            break;
        }
        let i = t.floor() as usize;
        let alpha = t - i as f64;
        let ((m0, p0), (m1, p1)) = (column(i), column(i + 1));
        let frame = (0..n_bins)
            .map(|k| {
                let mag = (1.0 - alpha) * m0[k] + alpha * m1[k];
                let out = Complex64::from_polar(mag, phase[k]);
                phase[k] += advance[k] + wrap_phase(p1[k] - p0[k] - advance[k]);
                out
            })
            .collect();
        frames.push(frame);
        step += 1;
    }
    ComplexStft {
        n_fft: spec.n_fft,
        hop: spec.hop,
        frames,
    }
}

/// Changes duration by `1 / rate` without changing pitch.
pub fn time_stretch(clip: &AudioClip, rate: f64) -> Result<AudioClip> {
    check_rate(rate)?;
    if clip.len() < VOCODER_N_FFT {
        return Err(Error::TooShort {
            len: clip.len(),
            needed: VOCODER_N_FFT,
        });
    }
    let engine = StftEngine::new(VOCODER_N_FFT, VOCODER_HOP)?;
    let spec = engine.stft(clip.samples())?;
    let stretched = phase_vocoder(&spec, rate);
    let out_len = ((clip.len() as f64 / rate).round() as usize).max(1);
    clip.with_samples(engine.istft(&stretched, out_len))
}

/// Shifts pitch by `semitones` while keeping the duration: stretch by
/// `2^(-semitones/12)`, then resample back to the original length.
pub fn pitch_shift(clip: &AudioClip, semitones: f64) -> Result<AudioClip> {
    check_semitones(semitones)?;
    let rate = 2f64.powf(-semitones / 12.0);
    let stretched = time_stretch(clip, rate)?;
    let ratio = clip.len() as f64 / stretched.len() as f64;
    clip.with_samples(resample(stretched.samples(), ratio, clip.len()))
}

fn technique_seed(plan: &AugmentPlan, group: &str, technique: Technique) -> u64 {
    seed::derive_seed(plan.seed, &format!("{group}#{}", technique.as_str()))
}

/// One derivative per technique, seeded by `(plan.seed, group, technique)`.
pub fn augment_clip(clip: &AudioClip, plan: &AugmentPlan, group: &str) -> Vec<(Technique, Result<AudioClip>)> {
    Technique::ALL
        .iter()
        .map(|&t| {
            let s = technique_seed(plan, group, t);
            let out = match t {
                Technique::Noise => add_noise(clip, plan.snr_db, s),
                Technique::Shift => time_shift_random(clip, plan.shift_fraction, s),
                Technique::Stretch => {
                    let rate = if plan.stretch_hi > plan.stretch_lo {
                        seed::rng(s).gen_range(plan.stretch_lo..=plan.stretch_hi)
                    } else {
                        plan.stretch_lo
                    };
                    time_stretch(clip, rate)
                }
                Technique::Pitch => {
                    let pick = seed::rng(s).gen_range(0..plan.semitones.len());
                    pitch_shift(clip, plan.semitones[pick])
                }
            };
            (t, out)
        })
        .collect()
}

/// `<dir>/<stem>.aug-<technique>.wav` beside the source file.
pub fn derivative_path(source: &str, technique: Technique) -> String {
    let stem_end = source
        .rfind('.')
        .filter(|&i| i > source.rfind('/').map_or(0, |j| j + 1));
    let stem = stem_end.map_or(source, |i| &source[..i]);
    format!("{stem}{AUGMENTED_MARKER}{}.wav", technique.as_str())
}

/// Expands a manifest of training originals five-fold, writing derivative
/// WAVs beside their sources. A technique that fails on a clip is skipped
/// with a warning.
pub fn augment_training_set(manifest: &CorpusManifest, plan: &AugmentPlan) -> Result<CorpusManifest> {
    plan.validate()?;
    if manifest.entries.iter().any(|e| e.origin != Origin::Original) {
        return Err(Error::Parameter(
            "augmentation input must contain only original entries".into(),
        ));
    }
    let per_entry: Vec<(Vec<ManifestEntry>, Vec<String>)> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let clip = load_wav(manifest.resolve(entry))?;
            let mut added = Vec::new();
            let mut warnings = Vec::new();
            for (technique, result) in augment_clip(&clip, plan, &entry.group) {
                match result {
                    Ok(derived) => {
                        let rel = derivative_path(&entry.path, technique);
                        write_wav(manifest.root.join(Path::new(&rel)), &derived, PcmFormat::Float32)?;
                        added.push(ManifestEntry {
                            path: rel,
                            origin: Origin::Augmented,
                            ..entry.clone()
                        });
                    }
                    Err(e) => {
                        let msg = format!("skipped {} for `{}`: {e}", technique.as_str(), entry.path);
                        log::warn!("{msg}");
                        warnings.push(msg);
                    }
                }
            }
            Ok((added, warnings))
        })
        .collect::<Result<_>>()?;
    let mut out = manifest.clone();
    for (added, warnings) in per_entry {
        out.entries.extend(added);
        out.warnings.extend(warnings);
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(v: &[f64]) -> AudioClip {
        AudioClip::new(v.to_vec(), 8000).unwrap()
    }

    #[test]
    fn one_sample_rotation() {
        let out = time_shift(&clip(&[1.0, 2.0, 3.0, 4.0]), 0.25).unwrap();
        assert_eq!(out.samples(), &[4.0, 1.0, 2.0, 3.0]);
        let back = time_shift(&clip(&[1.0, 2.0, 3.0, 4.0]), -0.25).unwrap();
        assert_eq!(back.samples(), &[2.0, 3.0, 4.0, 1.0]);
    }

    #[test]
    fn zero_shift_is_identity() {
        let c = clip(&[0.1, -0.2, 0.3]);
        assert_eq!(time_shift(&c, 0.0).unwrap(), c);
    }

    #[test]
    fn noise_on_silence_fails() {
        assert!(matches!(
            add_noise(&clip(&[0.0; 16]), 20.0, 1),
            Err(Error::ZeroSignalPower)
        ));
        assert!(add_noise(&clip(&[0.5; 16]), f64::INFINITY, 1).is_err());
    }

    #[test]
    fn parameter_ranges() {
        let c = clip(&[0.1; 4096]);
        assert!(time_stretch(&c, 0.4).is_err());
        assert!(time_stretch(&c, 2.1).is_err());
        assert!(pitch_shift(&c, 12.5).is_err());
        assert!(time_shift(&c, 1.0).is_err());
        assert!(AugmentPlan {
            stretch_lo: 1.2,
            stretch_hi: 1.1,
            ..AugmentPlan::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn derivative_names() {
        assert_eq!(derivative_path("a/s1_2.wav", Technique::Pitch), "a/s1_2.aug-pitch.wav");
        assert_eq!(derivative_path("a.b/s1", Technique::Noise), "a.b/s1.aug-noise.wav");
    }

    #[test]
    fn phase_wrapping() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12 || (wrap_phase(3.0 * PI) + PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
    }
}
