//! Spectral-gating noise reduction followed by relative-level silence trimming.

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::dsp::StftEngine;
use crate::error::{Error, Result};

/// Stationary spectral gate settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub n_fft: usize,
    pub hop: usize,
    /// Fraction of lowest-energy frames used to estimate the noise profile.
    pub noise_quantile: f64,
    /// Threshold is `mean + threshold_sigma * std` of the noise magnitudes.
    pub threshold_sigma: f64,
    /// Moving-average extent of the mask along frequency (bins).
    pub smooth_bins: usize,
    /// Moving-average extent of the mask along time (frames).
    pub smooth_frames: usize,
    pub attenuation_floor_db: f64,
    /// Gating is skipped when the 90th-percentile frame energy is less than
    /// this many dB above the noise frames: such a clip has no noise floor
    /// that can be told apart from its content.
    pub min_contrast_db: f64,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 512,
            noise_quantile: 0.1,
            threshold_sigma: 1.5,
            smooth_bins: 3,
            smooth_frames: 3,
            attenuation_floor_db: -40.0,
            min_contrast_db: 10.0,
        }
    }
}

impl GateParams {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.n_fft {
            return Err(Error::Parameter(format!(
                "gate hop {} must be in 1..={}",
                self.hop, self.n_fft
            )));
        }
        if !(self.noise_quantile > 0.0 && self.noise_quantile < 1.0) {
            return Err(Error::Parameter(format!(
                "noise quantile {} is not in (0, 1)",
                self.noise_quantile
            )));
        }
        if !(self.threshold_sigma >= 0.0 && self.threshold_sigma.is_finite()) {
            return Err(Error::Parameter("gate sigma must be finite and >= 0".into()));
        }
        if self.smooth_bins == 0 || self.smooth_frames == 0 {
            return Err(Error::Parameter("mask smoothing extents must be >= 1".into()));
        }
        if !(self.attenuation_floor_db <= 0.0) || !self.min_contrast_db.is_finite() {
            return Err(Error::Parameter("attenuation floor must be <= 0 dB".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimParams {
    /// Frames more than this many dB below the loudest frame count as silence.
    pub top_db: f64,
    pub frame: usize,
    pub hop: usize,
}

impl Default for TrimParams {
    fn default() -> Self {
        Self {
            top_db: 30.0,
            frame: 2048,
            hop: 512,
        }
    }
}

impl TrimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_db > 0.0 && self.top_db.is_finite()) {
            return Err(Error::Parameter(format!("top_db = {} must be > 0", self.top_db)));
        }
        if self.frame == 0 || self.hop == 0 {
            return Err(Error::Parameter("trim frame and hop must be >= 1".into()));
        }
        Ok(())
    }
}

fn box_smooth(mask: &[Vec<f64>], bins: usize, frames: usize) -> Vec<Vec<f64>> {
    let n_frames = mask.len();
    let n_bins = mask[0].len();
    let (rb, rf) = (bins / 2, frames / 2);
    // Separable average: along frequency, then along time.
    let along_freq: Vec<Vec<f64>> = mask
        .iter()
        .map(|row| {
            (0..n_bins)
                .map(|k| {
                    let lo = k.saturating_sub(rb);
                    let hi = (k + bins - rb - 1).min(n_bins - 1);
                    row[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
                })
                .collect()
        })
        .collect();
    (0..n_frames)
        .map(|t| {
            let lo = t.saturating_sub(rf);
            let hi = (t + frames - rf - 1).min(n_frames - 1);
            let n = (hi - lo + 1) as f64;
            (0..n_bins)
                .map(|k| along_freq[lo..=hi].iter().map(|r| r[k]).sum::<f64>() / n)
                .collect()
        })
        .collect()
}

/// Stationary spectral gate.
///
/// Per-bin noise statistics (of dB magnitudes) come from the quietest frames;
/// bins above `mean + sigma * std` pass, the rest are attenuated to the floor. The binary
/// mask is box-smoothed before it is applied, and the clip is resynthesized at
/// its original length.
pub fn spectral_gate(clip: &AudioClip, params: &GateParams) -> Result<AudioClip> {
    params.validate()?;
    if clip.len() < params.n_fft {
        return Err(Error::TooShort {
            len: clip.len(),
            needed: params.n_fft,
        });
    }
    if clip.samples().iter().all(|&s| s == 0.0) {
        return Ok(clip.clone());
    }
    let engine = StftEngine::new(params.n_fft, params.hop)?;
    let mut spec = engine.stft(clip.samples())?;
    let mags: Vec<Vec<f64>> = spec
        .frames
        .iter()
        .map(|f| f.iter().map(|c| c.norm()).collect())
        .collect();
    let n_frames = mags.len();
    let n_bins = spec.n_bins();

    let energies: Vec<f64> = mags.iter().map(|f| f.iter().map(|m| m * m).sum()).collect();
    let mut order: Vec<usize> = (0..n_frames).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]).then(a.cmp(&b)));
    let n_noise = ((params.noise_quantile * n_frames as f64).ceil() as usize).clamp(1, n_frames);
    let noise = &order[..n_noise];

    let noise_energy = noise.iter().map(|&t| energies[t]).sum::<f64>() / n_noise as f64;
    let loud_energy = energies[order[((n_frames - 1) as f64 * 0.9).floor() as usize]];
    if noise_energy > 0.0 && 10.0 * (loud_energy / noise_energy).log10() < params.min_contrast_db {
        return Ok(clip.clone());
    }

    // Noise statistics are taken on dB magnitudes.
    let db = |m: f64| 20.0 * m.max(1e-12).log10();
    let threshold: Vec<f64> = (0..n_bins)
        .map(|k| {
            let mean = noise.iter().map(|&t| db(mags[t][k])).sum::<f64>() / n_noise as f64;
            let var = noise.iter().map(|&t| (db(mags[t][k]) - mean).powi(2)).sum::<f64>() / n_noise as f64;
            mean + params.threshold_sigma * var.sqrt()
        })
        .collect();
    let mask: Vec<Vec<f64>> = mags
        .iter()
        .map(|f| {
            f.iter()
                .zip(&threshold)
                .map(|(&m, th)| if db(m) > *th { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let smoothed = box_smooth(&mask, params.smooth_bins, params.smooth_frames);
    let floor = 10f64.powf(params.attenuation_floor_db / 20.0);
    for (frame, gains) in spec.frames.iter_mut().zip(&smoothed) {
        for (c, g) in frame.iter_mut().zip(gains) {
            *c *= floor + (1.0 - floor) * g;
        }
    }
    clip.with_samples(engine.istft(&spec, clip.len()))
}

/// Mean square of each centered, zero-padded frame.
fn frame_mean_squares(samples: &[f64], frame: usize, hop: usize) -> Vec<f64> {
    let len = samples.len();
    let half = frame / 2;
    (0..1 + len / hop)
        .map(|t| {
            let center = t * hop;
            let lo = center.saturating_sub(half);
            let hi = (center + frame - half).min(len);
            if lo >= hi {
                0.0
            } else {
                samples[lo..hi].iter().map(|s| s * s).sum::<f64>() / frame as f64
            }
        })
        .collect()
}

/// Keeps the span between the first and last frames whose level exceeds
/// `loudest frame - top_db` (strictly). Boundaries are then tightened to the
/// first and last samples within those frames whose magnitude exceeds the
/// threshold level.
pub fn trim_silence(clip: &AudioClip, params: &TrimParams) -> Result<AudioClip> {
    params.validate()?;
    let x = clip.samples();
    let ms = frame_mean_squares(x, params.frame, params.hop);
    let reference = ms.iter().copied().fold(0.0, f64::max);
    if reference <= 0.0 {
        return Err(Error::AllSilent);
    }
    let threshold = reference * 10f64.powf(-params.top_db / 10.0);
    let first = ms.iter().position(|&m| m > threshold).ok_or(Error::AllSilent)?;
    let last = ms.iter().rposition(|&m| m > threshold).ok_or(Error::AllSilent)?;

    let half = params.frame / 2;
    let amp = threshold.sqrt();
    let win_lo = (first * params.hop).saturating_sub(half);
    let win_hi = (last * params.hop + params.frame - half).min(x.len());
    let start = (win_lo..win_hi).find(|&i| x[i].abs() > amp).unwrap_or(win_lo);
    let end = (start..win_hi)
        .rev()
        .find(|&i| x[i].abs() > amp)
        .map_or(win_hi, |i| i + 1);
    clip.with_samples(x[start..end].to_vec())
}

/// Gate then trim, each with its own settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub gate: GateParams,
    pub trim: TrimParams,
}

impl Preprocessor {
    pub fn apply(&self, clip: &AudioClip) -> Result<AudioClip> {
        trim_silence(&spectral_gate(clip, &self.gate)?, &self.trim)
    }
}

/// Default-parameter noise reduction followed by silence removal.
pub fn preprocess_pipeline(clip: &AudioClip) -> Result<AudioClip> {
    Preprocessor::default().apply(clip)
}
