//! Deterministic synthetic corpus: tone-plus-noise "phonemes" standing in for
//! recorded speech. Not human speech.
//!
//! Class `c` pairs a harmonic tone (fundamental from `F0_HZ[c % 5]`) with a
//! band of noise-like partials (centre from `BAND_HZ[c / 5]`). Adjacent values
//! in each table differ by a factor of at least 1.44, well clear of the 12 %
//! that a two-semitone pitch shift moves them. Every take jitters pitch,
//! duration, level and leading/trailing silence.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::audio::{write_wav, AudioClip, PcmFormat};
use crate::corpus::{CorpusManifest, ManifestEntry, Origin, MAX_CLASSES};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

pub const SAMPLE_RATE: u32 = 22050;
pub const F0_HZ: [f64; 5] = [110.0, 158.0, 228.0, 328.0, 473.0];
pub const BAND_HZ: [f64; 6] = [600.0, 1080.0, 1950.0, 3500.0, 6300.0, 9000.0];
pub const SPEAKERS: usize = 11;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub classes: usize,
    pub takes: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            classes: MAX_CLASSES,
            takes: 10,
            seed: 42,
        }
    }
}

pub fn class_label(c: usize) -> String {
    format!("class_{c:02}")
}

pub fn take_stem(take: usize) -> String {
    format!("spk{:02}_take{take:02}", take % SPEAKERS)
}

fn raised_cosine_envelope(n: usize, attack: usize, release: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i < attack {
                0.5 - 0.5 * (PI * i as f64 / attack as f64).cos()
            } else if i >= n - release {
                0.5 - 0.5 * (PI * (n - i) as f64 / release as f64).cos()
            } else {
                1.0
            }
        })
        .collect()
}

/// One take of class `class`. `take` selects the jitter draw.
pub fn synth_take(class: usize, take: usize, seed: u64) -> Result<AudioClip> {
    if class >= F0_HZ.len() * BAND_HZ.len() {
        return Err(Error::Parameter(format!("class index {class} has no signature")));
    }
    let mut r = rng(derive_seed(
        seed,
        &format!("{}/{}", class_label(class), take_stem(take)),
    ));
    let sr = SAMPLE_RATE as f64;
    let speaker = (take % SPEAKERS) as f64;
    let f0 = F0_HZ[class % F0_HZ.len()] * (1.0 + 0.006 * (speaker - 5.0)) * r.gen_range(0.98..1.02);
    let band = BAND_HZ[class / F0_HZ.len()] * r.gen_range(0.97..1.03);
    let voiced = (sr * r.gen_range(0.85..1.15)) as usize;
    let lead = (sr * r.gen_range(0.1..0.25)) as usize;
    let tail = (sr * r.gen_range(0.1..0.25)) as usize;
    let level = 0.5 * 10f64.powf(r.gen_range(-2.0..2.0) / 20.0);

    let mut partials: Vec<(f64, f64, f64)> = Vec::new();
    let mut k = 1.0;
    while k * f0 < 5000.0 {
        partials.push((k * f0, 1.0 / k, r.gen_range(0.0..2.0 * PI)));
        k += 1.0;
    }
    for _ in 0..40 {
        let f = band * r.gen_range(0.85..1.18);
        partials.push((f, 0.12, r.gen_range(0.0..2.0 * PI)));
    }
    let env = raised_cosine_envelope(voiced, (0.02 * sr) as usize, (0.05 * sr) as usize);
    // Each partial is a unit phasor rotated by a fixed step per sample.
    let mut voice = vec![0.0; voiced];
    for &(f, a, p) in &partials {
        let (ds, dc) = (2.0 * PI * f / sr).sin_cos();
        let (mut s, mut c) = p.sin_cos();
        for (v, e) in voice.iter_mut().zip(&env) {
            *v += a * e * s;
            (s, c) = (s * dc + c * ds, c * dc - s * ds);
        }
    }
    let peak = voice.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    voice.iter_mut().for_each(|v| *v *= level / peak);

    let floor = level * 10f64.powf(-50.0 / 20.0);
    let mut samples: Vec<f64> = (0..lead + voiced + tail)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            floor * z
        })
        .collect();
    for (s, v) in samples[lead..].iter_mut().zip(&voice) {
        *s += v;
    }
    AudioClip::new(samples, SAMPLE_RATE)
}

/// Writes `<out>/<class>/<stem>.wav` for every class and take plus
/// `<out>/manifest.csv`, and returns the manifest.
pub fn synth_corpus(out: impl AsRef<Path>, params: &SynthParams) -> Result<CorpusManifest> {
    let out = out.as_ref();
    if params.classes == 0 || params.classes > MAX_CLASSES || params.takes == 0 {
        return Err(Error::Parameter(format!(
            "need 1..={MAX_CLASSES} classes and at least one take"
        )));
    }
    let mut entries = Vec::new();
    for c in 0..params.classes {
        let label = class_label(c);
        let dir = out.join(&label);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for t in 0..params.takes {
            let stem = take_stem(t);
            let clip = synth_take(c, t, params.seed)?;
            write_wav(dir.join(format!("{stem}.wav")), &clip, PcmFormat::Int16)?;
            entries.push(ManifestEntry {
                path: format!("{label}/{stem}.wav"),
                label: label.clone(),
                speaker: format!("spk{:02}", t % SPEAKERS),
                group: format!("{label}/{stem}"),
                origin: Origin::Original,
            });
        }
    }
    let manifest = CorpusManifest::new(out, entries)?;
    manifest.write(out.join("manifest.csv"))?;
    Ok(manifest)
}
