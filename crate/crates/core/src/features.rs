//! Time-averaged mel-spectrogram (1x128) and MFCC (1x20) feature vectors.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::dsp::StftEngine;
use crate::error::{Error, Result};

pub const N_FFT: usize = 2048;
pub const HOP: usize = 512;
pub const MEL_BANDS: usize = 128;
/// Analysis bank feeding the cepstrum, distinct from the 128-band feature bank.
pub const MFCC_FILTERS: usize = 40;
pub const MFCC_KEPT: usize = 20;
/// Power floor applied before taking logarithms.
pub const POWER_FLOOR: f64 = 1e-10;

/// Linear-magnitude spectrogram stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    frames: Vec<Vec<f64>>,
    pub n_fft: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn magnitude(&self, bin: usize, frame: usize) -> f64 {
        self.frames[frame][bin]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.frames[frame]
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }
}

/// Hann-windowed, centered magnitude STFT.
pub fn stft(clip: &AudioClip, n_fft: usize, hop: usize) -> Result<Spectrogram> {
    let engine = StftEngine::new(n_fft, hop)?;
    let spec = engine.stft(clip.samples())?;
    Ok(Spectrogram {
        frames: spec
            .frames
            .iter()
            .map(|f| f.iter().map(|c| c.norm()).collect())
            .collect(),
        n_fft,
        hop,
        sample_rate: clip.sample_rate(),
    })
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Area-normalized triangular filters equally spaced on the mel scale
/// between 0 Hz and Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels x n_bins`.
    weights: Vec<Vec<f64>>,
    /// `n_mels + 2` filter edges and centers in Hz.
    breakpoints_hz: Vec<f64>,
    /// Nonzero bin range per filter, inclusive start, exclusive end.
    support: Vec<(usize, usize)>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Result<Self> {
        if n_mels == 0 {
            return Err(Error::Parameter("n_mels must be >= 1".into()));
        }
        if sample_rate == 0 || n_fft < 2 {
            return Err(Error::Parameter("sample rate and n_fft must be positive".into()));
        }
        let n_bins = n_fft / 2 + 1;
        let nyquist = f64::from(sample_rate) / 2.0;
        let top = hz_to_mel(nyquist);
        let breakpoints_hz: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz: Vec<f64> = (0..n_bins)
            .map(|k| k as f64 * f64::from(sample_rate) / n_fft as f64)
            .collect();
        let mut weights = Vec::with_capacity(n_mels);
        let mut support = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let (lo, mid, hi) = (breakpoints_hz[m], breakpoints_hz[m + 1], breakpoints_hz[m + 2]);
            let norm = 2.0 / (hi - lo);
            let row: Vec<f64> = bin_hz
                .iter()
                .map(|&f| {
                    let rising = (f - lo) / (mid - lo);
                    let falling = (hi - f) / (hi - mid);
                    rising.min(falling).max(0.0) * norm
                })
                .collect();
            let start = row.iter().position(|&w| w > 0.0);
            let end = row.iter().rposition(|&w| w > 0.0);
            match (start, end) {
                (Some(s), Some(e)) => support.push((s, e + 1)),
                _ => return Err(Error::DegenerateFilter { index: m }),
            }
            weights.push(row);
        }
        Ok(Self {
            weights,
            breakpoints_hz,
            support,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn breakpoints_hz(&self) -> &[f64] {
        &self.breakpoints_hz
    }

    /// Projects one power-spectrum frame onto the filters.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.support)
            .map(|(row, &(s, e))| row[s..e].iter().zip(&power[s..e]).map(|(w, p)| w * p).sum())
            .collect()
    }
}

fn power_to_db(p: f64) -> f64 {
    10.0 * p.max(POWER_FLOOR).log10()
}

/// Orthonormal DCT-II.
pub fn dct_ortho(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Inverse of [`dct_ortho`] (orthonormal DCT-III).
pub fn idct_ortho(c: &[f64]) -> Vec<f64> {
    let n = c.len() as f64;
    (0..c.len())
        .map(|i| {
            c.iter()
                .enumerate()
                .map(|(k, v)| {
                    let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                    scale * v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos()
                })
                .sum::<f64>()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "mel")]
    Mel128,
    #[serde(rename = "mfcc")]
    Mfcc20,
}

impl FeatureKind {
    pub fn dim(self) -> usize {
        match self {
            FeatureKind::Mel128 => MEL_BANDS,
            FeatureKind::Mfcc20 => MFCC_KEPT,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Mel128 => "mel",
            FeatureKind::Mfcc20 => "mfcc",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mel" | "mel128" => Ok(FeatureKind::Mel128),
            "mfcc" | "mfcc20" => Ok(FeatureKind::Mfcc20),
            other => Err(Error::Parameter(format!("unknown feature kind `{other}`"))),
        }
    }
}

/// Which 20 of the 39 cepstral values are kept.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MfccMode {
    /// DCT coefficients 20..=39 of the 40-band log-mel cepstrum (0th excluded).
    #[default]
    Tail,
    /// Last 20 of 13 static coefficients followed by their deltas and
    /// delta-deltas.
    Deltas,
}

impl FromStr for MfccMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tail" => Ok(MfccMode::Tail),
            "deltas" => Ok(MfccMode::Deltas),
            other => Err(Error::Parameter(format!("unknown MFCC mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(kind: FeatureKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != kind.dim() {
            return Err(Error::Shape {
                expected: kind.dim(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::FeatureTable("non-finite feature value".into()));
        }
        Ok(Self { kind, values })
    }
}

fn time_average(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut acc = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Regression deltas over `±width` frames with edge replication.
fn deltas(rows: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    let n = rows.len() as isize;
    let denom = 2.0 * (1..=width).map(|i| (i * i) as f64).sum::<f64>();
    let at = |t: isize| &rows[t.clamp(0, n - 1) as usize];
    (0..n)
        .map(|t| {
            (0..rows[0].len())
                .map(|c| {
                    (1..=width as isize)
                        .map(|d| d as f64 * (at(t + d)[c] - at(t - d)[c]))
                        .sum::<f64>()
                        / denom
                })
                .collect()
        })
        .collect()
}

/// Mel and MFCC extraction at fixed analysis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    pub n_fft: usize,
    pub hop: usize,
    pub mfcc_mode: MfccMode,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self {
            n_fft: N_FFT,
            hop: HOP,
            mfcc_mode: MfccMode::Tail,
        }
    }
}

impl FeatureExtractor {
    fn power_frames(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        let spec = stft(clip, self.n_fft, self.hop)?;
        Ok(spec
            .frames
            .into_iter()
            .map(|f| f.into_iter().map(|m| m * m).collect())
            .collect())
    }

    fn log_mel_frames(&self, clip: &AudioClip, n_mels: usize) -> Result<Vec<Vec<f64>>> {
        let bank = MelFilterbank::new(n_mels, self.n_fft, clip.sample_rate())?;
        Ok(self
            .power_frames(clip)?
            .iter()
            .map(|p| bank.apply(p).into_iter().map(power_to_db).collect())
            .collect())
    }

    /// Per-frame dB mel energies, `n_frames x 128`.
    pub fn mel_db_frames(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        self.log_mel_frames(clip, MEL_BANDS)
    }

    /// Per-frame 40-coefficient cepstra, coefficient 0 included.
    pub fn cepstra(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .log_mel_frames(clip, MFCC_FILTERS)?
            .iter()
            .map(|f| dct_ortho(f))
            .collect())
    }

    pub fn mel_feature(&self, clip: &AudioClip) -> Result<FeatureVector> {
        FeatureVector::new(FeatureKind::Mel128, time_average(&self.mel_db_frames(clip)?))
    }

    pub fn mfcc_feature(&self, clip: &AudioClip) -> Result<FeatureVector> {
        let cep = self.cepstra(clip)?;
        let rows: Vec<Vec<f64>> = match self.mfcc_mode {
            MfccMode::Tail => cep.iter().map(|c| c[MFCC_FILTERS - MFCC_KEPT..].to_vec()).collect(),
            MfccMode::Deltas => {
                let statics: Vec<Vec<f64>> = cep.iter().map(|c| c[..13].to_vec()).collect();
                let d1 = deltas(&statics, 4);
                let d2 = deltas(&d1, 4);
                (0..statics.len())
                    .map(|t| {
                        let full: Vec<f64> = statics[t].iter().chain(&d1[t]).chain(&d2[t]).copied().collect();
                        full[39 - MFCC_KEPT..].to_vec()
                    })
                    .collect()
            }
        };
        FeatureVector::new(FeatureKind::Mfcc20, time_average(&rows))
    }

    pub fn extract(&self, clip: &AudioClip, kind: FeatureKind) -> Result<FeatureVector> {
        match kind {
            FeatureKind::Mel128 => self.mel_feature(clip),
            FeatureKind::Mfcc20 => self.mfcc_feature(clip),
        }
    }
}

/// Default-setting 1x128 time-averaged dB mel spectrum.
pub fn mel_spectrogram_feature(clip: &AudioClip) -> Result<FeatureVector> {
    FeatureExtractor::default().mel_feature(clip)
}

/// Default-setting 1x20 time-averaged MFCC tail.
pub fn mfcc_feature(clip: &AudioClip) -> Result<FeatureVector> {
    FeatureExtractor::default().mfcc_feature(clip)
}

/// One row of an exported feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub group: String,
    pub label: String,
    pub vector: FeatureVector,
}

/// CSV with columns `group,label,kind,v0..v{n-1}`, values written with 17
/// significant digits so they parse back to the same `f64`.
pub fn write_feature_table(rows: &[FeatureRow]) -> Result<String> {
    let dim = rows.first().map_or(0, |r| r.vector.values.len());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["group".to_string(), "label".into(), "kind".into()];
    header.extend((0..dim).map(|i| format!("v{i}")));
    w.write_record(&header)
        .map_err(|e| Error::FeatureTable(e.to_string()))?;
    for r in rows {
        if r.vector.values.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                got: r.vector.values.len(),
            });
        }
        let mut rec = vec![r.group.clone(), r.label.clone(), r.vector.kind.as_str().to_string()];
        rec.extend(r.vector.values.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec).map_err(|e| Error::FeatureTable(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::FeatureTable(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::FeatureTable(e.to_string()))
}

pub fn parse_feature_table(text: &str) -> Result<Vec<FeatureRow>> {
    let bad = |m: String| Error::FeatureTable(m);
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "group" || &header[1] != "label" || &header[2] != "kind" {
        return Err(bad("header must start with `group,label,kind`".into()));
    }
    for (i, name) in header.iter().skip(3).enumerate() {
        if name != format!("v{i}") {
            return Err(bad(format!("column {} should be `v{i}`", i + 3)));
        }
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(bad(format!(
                "row has {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        let kind: FeatureKind = rec[2].parse()?;
        let values = rec
            .iter()
            .skip(3)
            .map(|v| v.parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureRow {
            group: rec[0].to_string(),
            label: rec[1].to_string(),
            vector: FeatureVector::new(kind, values)?,
        });
    }
    Ok(rows)
}
