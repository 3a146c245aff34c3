//! Framing, windowed FFTs, overlap-add resynthesis and band-limited resampling.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic Hann window (the DFT-even variant), which overlap-adds to a
/// constant at 50% and 75% overlap.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Complex short-time spectrum, `frames[t][k]` for frame `t` and bin `k`.
#[derive(Debug, Clone)]
pub struct ComplexStft {
    pub n_fft: usize,
    pub hop: usize,
    pub frames: Vec<Vec<Complex64>>,
}

impl ComplexStft {
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }
}

/// Forward and inverse FFT plans plus the analysis window for one frame size.
pub struct StftEngine {
    n_fft: usize,
    hop: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for StftEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftEngine")
            .field("n_fft", &self.n_fft)
            .field("hop", &self.hop)
            .finish()
    }
}

impl StftEngine {
    pub fn new(n_fft: usize, hop: usize) -> Result<Self> {
        if n_fft < 2 || !n_fft.is_multiple_of(2) {
            return Err(Error::Parameter(format!("n_fft = {n_fft} must be even and >= 2")));
        }
        if hop == 0 || hop > n_fft {
            return Err(Error::Parameter(format!("hop = {hop} must be in 1..={n_fft}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_fft,
            hop,
            window: hann(n_fft),
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        })
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Number of centered frames for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.n_fft {
            1
        } else {
            1 + len / self.hop
        }
    }

    /// Hann-windowed one-sided spectrum of a single `n_fft`-sample frame.
    pub fn spectrum(&self, frame: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(frame.len(), self.n_fft);
        let mut buf: Vec<Complex64> = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex64::new(x * w, 0.0))
            .collect();
        self.forward.process(&mut buf);
        buf.truncate(self.n_fft / 2 + 1);
        buf
    }

    /// Centered STFT with reflection padding of `n_fft / 2` on both sides.
    ///
    /// Signals shorter than `n_fft` yield a single frame holding the signal
    /// zero-padded about the frame center.
    pub fn stft(&self, samples: &[f64]) -> Result<ComplexStft> {
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        let n = self.n_fft;
        let frames = if samples.len() < n {
            let mut frame = vec![0.0; n];
            let offset = (n - samples.len()) / 2;
            frame[offset..offset + samples.len()].copy_from_slice(samples);
            vec![self.spectrum(&frame)]
        } else {
            let padded = reflect_pad(samples, n / 2);
            (0..self.frame_count(samples.len()))
                .map(|t| self.spectrum(&padded[t * self.hop..t * self.hop + n]))
                .collect()
        };
        Ok(ComplexStft {
            n_fft: n,
            hop: self.hop,
            frames,
        })
    }

    /// Inverse of [`StftEngine::stft`] by weighted overlap-add, trimmed or
    /// zero-extended to `length` samples.
    pub fn istft(&self, spec: &ComplexStft, length: usize) -> Vec<f64> {
        let n = self.n_fft;
        let n_frames = spec.frames.len();
        let total = n + self.hop * n_frames.saturating_sub(1);
        let mut acc = vec![0.0; total];
        let mut norm = vec![0.0; total];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (t, frame) in spec.frames.iter().enumerate() {
            buf[..=n / 2].copy_from_slice(frame);
            for k in 1..n / 2 {
                buf[n - k] = frame[k].conj();
            }
            // A real signal has purely real DC and Nyquist terms.
            buf[0].im = 0.0;
            buf[n / 2].im = 0.0;
            self.inverse.process(&mut buf);
            let start = t * self.hop;
            for i in 0..n {
                let w = self.window[i];
                acc[start + i] += buf[i].re / n as f64 * w;
                norm[start + i] += w * w;
            }
        }
        for (a, w) in acc.iter_mut().zip(&norm) {
            if *w > 1e-10 {
                *a /= w;
            }
        }
        let mut out: Vec<f64> = acc.into_iter().skip(n / 2).take(length).collect();
        out.resize(length, 0.0);
        out
    }
}

/// Mirror padding that excludes the edge sample (`[3,2,|1,2,3|,2,1]`).
///
/// Falls back to zero padding where the signal is too short to mirror.
pub fn reflect_pad(samples: &[f64], pad: usize) -> Vec<f64> {
    let len = samples.len();
    let mut out = Vec::with_capacity(len + 2 * pad);
    for i in (1..=pad).rev() {
        out.push(if i < len { samples[i] } else { 0.0 });
    }
    out.extend_from_slice(samples);
    for i in 1..=pad {
        out.push(if i < len { samples[len - 1 - i] } else { 0.0 });
    }
    out
}

/// Zero crossings of the interpolation kernel on each side.
const RESAMPLE_ZEROS: f64 = 16.0;

/// Windowed-sinc resampling by `ratio = output_rate / input_rate`, producing
/// exactly `out_len` samples. Downsampling lowers the kernel cutoff to avoid
/// aliasing.
pub fn resample(samples: &[f64], ratio: f64, out_len: usize) -> Vec<f64> {
    let cutoff = ratio.min(1.0);
    let half_width = RESAMPLE_ZEROS / cutoff;
    let len = samples.len() as isize;
    // Successive taps step the sinc and window phases by constant angles, so
    // both are advanced by rotation instead of fresh trig calls.
    let (sin_step, cos_step) = (PI * cutoff).sin_cos();
    let (wsin_step, wcos_step) = (PI / half_width).sin_cos();
    (0..out_len)
        .map(|j| {
            let t = j as f64 / ratio;
            let lo = ((t - half_width).ceil() as isize).max(0);
            let hi = ((t + half_width).floor() as isize).min(len - 1);
            if lo > hi {
                return 0.0;
            }
            let d0 = t - lo as f64;
            let (mut s, mut c) = (PI * cutoff * d0).sin_cos();
            let (mut ws, mut wc) = (PI * d0 / half_width).sin_cos();
            let mut acc = 0.0;
            for i in lo..=hi {
                let d = t - i as f64;
                let x = cutoff * d;
                let k = if x.abs() < 1e-12 { 1.0 } else { s / (PI * x) };
                acc += samples[i as usize] * cutoff * k * (0.5 + 0.5 * wc);
                // Angle decreases by one step per tap.
                (s, c) = (s * cos_step - c * sin_step, c * cos_step + s * sin_step);
                (ws, wc) = (ws * wcos_step - wc * wsin_step, wc * wcos_step + ws * wsin_step);
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_resample(samples: &[f64], ratio: f64, out_len: usize) -> Vec<f64> {
        let cutoff = ratio.min(1.0);
        let hw = RESAMPLE_ZEROS / cutoff;
        (0..out_len)
            .map(|j| {
                let t = j as f64 / ratio;
                (0..samples.len())
                    .map(|i| t - i as f64)
                    .zip(samples)
                    .filter(|(d, _)| d.abs() <= hw)
                    .map(|(d, v)| {
                        let x = cutoff * d;
                        let sinc = if x.abs() < 1e-12 {
                            1.0
                        } else {
                            (PI * x).sin() / (PI * x)
                        };
                        v * cutoff * sinc * (0.5 + 0.5 * (PI * d / hw).cos())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn recurrence_matches_direct_kernel() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        for (ratio, n) in [(0.8, 240), (1.25, 375), (1.0, 300)] {
            let fast = resample(&x, ratio, n);
            let slow = direct_resample(&x, ratio, n);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10, "{ratio}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn reflect_padding_matches_numpy() {
        assert_eq!(
            reflect_pad(&[1.0, 2.0, 3.0], 2),
            vec![3.0, 2.0, 1.0, 2.0, 3.0, 2.0, 1.0]
        );
    }

    #[test]
    fn hann_is_periodic() {
        let w = hann(8);
        assert!(w[0].abs() < 1e-15);
        assert!((w[4] - 1.0).abs() < 1e-15);
        assert!((w[1] - w[7]).abs() < 1e-15);
    }

    #[test]
    fn frame_count_law() {
        let e = StftEngine::new(2048, 512).unwrap();
        assert_eq!(e.frame_count(24255), 48);
        assert_eq!(e.frame_count(100), 1);
    }

    #[test]
    fn istft_inverts_stft() {
        let e = StftEngine::new(256, 64).unwrap();
        let x: Vec<f64> = (0..2000).map(|i| ((i * 37 % 101) as f64 / 50.0 - 1.0) * 0.7).collect();
        let spec = e.stft(&x).unwrap();
        let y = e.istft(&spec, x.len());
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "max error {err}");
    }

    #[test]
    fn resample_identity_ratio() {
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.05).sin()).collect();
        let y = resample(&x, 1.0, x.len());
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn engine_rejects_bad_geometry() {
        assert!(StftEngine::new(2047, 512).is_err());
        assert!(StftEngine::new(2048, 0).is_err());
        assert!(StftEngine::new(2048, 4096).is_err());
    }
}
