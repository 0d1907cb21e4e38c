//! Overlapped segmentation, Hamming windowing and periodogram estimation.
//!
//! The periodogram follows
//!
//! ```text
//! S[f] = (1/N) · | Σ_{n=0}^{N-1} x[n] · w[n] · e^{-j2πfn/N} |²
//! ```
//!
//! on the DFT bin grid, one-sided, with no ×2 folding of the negative
//! frequencies and no window power compensation.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest segment accepted for spectral analysis.
pub const MIN_SEGMENT_LEN: usize = 8;

/// A contiguous slice of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f64>,
    pub start_time_s: f64,
    pub sampling_rate_hz: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn end_time_s(&self) -> f64 {
        self.start_time_s + self.samples.len() as f64 / self.sampling_rate_hz
    }
}

/// One-sided power spectrum on a DFT grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// `floor(n_fft / 2) + 1` bins starting at DC.
    pub power: Vec<f64>,
    pub bin_resolution_hz: f64,
    pub n_fft: usize,
    /// Segment length `N` used for normalization.
    pub segment_len: usize,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_resolution_hz
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequency(self.power.len() - 1)
    }

    /// `(frequency, power)` pairs.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.power
            .iter()
            .enumerate()
            .map(|(i, &p)| (self.frequency(i), p))
    }
}

/// Segment length and overlap, in the units a user thinks in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub length_s: f64,
    /// Fraction of a segment shared with its successor, in `[0, 1)`.
    pub overlap: f64,
    /// FFT length multiplier (1 = no zero padding).
    pub zero_pad: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            length_s: 2.0,
            overlap: 0.5,
            zero_pad: 1,
        }
    }
}

impl SegmentConfig {
    /// `(segment length, hop)` in samples.
    pub fn samples(&self, fs: f64) -> Result<(usize, usize)> {
        if !(self.length_s.is_finite() && self.length_s > 0.0) {
            return Err(Error::InvalidSegmentation(format!(
                "length {} s",
                self.length_s
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidSegmentation(format!(
                "overlap {} outside [0, 1)",
                self.overlap
            )));
        }
        if self.zero_pad == 0 {
            return Err(Error::InvalidSegmentation(
                "zero_pad must be at least 1".into(),
            ));
        }
        let len = (self.length_s * fs).round() as usize;
        if len < MIN_SEGMENT_LEN {
            return Err(Error::InvalidSegmentation(format!(
                "{len} samples per segment, need at least {MIN_SEGMENT_LEN}"
            )));
        }
        let hop = ((len as f64 * (1.0 - self.overlap)).round() as usize).max(1);
        Ok((len, hop))
    }
}

/// Start indices of every full segment; a trailing partial segment is dropped.
pub fn segment_starts(n_samples: usize, len: usize, hop: usize) -> Result<Vec<usize>> {
    if n_samples < len {
        return Err(Error::SignalTooShort {
            samples: n_samples,
            segment: len,
        });
    }
    Ok((0..=(n_samples - len)).step_by(hop).collect())
}

/// Cuts `signal` into overlapping segments ordered by start time.
pub fn segment_stream(
    signal: &[f64],
    sampling_rate_hz: f64,
    seg_len_s: f64,
    overlap_fraction: f64,
) -> Result<Vec<Segment>> {
    let cfg = SegmentConfig {
        length_s: seg_len_s,
        overlap: overlap_fraction,
        zero_pad: 1,
    };
    let (len, hop) = cfg.samples(sampling_rate_hz)?;
    Ok(segment_starts(signal.len(), len, hop)?
        .into_iter()
        .map(|s| Segment {
            samples: signal[s..s + len].to_vec(),
            start_time_s: s as f64 / sampling_rate_hz,
            sampling_rate_hz,
        })
        .collect())
}

/// Symmetric Hamming window, `w[n] = 0.54 - 0.46 cos(2πn/(N-1))`.
pub fn hamming_window(n: usize) -> Vec<f64> {
    assert!(n >= 2, "Hamming window needs at least 2 points");
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / denom).cos())
        .collect()
}

/// Two-sided periodogram `|DFT(x)|² / norm_len` of already windowed data.
pub fn periodogram(windowed: &[Complex64], norm_len: usize) -> Vec<f64> {
    let mut buf = windowed.to_vec();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf.iter().map(|c| c.norm_sqr() / norm_len as f64).collect()
}

/// Reusable periodogram for a fixed segment length.
#[derive(Clone)]
pub struct PsdEstimator {
    window: Vec<f64>,
    n_fft: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PsdEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PsdEstimator")
            .field("segment_len", &self.window.len())
            .field("n_fft", &self.n_fft)
            .finish()
    }
}

impl PsdEstimator {
    pub fn new(segment_len: usize, zero_pad: usize) -> Result<Self> {
        if segment_len < MIN_SEGMENT_LEN {
            return Err(Error::InvalidSegmentation(format!(
                "{segment_len} samples per segment, need at least {MIN_SEGMENT_LEN}"
            )));
        }
        let n_fft = segment_len * zero_pad.max(1);
        Ok(PsdEstimator {
            window: hamming_window(segment_len),
            n_fft,
            fft: FftPlanner::new().plan_fft_forward(n_fft),
        })
    }

    pub fn segment_len(&self) -> usize {
        self.window.len()
    }

    pub fn estimate(&self, samples: &[f64], sampling_rate_hz: f64) -> Result<Spectrum> {
        let n = self.window.len();
        if samples.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: samples.len(),
            });
        }
        let mut buf: Vec<Complex64> = samples
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex64::new(x * w, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(self.n_fft)
            .collect();
        self.fft.process(&mut buf);
        let bins = self.n_fft / 2 + 1;
        Ok(Spectrum {
            power: buf[..bins]
                .iter()
                .map(|c| c.norm_sqr() / n as f64)
                .collect(),
            bin_resolution_hz: sampling_rate_hz / self.n_fft as f64,
            n_fft: self.n_fft,
            segment_len: n,
        })
    }
}

/// Hamming-windowed periodogram of one segment on its natural DFT grid.
pub fn psd(seg: &Segment) -> Result<Spectrum> {
    PsdEstimator::new(seg.len(), 1)?.estimate(&seg.samples, seg.sampling_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_counts_and_starts() {
        let fs = 128.0;
        let sig = vec![0.0; 10 * 128];
        let segs = segment_stream(&sig, fs, 2.0, 0.5).unwrap();
        assert_eq!(segs.len(), 9);
        let starts: Vec<f64> = segs.iter().map(|s| s.start_time_s).collect();
        assert_eq!(starts, (0..9).map(f64::from).collect::<Vec<_>>());
        assert_eq!(segs[8].end_time_s(), 10.0);

        for overlap in [0.0, 0.25, 0.9] {
            assert_eq!(
                segment_stream(&sig[..256], fs, 2.0, overlap).unwrap().len(),
                1
            );
        }
        assert!(matches!(
            segment_stream(&sig[..128], fs, 2.0, 0.5),
            Err(Error::SignalTooShort {
                samples: 128,
                segment: 256
            })
        ));
    }

    #[test]
    fn bad_overlap_rejected() {
        let sig = vec![0.0; 1000];
        assert!(segment_stream(&sig, 100.0, 2.0, 1.0).is_err());
        assert!(segment_stream(&sig, 100.0, 2.0, -0.1).is_err());
        assert!(segment_stream(&sig, 100.0, 0.05, 0.0).is_err());
    }

    #[test]
    fn hamming_values() {
        let w = hamming_window(65);
        assert!((w[0] - 0.08).abs() < 1e-15);
        assert!((w[32] - 1.0).abs() < 1e-15);
        for n in 0..65 {
            assert!((w[n] - w[64 - n]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_segment_gives_zero_spectrum() {
        let seg = Segment {
            samples: vec![0.0; 64],
            start_time_s: 0.0,
            sampling_rate_hz: 64.0,
        };
        let s = psd(&seg).unwrap();
        assert_eq!(s.power.len(), 33);
        assert!(s.power.iter().all(|&p| p == 0.0));
        assert_eq!(s.bin_resolution_hz, 1.0);
    }

    #[test]
    fn complex_exponential_lands_in_one_bin() {
        let n = 64;
        let k = 5;
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * (k * i) as f64 / n as f64))
            .collect();
        let p = periodogram(&x, n);
        for (bin, v) in p.iter().enumerate() {
            let expected = if bin == k { n as f64 } else { 0.0 };
            assert!((v - expected).abs() < 1e-9, "bin {bin}: {v}");
        }
    }

    #[test]
    fn rectangular_window_sinusoid_peak() {
        // windowless cross-check: N·A²/4 at a bin-centred real sinusoid
        let n = 128;
        let a = 3.0;
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(a * (2.0 * PI * 10.0 * i as f64 / n as f64).cos(), 0.0))
            .collect();
        let p = periodogram(&x, n);
        assert!((p[10] - n as f64 * a * a / 4.0).abs() < 1e-9);
    }

    #[test]
    fn zero_padding_refines_grid() {
        let est = PsdEstimator::new(64, 4).unwrap();
        let s = est.estimate(&vec![1.0; 64], 64.0).unwrap();
        assert_eq!(s.n_fft, 256);
        assert_eq!(s.power.len(), 129);
        assert_eq!(s.bin_resolution_hz, 0.25);
        assert!(est.estimate(&[1.0; 10], 64.0).is_err());
    }
}
