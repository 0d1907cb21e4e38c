//! Deterministic synthetic SSVEP trials.
//!
//! Each channel is independent `1/f^α` Gaussian background plus a shared
//! evoked response: a sinusoid at the stimulus frequency whose amplitude
//! follows a [`ResponseProfile`], and a weaker one at twice that frequency.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with the trial seed,
//! so trials reproduce bit-for-bit across platforms. Draw order per trial:
//! fundamental phase, harmonic phase, then `n` standard normals per channel.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Recording, TrialEntry};
use crate::error::{Error, Result};

/// Relative evoked amplitude versus stimulus frequency, linearly
/// interpolated between control points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseProfile {
    /// `(frequency_hz, relative_amplitude)`, frequencies strictly increasing.
    pub control_points: Vec<(f64, f64)>,
}

impl Default for ResponseProfile {
    /// A monotone decay from 1.0 below 8 Hz down to 0.2 at 35 Hz.
    fn default() -> Self {
        ResponseProfile {
            control_points: vec![
                (6.0, 1.0),
                (8.0, 1.0),
                (10.0, 0.9),
                (14.0, 0.7),
                (20.0, 0.5),
                (28.0, 0.3),
                (35.0, 0.2),
            ],
        }
    }
}

impl ResponseProfile {
    pub fn new(control_points: Vec<(f64, f64)>) -> Result<Self> {
        let p = ResponseProfile { control_points };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let pts = &self.control_points;
        if pts.is_empty() {
            return Err(Error::InvalidProfile("no control points".into()));
        }
        if pts
            .iter()
            .any(|&(f, a)| !(f.is_finite() && a.is_finite() && a > 0.0))
        {
            return Err(Error::InvalidProfile(
                "amplitudes must be positive and finite".into(),
            ));
        }
        if pts.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidProfile(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn range(&self) -> (f64, f64) {
        let pts = &self.control_points;
        (pts[0].0, pts[pts.len() - 1].0)
    }

    /// Interpolated amplitude at `f`; errors outside the control-point range.
    pub fn amplitude(&self, f: f64) -> Result<f64> {
        let pts = &self.control_points;
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&f) {
            return Err(Error::OutOfProfileRange(f));
        }
        let i = pts.partition_point(|&(x, _)| x < f);
        if i < pts.len() && pts[i].0 == f {
            return Ok(pts[i].1);
        }
        let (f0, a0) = pts[i - 1];
        let (f1, a1) = pts[i];
        Ok(a0 + (a1 - a0) * (f - f0) / (f1 - f0))
    }
}

/// Everything needed to generate one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub stimulus_freq_hz: f64,
    pub duration_s: f64,
    pub sampling_rate_hz: f64,
    pub n_channels: usize,
    pub profile: ResponseProfile,
    /// Second-harmonic amplitude relative to the fundamental, in `(0, 1]`.
    pub harmonic_ratio: f64,
    /// Background spectral exponent: power ∝ `1/f^noise_exponent`.
    pub noise_exponent: f64,
    /// Evoked amplitude multiplier; the background has unit variance.
    pub snr_scale: f64,
    pub rng_seed: u64,
    pub subject_id: String,
    pub trial_id: String,
}

impl SynthSpec {
    pub fn new(stimulus_freq_hz: f64, rng_seed: u64) -> Self {
        SynthSpec {
            stimulus_freq_hz,
            duration_s: 10.0,
            sampling_rate_hz: 256.0,
            n_channels: 1,
            profile: ResponseProfile::default(),
            harmonic_ratio: 0.5,
            noise_exponent: 1.0,
            snr_scale: 1.0,
            rng_seed,
            subject_id: "synthetic".into(),
            trial_id: format!("seed{rng_seed}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sampling_rate_hz / 2.0;
        if !(self.sampling_rate_hz > 0.0 && self.duration_s > 0.0 && self.n_channels > 0) {
            return Err(Error::NonPositiveParameter(
                "sampling rate, duration and channel count must be positive".into(),
            ));
        }
        if !(self.stimulus_freq_hz.is_finite() && self.stimulus_freq_hz > 0.0) {
            return Err(Error::NonPositiveParameter(format!(
                "stimulus frequency {}",
                self.stimulus_freq_hz
            )));
        }
        if 2.0 * self.stimulus_freq_hz >= nyquist {
            return Err(Error::NyquistViolation {
                what: "second harmonic".into(),
                freq_hz: 2.0 * self.stimulus_freq_hz,
                nyquist_hz: nyquist,
            });
        }
        if !(self.harmonic_ratio > 0.0 && self.harmonic_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "harmonic_ratio {} outside (0, 1]",
                self.harmonic_ratio
            )));
        }
        if !(self.snr_scale >= 0.0 && self.noise_exponent.is_finite()) {
            return Err(Error::InvalidConfig("snr_scale must be >= 0".into()));
        }
        self.profile.validate()
    }
}

/// Conventional occipital-first electrode names for `n` synthetic channels.
pub fn default_channel_names(n: usize) -> Vec<String> {
    const NAMES: [&str; 6] = ["Oz", "O1", "O2", "POz", "PO3", "PO4"];
    (0..n)
        .map(|i| {
            NAMES
                .get(i)
                .map_or_else(|| format!("Ch{}", i + 1), |s| s.to_string())
        })
        .collect()
}

/// `n` samples of unit-variance Gaussian noise with power ∝ `1/f^exponent`.
///
/// White noise is shaped in the frequency domain by `f^(-exponent/2)` (DC
/// removed) and scaled by the RMS of the shaping gains so the expected
/// variance is one.
pub fn colored_noise(rng: &mut impl Rng, n: usize, fs: f64, exponent: f64) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let gains: Vec<f64> = (0..n)
        .map(|k| {
            let f = k.min(n - k) as f64 * fs / n as f64;
            if k == 0 {
                0.0
            } else {
                f.powf(-exponent / 2.0)
            }
        })
        .collect();
    let rms = (gains.iter().map(|g| g * g).sum::<f64>() / n as f64).sqrt();
    for (c, g) in buf.iter_mut().zip(&gains) {
        *c *= *g;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / (n as f64 * rms);
    buf.iter().map(|c| c.re * scale).collect()
}

/// Generates one trial. Identical specs give bit-identical recordings.
pub fn generate_trial(spec: &SynthSpec) -> Result<Recording> {
    spec.validate()?;
    let fs = spec.sampling_rate_hz;
    let f0 = spec.stimulus_freq_hz;
    let n = (spec.duration_s * fs).round() as usize;
    let amp = spec.profile.amplitude(f0)? * spec.snr_scale;
    let amp2 = amp * spec.harmonic_ratio;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let phase1 = rng.random::<f64>() * 2.0 * PI;
    let phase2 = rng.random::<f64>() * 2.0 * PI;
    let evoked: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            amp * (2.0 * PI * f0 * t + phase1).sin()
                + amp2 * (2.0 * PI * 2.0 * f0 * t + phase2).sin()
        })
        .collect();
    let samples = (0..spec.n_channels)
        .map(|_| {
            let mut ch = colored_noise(&mut rng, n, fs, spec.noise_exponent);
            for (v, e) in ch.iter_mut().zip(&evoked) {
                *v += e;
            }
            ch
        })
        .collect();

    Ok(Recording {
        samples,
        sampling_rate_hz: fs,
        channel_names: default_channel_names(spec.n_channels),
        stimulus_freq_hz: f0,
        subject_id: spec.subject_id.clone(),
        trial_id: spec.trial_id.clone(),
    })
}

/// Amplitude of the profile at `f` (see [`ResponseProfile::amplitude`]).
pub fn profile_amplitude(profile: &ResponseProfile, f: f64) -> Result<f64> {
    profile.amplitude(f)
}

/// Recipe for a whole synthetic dataset: every subject sees every stimulus
/// `repetitions` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthDatasetConfig {
    pub name: String,
    pub stimulus_frequencies_hz: Vec<f64>,
    pub subjects: usize,
    pub repetitions: usize,
    pub duration_s: f64,
    pub sampling_rate_hz: f64,
    pub n_channels: usize,
    pub profile: ResponseProfile,
    pub harmonic_ratio: f64,
    pub noise_exponent: f64,
    pub snr_scale: f64,
    pub seed: u64,
}

impl Default for SynthDatasetConfig {
    fn default() -> Self {
        SynthDatasetConfig {
            name: "synthetic".into(),
            stimulus_frequencies_hz: vec![8.0, 14.0, 28.0],
            subjects: 4,
            repetitions: 5,
            duration_s: 10.0,
            sampling_rate_hz: 256.0,
            n_channels: 3,
            profile: ResponseProfile::default(),
            harmonic_ratio: 0.5,
            noise_exponent: 1.0,
            snr_scale: 1.0,
            seed: 0,
        }
    }
}

/// SplitMix64 finalizer, used to derive per-trial seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SynthDatasetConfig {
    pub fn trial_seed(&self, subject: usize, stimulus: usize, rep: usize) -> u64 {
        mix(mix(mix(self.seed) ^ subject as u64) ^ ((stimulus as u64) << 32 | rep as u64))
    }

    pub fn n_trials(&self) -> usize {
        self.subjects * self.repetitions * self.stimulus_frequencies_hz.len()
    }

    /// Generates the dataset; trial ids are `s<subject>_f<stimulus>_r<rep>`.
    pub fn generate(&self) -> Result<Dataset> {
        if self.subjects == 0 || self.repetitions == 0 {
            return Err(Error::InvalidConfig(
                "subjects and repetitions must be positive".into(),
            ));
        }
        let mut recordings = Vec::with_capacity(self.n_trials());
        let mut seeds = Vec::with_capacity(self.n_trials());
        for s in 0..self.subjects {
            for r in 0..self.repetitions {
                for (k, &f) in self.stimulus_frequencies_hz.iter().enumerate() {
                    let seed = self.trial_seed(s, k, r);
                    let spec = SynthSpec {
                        stimulus_freq_hz: f,
                        duration_s: self.duration_s,
                        sampling_rate_hz: self.sampling_rate_hz,
                        n_channels: self.n_channels,
                        profile: self.profile.clone(),
                        harmonic_ratio: self.harmonic_ratio,
                        noise_exponent: self.noise_exponent,
                        snr_scale: self.snr_scale,
                        rng_seed: seed,
                        subject_id: format!("s{}", s + 1),
                        trial_id: format!("s{}_f{}_r{}", s + 1, k + 1, r + 1),
                    };
                    recordings.push(generate_trial(&spec)?);
                    seeds.push(seed);
                }
            }
        }
        let mut ds = Dataset::from_recordings(
            self.name.clone(),
            self.stimulus_frequencies_hz.clone(),
            recordings,
        )?;
        for (entry, seed) in ds.manifest.trials.iter_mut().zip(seeds) {
            *entry = TrialEntry {
                seed: Some(seed),
                ..entry.clone()
            };
        }
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_interpolation() {
        let p = ResponseProfile::default();
        assert_eq!(p.amplitude(14.0).unwrap(), 0.7);
        assert_eq!(p.amplitude(6.0).unwrap(), 1.0);
        assert_eq!(p.amplitude(35.0).unwrap(), 0.2);
        assert!((p.amplitude(24.0).unwrap() - 0.4).abs() < 1e-15);
        assert!((p.amplitude(9.0).unwrap() - 0.95).abs() < 1e-15);
        assert!(p.amplitude(28.0).unwrap() / p.amplitude(8.0).unwrap() < 0.5);
        assert!(matches!(
            p.amplitude(40.0),
            Err(Error::OutOfProfileRange(_))
        ));
        assert!(matches!(p.amplitude(5.9), Err(Error::OutOfProfileRange(_))));
    }

    #[test]
    fn profile_validation() {
        assert!(ResponseProfile::new(vec![(8.0, 1.0), (8.0, 0.5)]).is_err());
        assert!(ResponseProfile::new(vec![(8.0, 1.0), (9.0, 0.0)]).is_err());
        assert!(ResponseProfile::new(vec![]).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = SynthSpec::new(8.0, 7);
        spec.n_channels = 2;
        let a = generate_trial(&spec).unwrap();
        let b = generate_trial(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_samples(), 2560);
        assert_eq!(a.channel_names, ["Oz", "O1"]);
        spec.rng_seed = 8;
        assert_ne!(generate_trial(&spec).unwrap(), a);
    }

    #[test]
    fn nyquist_enforced() {
        let mut spec = SynthSpec::new(40.0, 1);
        spec.sampling_rate_hz = 150.0;
        assert!(matches!(
            generate_trial(&spec),
            Err(Error::NyquistViolation { .. })
        ));
    }

    #[test]
    fn colored_noise_has_unit_variance() {
        // one 1/f realization's variance spreads by ~15%, so average many
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let runs = 200;
        let mut total = 0.0;
        for _ in 0..runs {
            let x = colored_noise(&mut rng, 4096, 256.0, 1.0);
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            assert!(mean.abs() < 1e-9);
            total += x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        }
        let var = total / runs as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn dataset_counts_and_seeds() {
        let cfg = SynthDatasetConfig {
            subjects: 2,
            repetitions: 5,
            duration_s: 2.0,
            ..Default::default()
        };
        let ds = cfg.generate().unwrap();
        assert_eq!(ds.recordings.len(), 30);
        assert!(ds.manifest.trials.iter().all(|t| t.seed.is_some()));
        let mut seeds: Vec<u64> = ds.manifest.trials.iter().map(|t| t.seed.unwrap()).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 30);
    }
}
