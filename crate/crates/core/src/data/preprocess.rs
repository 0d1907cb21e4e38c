use serde::{Deserialize, Serialize};

use super::iir::{Biquad, Sos};
use super::Recording;
use crate::error::{Error, Result};

const NOTCH_Q: f64 = 30.0;
/// Edge extension, in periods of the slowest filter corner.
const PAD_PERIODS: f64 = 12.0;

/// Re-referencing and filtering applied to every recording before analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Channel subtracted sample-wise from every channel.
    pub reference_channel: Option<String>,
    pub bandpass_low_hz: Option<f64>,
    pub bandpass_high_hz: Option<f64>,
    pub notch_hz: Option<f64>,
    /// Channel used by the single-channel methods.
    pub analysis_channel: String,
    /// Butterworth order of each band edge (even).
    pub filter_order: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            reference_channel: None,
            bandpass_low_hz: Some(6.0),
            bandpass_high_hz: Some(35.0),
            notch_hz: None,
            analysis_channel: "Oz".into(),
            filter_order: 8,
        }
    }
}

impl PreprocessConfig {
    /// No re-referencing and no filtering.
    pub fn passthrough() -> Self {
        PreprocessConfig {
            bandpass_low_hz: None,
            bandpass_high_hz: None,
            ..Default::default()
        }
    }

    pub fn validate_for(&self, rec: &Recording) -> Result<()> {
        rec.channel_index(&self.analysis_channel)?;
        if let Some(r) = &self.reference_channel {
            rec.channel_index(r)?;
        }
        self.validate_rate(rec.sampling_rate_hz)
    }

    pub fn validate_rate(&self, fs: f64) -> Result<()> {
        let nyquist = fs / 2.0;
        let band_err = || Error::BandEdgesAboveNyquist {
            low_hz: self.bandpass_low_hz.unwrap_or(0.0),
            high_hz: self.bandpass_high_hz.unwrap_or(nyquist),
            nyquist_hz: nyquist,
        };
        for edge in [self.bandpass_low_hz, self.bandpass_high_hz, self.notch_hz]
            .into_iter()
            .flatten()
        {
            if !(edge.is_finite() && edge > 0.0) {
                return Err(Error::NonPositiveParameter(format!(
                    "filter frequency {edge} Hz"
                )));
            }
            if edge >= nyquist {
                return Err(band_err());
            }
        }
        if let (Some(lo), Some(hi)) = (self.bandpass_low_hz, self.bandpass_high_hz) {
            if lo >= hi {
                return Err(band_err());
            }
        }
        if self.filter_order == 0 || !self.filter_order.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "filter_order must be a positive even number, got {}",
                self.filter_order
            )));
        }
        Ok(())
    }

    /// The band-pass cascade (high-pass then low-pass sections), if any.
    pub fn bandpass(&self, fs: f64) -> Sos {
        let mut sos = Sos::default();
        if let Some(lo) = self.bandpass_low_hz {
            sos.push(Sos::butterworth_highpass(self.filter_order, lo, fs));
        }
        if let Some(hi) = self.bandpass_high_hz {
            sos.push(Sos::butterworth_lowpass(self.filter_order, hi, fs));
        }
        sos
    }

    fn padlen(&self, fs: f64) -> usize {
        let slowest = [self.bandpass_low_hz, self.notch_hz, self.bandpass_high_hz]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min);
        if slowest.is_finite() {
            (PAD_PERIODS * fs / slowest).ceil() as usize
        } else {
            0
        }
    }
}

/// Returns a re-referenced, notch- and band-pass-filtered copy of `rec`.
///
/// All filtering is forward-backward, so the output has zero phase shift.
pub fn preprocess(rec: &Recording, cfg: &PreprocessConfig) -> Result<Recording> {
    cfg.validate_for(rec)?;
    let fs = rec.sampling_rate_hz;
    let mut out = rec.clone();

    if let Some(r) = &cfg.reference_channel {
        let reference = rec.samples[rec.channel_index(r)?].clone();
        for row in &mut out.samples {
            for (v, r) in row.iter_mut().zip(&reference) {
                *v -= r;
            }
        }
    }

    let mut sos = Sos::default();
    if let Some(f0) = cfg.notch_hz {
        sos.sections.push(Biquad::notch(f0, fs, NOTCH_Q));
    }
    sos.push(cfg.bandpass(fs));
    if !sos.is_empty() {
        let pad = cfg.padlen(fs);
        for row in &mut out.samples {
            *row = sos.filtfilt(row, pad);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_recording(freq: f64, fs: f64, seconds: f64) -> Recording {
        let n = (fs * seconds) as usize;
        let sig: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect();
        Recording {
            samples: vec![sig.clone(), sig.iter().map(|v| 0.5 * v + 1.0).collect()],
            sampling_rate_hz: fs,
            channel_names: vec!["Oz".into(), "Cz".into()],
            stimulus_freq_hz: 8.0,
            subject_id: "s".into(),
            trial_id: "t".into(),
        }
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn rereference_zeroes_reference_channel() {
        let rec = sine_recording(10.0, 256.0, 4.0);
        let cfg = PreprocessConfig {
            reference_channel: Some("Cz".into()),
            ..PreprocessConfig::passthrough()
        };
        let out = preprocess(&rec, &cfg).unwrap();
        assert!(out.samples[1].iter().all(|&v| v == 0.0));
        // idempotent once the reference is zero
        let again = preprocess(&out, &cfg).unwrap();
        assert_eq!(again, out);
        // input untouched
        assert_eq!(rec, sine_recording(10.0, 256.0, 4.0));
    }

    // Measured on this implementation (order 8 per edge, 10 s at 256 Hz):
    // 50 Hz keeps 0.102% of the input RMS, the squared single-pass
    // magnitude; 20 Hz is within 0.01%.
    #[test]
    fn bandpass_rejects_50hz() {
        let rec = sine_recording(50.0, 256.0, 10.0);
        let out = preprocess(&rec, &PreprocessConfig::default()).unwrap();
        let ratio = rms(&out.samples[0]) / rms(&rec.samples[0]);
        assert!(ratio < 0.0011, "50 Hz ratio {ratio}");
    }

    #[test]
    fn bandpass_passes_20hz() {
        let rec = sine_recording(20.0, 256.0, 10.0);
        let out = preprocess(&rec, &PreprocessConfig::default()).unwrap();
        let ratio = rms(&out.samples[0]) / rms(&rec.samples[0]);
        assert!((ratio - 1.0).abs() < 1e-4, "20 Hz ratio {ratio}");
        assert_eq!(out.samples.len(), rec.samples.len());
        assert_eq!(out.n_samples(), rec.n_samples());
    }

    #[test]
    fn notch_removes_line_noise() {
        let rec = sine_recording(50.0, 500.0, 10.0);
        let cfg = PreprocessConfig {
            notch_hz: Some(50.0),
            ..PreprocessConfig::passthrough()
        };
        let out = preprocess(&rec, &cfg).unwrap();
        let mid = &out.samples[0][1000..4000];
        assert!(rms(mid) < 0.01);
    }

    #[test]
    fn config_errors() {
        let rec = sine_recording(10.0, 64.0, 4.0);
        let cfg = PreprocessConfig {
            analysis_channel: "O9".into(),
            ..PreprocessConfig::passthrough()
        };
        assert!(matches!(
            preprocess(&rec, &cfg),
            Err(Error::UnknownChannel(_))
        ));
        // 35 Hz edge above the 32 Hz Nyquist
        assert!(matches!(
            preprocess(&rec, &PreprocessConfig::default()),
            Err(Error::BandEdgesAboveNyquist { .. })
        ));
        let inverted = PreprocessConfig {
            bandpass_low_hz: Some(20.0),
            bandpass_high_hz: Some(10.0),
            ..Default::default()
        };
        assert!(matches!(
            preprocess(&rec, &inverted),
            Err(Error::BandEdgesAboveNyquist { .. })
        ));
    }
}
