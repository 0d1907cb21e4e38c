//! Canonical dataset representation.
//!
//! A dataset on disk is a JSON manifest plus one CSV file per trial. The CSV
//! header row holds the channel names and every following row is one sample
//! (microvolts) across all channels, written in plain decimal notation with
//! the shortest digits that round-trip the `f64` exactly.

pub mod iir;
mod io;
mod preprocess;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, read_trial_csv, write_dataset, write_trial_csv, MANIFEST_FILE};
pub use preprocess::{preprocess, PreprocessConfig};

/// Tolerance used when matching a trial label against the stimulus set.
pub const FREQ_MATCH_TOL: f64 = 1e-9;

/// One trial of multichannel EEG.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    /// `[channel][time]`, microvolts.
    pub samples: Vec<Vec<f64>>,
    pub sampling_rate_hz: f64,
    pub channel_names: Vec<String>,
    /// Ground-truth stimulus frequency.
    pub stimulus_freq_hz: f64,
    pub subject_id: String,
    pub trial_id: String,
}

impl Recording {
    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate_hz
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sampling_rate_hz / 2.0
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channel_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.samples[self.channel_index(name)?])
    }

    /// Checks the structural invariants of a single recording.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidRecording(format!("{}: {msg}", self.trial_id)));
        if self.samples.len() != self.channel_names.len() {
            return Err(Error::ChannelMismatch(format!(
                "{}: {} sample rows for {} channel names",
                self.trial_id,
                self.samples.len(),
                self.channel_names.len()
            )));
        }
        if self.samples.is_empty() {
            return bad("no channels".into());
        }
        let n = self.n_samples();
        if n == 0 || self.samples.iter().any(|row| row.len() != n) {
            return bad("channels have unequal or zero length".into());
        }
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return bad(format!("sampling rate {} Hz", self.sampling_rate_hz));
        }
        if !(self.stimulus_freq_hz.is_finite() && self.stimulus_freq_hz > 0.0) {
            return bad(format!("stimulus frequency {} Hz", self.stimulus_freq_hz));
        }
        if 4.0 * self.stimulus_freq_hz > self.sampling_rate_hz {
            return Err(Error::NyquistViolation {
                what: format!("second harmonic of trial {}", self.trial_id),
                freq_hz: 2.0 * self.stimulus_freq_hz,
                nyquist_hz: self.nyquist_hz(),
            });
        }
        if self.samples.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite sample".into());
        }
        Ok(())
    }
}

/// One line of the manifest's `trials` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub trial_id: String,
    pub subject_id: String,
    pub stimulus_freq_hz: f64,
    /// Relative to the manifest's directory.
    pub file: String,
    /// Generator seed, present for synthetic trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub stimulus_frequencies_hz: Vec<f64>,
    pub sampling_rate_hz: f64,
    pub channel_names: Vec<String>,
    pub trials: Vec<TrialEntry>,
}

impl DatasetManifest {
    pub fn n_classes(&self) -> usize {
        self.stimulus_frequencies_hz.len()
    }

    /// Index of `freq_hz` within the stimulus set.
    pub fn class_of(&self, freq_hz: f64) -> Option<usize> {
        class_of(&self.stimulus_frequencies_hz, freq_hz)
    }

    /// Checks everything that can be checked without touching trial files.
    pub fn validate(&self) -> Result<()> {
        let malformed = |m: String| Err(Error::MalformedManifest(m));
        let stim = &self.stimulus_frequencies_hz;
        if stim.len() < 2 {
            return malformed(format!(
                "need at least 2 stimulus frequencies, got {}",
                stim.len()
            ));
        }
        if stim.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return malformed("stimulus frequencies must be positive".into());
        }
        if stim.windows(2).any(|w| w[0] >= w[1]) {
            return malformed("stimulus frequencies must be strictly increasing".into());
        }
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return malformed(format!("sampling rate {}", self.sampling_rate_hz));
        }
        let max_stim = stim[stim.len() - 1];
        if 4.0 * max_stim > self.sampling_rate_hz {
            return Err(Error::NyquistViolation {
                what: "second harmonic of the highest stimulus".into(),
                freq_hz: 2.0 * max_stim,
                nyquist_hz: self.sampling_rate_hz / 2.0,
            });
        }
        if self.channel_names.is_empty() {
            return malformed("no channel names".into());
        }
        if self.trials.is_empty() {
            return malformed("trials list is empty".into());
        }
        let mut seen = std::collections::HashSet::new();
        for t in &self.trials {
            if !seen.insert(t.trial_id.as_str()) {
                return malformed(format!("duplicate trial id {:?}", t.trial_id));
            }
            if self.class_of(t.stimulus_freq_hz).is_none() {
                return Err(Error::LabelNotInStimulusSet {
                    trial_id: t.trial_id.clone(),
                    freq_hz: t.stimulus_freq_hz,
                });
            }
        }
        Ok(())
    }
}

pub fn class_of(stimuli: &[f64], freq_hz: f64) -> Option<usize> {
    stimuli
        .iter()
        .position(|f| (f - freq_hz).abs() <= FREQ_MATCH_TOL * f.max(1.0))
}

/// A manifest with all of its recordings loaded, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub recordings: Vec<Recording>,
}

impl Dataset {
    /// Builds a dataset from in-memory recordings, deriving the manifest.
    /// Trial files are named `trials/<trial_id>.csv`.
    pub fn from_recordings(
        name: impl Into<String>,
        stimulus_frequencies_hz: Vec<f64>,
        recordings: Vec<Recording>,
    ) -> Result<Self> {
        let first = recordings
            .first()
            .ok_or_else(|| Error::MalformedManifest("trials list is empty".into()))?;
        let manifest = DatasetManifest {
            name: name.into(),
            stimulus_frequencies_hz,
            sampling_rate_hz: first.sampling_rate_hz,
            channel_names: first.channel_names.clone(),
            trials: recordings
                .iter()
                .map(|r| TrialEntry {
                    trial_id: r.trial_id.clone(),
                    subject_id: r.subject_id.clone(),
                    stimulus_freq_hz: r.stimulus_freq_hz,
                    file: format!("trials/{}.csv", r.trial_id),
                    seed: None,
                })
                .collect(),
        };
        let ds = Dataset {
            manifest,
            recordings,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        self.manifest.validate()?;
        if self.recordings.len() != self.manifest.trials.len() {
            return Err(Error::MalformedManifest(format!(
                "{} trials listed but {} recordings present",
                self.manifest.trials.len(),
                self.recordings.len()
            )));
        }
        for (entry, rec) in self.manifest.trials.iter().zip(&self.recordings) {
            rec.validate()?;
            if rec.channel_names != self.manifest.channel_names {
                return Err(Error::ChannelMismatch(format!(
                    "trial {} has channels {:?}, manifest lists {:?}",
                    rec.trial_id, rec.channel_names, self.manifest.channel_names
                )));
            }
            if rec.trial_id != entry.trial_id
                || rec.subject_id != entry.subject_id
                || rec.stimulus_freq_hz != entry.stimulus_freq_hz
                || rec.sampling_rate_hz != self.manifest.sampling_rate_hz
            {
                return Err(Error::MalformedManifest(format!(
                    "recording metadata for {} disagrees with the manifest",
                    entry.trial_id
                )));
            }
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.manifest.n_classes()
    }

    pub fn stimuli(&self) -> &[f64] {
        &self.manifest.stimulus_frequencies_hz
    }

    /// Class index of each recording, in manifest order.
    pub fn labels(&self) -> Vec<usize> {
        self.recordings
            .iter()
            .map(|r| {
                self.manifest
                    .class_of(r.stimulus_freq_hz)
                    .expect("validated label")
            })
            .collect()
    }

    /// Recording indices grouped by subject, subjects sorted by id.
    pub fn subjects(&self) -> BTreeMap<String, Vec<usize>> {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.recordings.iter().enumerate() {
            map.entry(r.subject_id.clone()).or_default().push(i);
        }
        map
    }

    /// A copy restricted to one subject's trials.
    pub fn subset_subject(&self, subject_id: &str) -> Dataset {
        let keep: Vec<usize> = (0..self.recordings.len())
            .filter(|&i| self.recordings[i].subject_id == subject_id)
            .collect();
        let mut manifest = self.manifest.clone();
        manifest.trials = keep
            .iter()
            .map(|&i| self.manifest.trials[i].clone())
            .collect();
        Dataset {
            manifest,
            recordings: keep.iter().map(|&i| self.recordings[i].clone()).collect(),
        }
    }
}
