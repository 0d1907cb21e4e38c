use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrialOutcome;
use crate::baselines::{Cca, Psda};
use crate::classify::{argmax, decide, train_ova, DecisionRule, OvaModel, TrainConfig};
use crate::data::{preprocess, Dataset, PreprocessConfig, Recording};
use crate::dsp::{segment_starts, PsdEstimator, SegmentConfig, Spectrum};
use crate::error::{Error, Result};
use crate::filterbank::{build_bifb, build_unit_bank, BankShape, FeatureExtractor, FilterBank};
use crate::synth::ResponseProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Bifb,
    Uf,
    Psda,
    Cca,
}

impl MethodKind {
    pub const ALL: [MethodKind; 4] = [
        MethodKind::Bifb,
        MethodKind::Uf,
        MethodKind::Psda,
        MethodKind::Cca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Bifb => "bifb",
            MethodKind::Uf => "uf",
            MethodKind::Psda => "psda",
            MethodKind::Cca => "cca",
        }
    }

    /// Whether the method fits a classifier per cross-validation fold.
    pub fn is_trainable(self) -> bool {
        matches!(self, MethodKind::Bifb | MethodKind::Uf)
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidConfig(format!("unknown method {s:?} (bifb, uf, psda, cca)"))
            })
    }
}

/// Triangular-bank parameters. Explicit `gains`/`bandwidths` (2K values,
/// fundamentals first) override the profile-driven shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BifbParams {
    pub gamma: f64,
    pub beta: f64,
    pub base_bandwidth_hz: f64,
    pub profile: ResponseProfile,
    pub gains: Option<Vec<f64>>,
    pub bandwidths: Option<Vec<f64>>,
}

impl Default for BifbParams {
    fn default() -> Self {
        let shape = BankShape::default();
        BifbParams {
            gamma: shape.gamma,
            beta: shape.beta,
            base_bandwidth_hz: shape.base_bandwidth_hz,
            profile: ResponseProfile::default(),
            gains: None,
            bandwidths: None,
        }
    }
}

impl BifbParams {
    pub fn shape(&self) -> BankShape {
        BankShape {
            gamma: self.gamma,
            beta: self.beta,
            base_bandwidth_hz: self.base_bandwidth_hz,
        }
    }

    /// Per-filter `(gains, bandwidths)`; shape-derived values fill in
    /// whichever list is not given explicitly.
    pub fn resolve(&self, stimuli: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if let (Some(g), Some(bw)) = (&self.gains, &self.bandwidths) {
            return Ok((g.clone(), bw.clone()));
        }
        self.profile.validate()?;
        let (g, bw) = self
            .shape()
            .parameters(stimuli, &self.profile)
            .map_err(|e| match e {
                Error::OutOfProfileRange(f) => Error::InvalidConfig(format!(
                    "no default filter parameters for {f} Hz: outside the response profile {:?}; \
                 give bifb.gains and bifb.bandwidths explicitly",
                    self.profile.range()
                )),
                e => e,
            })?;
        Ok((
            self.gains.clone().unwrap_or(g),
            self.bandwidths.clone().unwrap_or(bw),
        ))
    }

    pub fn bank(&self, stimuli: &[f64], sampling_rate_hz: f64) -> Result<FilterBank> {
        let (g, bw) = self.resolve(stimuli)?;
        build_bifb(stimuli, &g, &bw, sampling_rate_hz)
    }
}

/// Rectangular-band parameters shared by UF and PSDA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitParams {
    pub half_width_hz: f64,
}

impl Default for UnitParams {
    fn default() -> Self {
        UnitParams { half_width_hz: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcaParams {
    pub harmonics: usize,
    /// Defaults to every channel except the reference.
    pub channels: Option<Vec<String>>,
}

impl Default for CcaParams {
    fn default() -> Self {
        CcaParams {
            harmonics: 2,
            channels: None,
        }
    }
}

/// Everything that determines a method's outcomes on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub method: MethodKind,
    pub preprocess: PreprocessConfig,
    pub segment: SegmentConfig,
    pub decision: DecisionRule,
    pub train: TrainConfig,
    pub bifb: BifbParams,
    pub uf: UnitParams,
    pub psda: UnitParams,
    pub cca: CcaParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: MethodKind::Bifb,
            preprocess: PreprocessConfig::default(),
            segment: SegmentConfig::default(),
            decision: DecisionRule::default(),
            train: TrainConfig::default(),
            bifb: BifbParams::default(),
            uf: UnitParams::default(),
            psda: UnitParams::default(),
            cca: CcaParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn for_method(method: MethodKind) -> Self {
        PipelineConfig {
            method,
            ..Default::default()
        }
    }

    /// The settings that matter for this method, as printable pairs.
    pub fn hyperparameters(&self) -> BTreeMap<String, String> {
        let mut h = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            h.insert(k.to_string(), v);
        };
        put("segment.length_s", self.segment.length_s.to_string());
        put("segment.overlap", self.segment.overlap.to_string());
        put(
            "decision",
            format!("{} of {}", self.decision.t_required, self.decision.window_t),
        );
        let band = match (
            self.preprocess.bandpass_low_hz,
            self.preprocess.bandpass_high_hz,
        ) {
            (None, None) => "off".to_string(),
            (lo, hi) => format!(
                "{}-{} Hz",
                lo.map_or("0".into(), |v| v.to_string()),
                hi.map_or("nyquist".into(), |v| v.to_string())
            ),
        };
        put("preprocess.bandpass", band);
        match self.method {
            MethodKind::Bifb => {
                if self.bifb.gains.is_some() || self.bifb.bandwidths.is_some() {
                    put(
                        "bifb.gains",
                        self.bifb
                            .gains
                            .as_ref()
                            .map_or("shape".into(), |g| format!("{g:?}")),
                    );
                    put(
                        "bifb.bandwidths",
                        self.bifb
                            .bandwidths
                            .as_ref()
                            .map_or("shape".into(), |g| format!("{g:?}")),
                    );
                }
                put("bifb.gamma", self.bifb.gamma.to_string());
                put("bifb.beta", self.bifb.beta.to_string());
                put(
                    "bifb.base_bandwidth_hz",
                    self.bifb.base_bandwidth_hz.to_string(),
                );
            }
            MethodKind::Uf => put("uf.half_width_hz", self.uf.half_width_hz.to_string()),
            MethodKind::Psda => put("psda.half_width_hz", self.psda.half_width_hz.to_string()),
            MethodKind::Cca => put("cca.harmonics", self.cca.harmonics.to_string()),
        }
        if self.method.is_trainable() {
            put("train.lambda", self.train.lambda.to_string());
            put("train.learning_rate", self.train.learning_rate.to_string());
        }
        h
    }

    /// Checks everything that can be checked without running: channels,
    /// band edges, segment length against every recording, filter-bank
    /// parameters and Nyquist limits, and per-subject class coverage for
    /// trainable methods.
    pub fn validate_for(&self, ds: &Dataset) -> Result<()> {
        ds.validate()?;
        self.validate()?;
        let fs = ds.manifest.sampling_rate_hz;
        for rec in &ds.recordings {
            self.preprocess.validate_for(rec)?;
        }
        let (len, _) = self.segment.samples(fs)?;
        if let Some(r) = ds.recordings.iter().find(|r| r.n_samples() < len) {
            return Err(Error::SignalTooShort {
                samples: r.n_samples(),
                segment: len,
            });
        }
        let stimuli = ds.stimuli();
        match self.method {
            MethodKind::Bifb => {
                self.bifb.bank(stimuli, fs)?;
            }
            MethodKind::Uf => {
                build_unit_bank(stimuli, self.uf.half_width_hz, fs)?;
            }
            MethodKind::Psda => {
                build_unit_bank(stimuli, self.psda.half_width_hz, fs)?;
            }
            MethodKind::Cca => {
                Cca::new(stimuli, self.cca.harmonics, fs, len)?;
                if let Some(chans) = &self.cca.channels {
                    for c in chans {
                        ds.recordings[0].channel_index(c)?;
                    }
                }
            }
        }
        if self.method.is_trainable() {
            let mut counts: BTreeMap<(&str, usize), usize> = BTreeMap::new();
            for (r, l) in ds.recordings.iter().zip(ds.labels()) {
                *counts.entry((r.subject_id.as_str(), l)).or_default() += 1;
            }
            for subject in ds.subjects().keys() {
                for class in 0..stimuli.len() {
                    if counts.get(&(subject.as_str(), class)).copied().unwrap_or(0) < 2 {
                        return Err(Error::MissingClass(class));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.decision.validate()?;
        if self.method.is_trainable() {
            self.train.validate()?;
        }
        if self.method == MethodKind::Cca && self.cca.harmonics == 0 {
            return Err(Error::NonPositiveParameter("cca.harmonics".into()));
        }
        Ok(())
    }
}

/// A dataset after preprocessing, reusable across pipeline settings that
/// share the same preprocessing.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub stimuli: Vec<f64>,
    pub sampling_rate_hz: f64,
    pub preprocess: PreprocessConfig,
    pub recordings: Vec<Recording>,
    pub labels: Vec<usize>,
}

/// Segment boundaries and, for spectral methods, one spectrum per segment.
pub(crate) struct Segmented {
    len: usize,
    starts: Vec<Vec<usize>>,
    spectra: Vec<Vec<Spectrum>>,
}

impl PreparedDataset {
    pub fn new(ds: &Dataset, cfg: &PreprocessConfig) -> Result<Self> {
        ds.validate()?;
        let recordings = ds
            .recordings
            .par_iter()
            .map(|r| preprocess(r, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedDataset {
            stimuli: ds.stimuli().to_vec(),
            sampling_rate_hz: ds.manifest.sampling_rate_hz,
            preprocess: cfg.clone(),
            recordings,
            labels: ds.labels(),
        })
    }

    /// Recording indices grouped by subject, subjects sorted by id.
    pub fn subjects(&self) -> BTreeMap<String, Vec<usize>> {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.recordings.iter().enumerate() {
            map.entry(r.subject_id.clone()).or_default().push(i);
        }
        map
    }

    fn check(&self, cfg: &PipelineConfig) -> Result<()> {
        if cfg.preprocess != self.preprocess {
            return Err(Error::InvalidConfig(
                "pipeline preprocessing differs from the prepared dataset".into(),
            ));
        }
        cfg.validate()
    }

    pub(crate) fn segment(
        &self,
        seg: &SegmentConfig,
        spectral: bool,
        analysis_channel: &str,
    ) -> Result<Segmented> {
        let (len, hop) = seg.samples(self.sampling_rate_hz)?;
        let starts = self
            .recordings
            .iter()
            .map(|r| segment_starts(r.n_samples(), len, hop))
            .collect::<Result<Vec<_>>>()?;
        let spectra = if spectral {
            let est = PsdEstimator::new(len, seg.zero_pad)?;
            self.recordings
                .par_iter()
                .zip(&starts)
                .map(|(r, st)| {
                    let x = r.channel(analysis_channel)?;
                    st.iter()
                        .map(|&s| est.estimate(&x[s..s + len], self.sampling_rate_hz))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(Segmented {
            len,
            starts,
            spectra,
        })
    }

    fn bank(&self, cfg: &PipelineConfig) -> Result<FilterBank> {
        match cfg.method {
            MethodKind::Bifb => cfg.bifb.bank(&self.stimuli, self.sampling_rate_hz),
            _ => build_unit_bank(&self.stimuli, cfg.uf.half_width_hz, self.sampling_rate_hz),
        }
    }

    /// Feature vectors per trial and segment for a filter-bank method.
    pub(crate) fn features(
        &self,
        bank: &FilterBank,
        seg: &Segmented,
    ) -> Result<Vec<Vec<Vec<f64>>>> {
        let first = seg
            .spectra
            .iter()
            .flatten()
            .next()
            .ok_or_else(|| Error::InvalidConfig("dataset has no segments".into()))?;
        let fx = FeatureExtractor::for_spectrum(bank, first)?;
        seg.spectra
            .iter()
            .map(|trial| {
                trial
                    .iter()
                    .map(|s| fx.extract(s).map(|f| f.values))
                    .collect::<Result<Vec<_>>>()
            })
            .collect()
    }

    fn cca_channels(&self, cfg: &PipelineConfig) -> Result<Vec<usize>> {
        let rec = &self.recordings[0];
        let names: Vec<String> = match &cfg.cca.channels {
            Some(c) => c.clone(),
            None => rec
                .channel_names
                .iter()
                .filter(|n| Some(*n) != cfg.preprocess.reference_channel.as_ref())
                .cloned()
                .collect(),
        };
        if names.is_empty() {
            return Err(Error::InvalidConfig(
                "CCA needs at least one channel".into(),
            ));
        }
        names.iter().map(|n| rec.channel_index(n)).collect()
    }

    /// Candidate class per segment for each trial, for methods that need no
    /// training.
    fn fixed_candidates(&self, cfg: &PipelineConfig, seg: &Segmented) -> Result<Vec<Vec<usize>>> {
        match cfg.method {
            MethodKind::Psda => {
                let Some(first) = seg.spectra.iter().flatten().next() else {
                    return Ok(vec![Vec::new(); self.recordings.len()]);
                };
                let psda = Psda::new(
                    &self.stimuli,
                    cfg.psda.half_width_hz,
                    first.power.len(),
                    first.bin_resolution_hz,
                )?;
                seg.spectra
                    .iter()
                    .map(|trial| trial.iter().map(|s| psda.recognize(s)).collect())
                    .collect()
            }
            MethodKind::Cca => {
                let channels = self.cca_channels(cfg)?;
                let cca = Cca::new(
                    &self.stimuli,
                    cfg.cca.harmonics,
                    self.sampling_rate_hz,
                    seg.len,
                )?;
                self.recordings
                    .par_iter()
                    .zip(&seg.starts)
                    .map(|(r, st)| {
                        st.iter()
                            .map(|&s| {
                                let window: Vec<Vec<f64>> = channels
                                    .iter()
                                    .map(|&c| r.samples[c][s..s + seg.len].to_vec())
                                    .collect();
                                cca.recognize(&window)
                            })
                            .collect()
                    })
                    .collect()
            }
            _ => unreachable!("trainable methods use per-fold candidates"),
        }
    }

    fn outcome(
        &self,
        cfg: &PipelineConfig,
        seg: &Segmented,
        trial: usize,
        candidates: &[usize],
    ) -> TrialOutcome {
        let r = &self.recordings[trial];
        let decision = decide(candidates, &cfg.decision);
        TrialOutcome {
            trial_id: r.trial_id.clone(),
            subject_id: r.subject_id.clone(),
            method: cfg.method.name().to_string(),
            true_class: self.labels[trial],
            recognized_class: decision.map(|d| d.class),
            recognition_time_s: decision
                .map(|d| (seg.starts[trial][d.index] + seg.len) as f64 / self.sampling_rate_hz),
        }
    }

    /// Every subject needs two trials per class so that each leave-one-out
    /// training set still covers all classes.
    fn check_class_coverage(&self) -> Result<()> {
        for (subject, trials) in self.subjects() {
            for class in 0..self.stimuli.len() {
                let count = trials.iter().filter(|&&t| self.labels[t] == class).count();
                if count < 2 {
                    log::error!(
                        "subject {subject} has {count} trial(s) of {} Hz",
                        self.stimuli[class]
                    );
                    return Err(Error::MissingClass(class));
                }
            }
        }
        Ok(())
    }

    /// Indices of the trials a held-out trial's classifier is trained on:
    /// the same subject's other trials.
    pub fn fold_training_set(&self, held_out: usize) -> Vec<usize> {
        let subject = &self.recordings[held_out].subject_id;
        (0..self.recordings.len())
            .filter(|&o| o != held_out && &self.recordings[o].subject_id == subject)
            .collect()
    }

    /// Trains on the given trials' segments, visiting trials in id order so
    /// the fit does not depend on manifest order.
    fn train_on(
        &self,
        cfg: &PipelineConfig,
        features: &[Vec<Vec<f64>>],
        trials: &[usize],
    ) -> Result<OvaModel> {
        let mut order = trials.to_vec();
        order.sort_by(|&a, &b| {
            self.recordings[a]
                .trial_id
                .cmp(&self.recordings[b].trial_id)
        });
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &t in &order {
            for f in &features[t] {
                x.push(f.clone());
                y.push(self.labels[t]);
            }
        }
        if x.is_empty() {
            return Err(Error::MissingClass(0));
        }
        train_ova(&x, &y, &self.stimuli, &cfg.train)
    }

    pub(crate) fn evaluate(
        &self,
        cfg: &PipelineConfig,
        seg: &Segmented,
    ) -> Result<Vec<TrialOutcome>> {
        let n = self.recordings.len();
        if !cfg.method.is_trainable() {
            let cands = self.fixed_candidates(cfg, seg)?;
            return Ok((0..n)
                .map(|t| self.outcome(cfg, seg, t, &cands[t]))
                .collect());
        }
        self.check_class_coverage()?;
        let bank = self.bank(cfg)?;
        let features = self.features(&bank, seg)?;
        log::info!("training {} {} folds", n, cfg.method);
        (0..n)
            .into_par_iter()
            .map(|t| {
                let model = self.train_on(cfg, &features, &self.fold_training_set(t))?;
                let cands = features[t]
                    .iter()
                    .map(|f| model.scores(f).map(|z| argmax(&z)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(self.outcome(cfg, seg, t, &cands))
            })
            .collect()
    }

    /// Leave-one-trial-out evaluation within each subject.
    pub fn loo_cv(&self, cfg: &PipelineConfig) -> Result<Vec<TrialOutcome>> {
        self.check(cfg)?;
        let seg = self.segment(
            &cfg.segment,
            cfg.method != MethodKind::Cca,
            &cfg.preprocess.analysis_channel,
        )?;
        self.evaluate(cfg, &seg)
    }

    /// One model per subject trained on all of that subject's trials.
    pub fn train_subject_models(&self, cfg: &PipelineConfig) -> Result<BTreeMap<String, OvaModel>> {
        self.check(cfg)?;
        if !cfg.method.is_trainable() {
            return Ok(BTreeMap::new());
        }
        let seg = self.segment(&cfg.segment, true, &cfg.preprocess.analysis_channel)?;
        let features = self.features(&self.bank(cfg)?, &seg)?;
        self.subjects()
            .into_iter()
            .map(|(s, trials)| Ok((s, self.train_on(cfg, &features, &trials)?)))
            .collect()
    }
}

/// Leave-one-trial-out cross-validation within each subject.
///
/// Trainable methods (BIFB, UF) fit a fresh classifier on the subject's
/// other trials for every held-out trial; PSDA and CCA are applied directly.
/// Outcomes come back in manifest order.
pub fn loo_cv(ds: &Dataset, cfg: &PipelineConfig) -> Result<Vec<TrialOutcome>> {
    PreparedDataset::new(ds, &cfg.preprocess)?.loo_cv(cfg)
}

/// Per-subject models trained on every trial, for export.
pub fn train_subject_models(
    ds: &Dataset,
    cfg: &PipelineConfig,
) -> Result<BTreeMap<String, OvaModel>> {
    PreparedDataset::new(ds, &cfg.preprocess)?.train_subject_models(cfg)
}
