//! Information transfer rate, trial bookkeeping, cross-validation, grid
//! search and significance testing.
//!
//! Accounting conventions:
//! - accuracy counts a trial that never reached a decision as an error;
//! - mean recognition time (MRT) averages only the trials that decided;
//! - the command rate is `s = 60 / MRT` with no inter-trial gap;
//! - ITR below chance accuracy is reported as zero.

mod compare;
mod grid;
mod pipeline;
mod ttest;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use compare::{compare_reports, Comparison, PairedComparison};
pub use grid::{grid_search, refine_bandwidths, GridPoint, GridResult, GridRow, GridSpec};
pub use pipeline::{
    loo_cv, train_subject_models, BifbParams, CcaParams, MethodKind, PipelineConfig,
    PreparedDataset, UnitParams,
};
pub use ttest::{ln_gamma, paired_ttest, regularized_incomplete_beta, student_t_cdf, TTest};

/// Bits per minute for `k` equiprobable commands at accuracy `delta` and
/// `s` commands per minute (Wolpaw's formula, `0·log 0 = 0`).
pub fn itr(k: usize, delta: f64, s: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidAccuracy(delta));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::NonPositiveParameter(format!("command rate {s}")));
    }
    let kf = k as f64;
    if delta <= 1.0 / kf {
        if delta < 1.0 / kf {
            log::warn!("accuracy {delta} is below chance for K = {k}; ITR clamped to 0");
        }
        return Ok(0.0);
    }
    let mut bits = kf.log2();
    if delta > 0.0 {
        bits += delta * delta.log2();
    }
    if delta < 1.0 {
        bits += (1.0 - delta) * ((1.0 - delta) / (kf - 1.0)).log2();
    }
    Ok(s * bits.max(0.0))
}

/// Recognition result of one test trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial_id: String,
    pub subject_id: String,
    pub method: String,
    pub true_class: usize,
    pub recognized_class: Option<usize>,
    /// Trial onset to the end of the segment at which the decision fired.
    pub recognition_time_s: Option<f64>,
}

impl TrialOutcome {
    pub fn is_correct(&self) -> bool {
        self.recognized_class == Some(self.true_class)
    }
}

/// Aggregate figures for a group of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub trials: usize,
    pub correct: usize,
    pub decided: usize,
    pub accuracy: f64,
    pub mrt_s: Option<f64>,
    pub commands_per_min: Option<f64>,
    pub itr_bits_per_min: Option<f64>,
}

impl Stats {
    pub fn from_outcomes<'a>(
        outcomes: impl IntoIterator<Item = &'a TrialOutcome>,
        k: usize,
    ) -> Result<Self> {
        let mut trials = 0;
        let mut correct = 0;
        let mut times = Vec::new();
        for o in outcomes {
            trials += 1;
            correct += o.is_correct() as usize;
            if let Some(t) = o.recognition_time_s {
                times.push(t);
            }
        }
        let accuracy = if trials == 0 {
            0.0
        } else {
            correct as f64 / trials as f64
        };
        let mrt_s = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
        let commands_per_min = mrt_s.map(|m| 60.0 / m);
        let itr_bits_per_min = commands_per_min.map(|s| itr(k, accuracy, s)).transpose()?;
        Ok(Stats {
            trials,
            correct,
            decided: times.len(),
            accuracy,
            mrt_s,
            commands_per_min,
            itr_bits_per_min,
        })
    }
}

/// Pooled and per-subject evaluation of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub k: usize,
    pub pooled: Stats,
    pub per_subject: BTreeMap<String, Stats>,
    /// Per-class accuracy over all subjects.
    pub per_class_accuracy: Vec<f64>,
    pub hyperparameters: BTreeMap<String, String>,
}

impl EvalReport {
    /// Builds a report even when nothing decided; missing figures are `None`.
    pub fn from_outcomes(outcomes: &[TrialOutcome], k: usize) -> Result<Self> {
        let first = outcomes
            .first()
            .ok_or_else(|| Error::InvalidConfig("no trial outcomes to summarize".into()))?;
        if let Some(o) = outcomes.iter().find(|o| o.method != first.method) {
            return Err(Error::InvalidConfig(format!(
                "outcomes mix methods {:?} and {:?}",
                first.method, o.method
            )));
        }
        let mut by_subject: BTreeMap<String, Vec<&TrialOutcome>> = BTreeMap::new();
        for o in outcomes {
            by_subject.entry(o.subject_id.clone()).or_default().push(o);
        }
        let per_subject = by_subject
            .into_iter()
            .map(|(s, os)| Ok((s, Stats::from_outcomes(os, k)?)))
            .collect::<Result<_>>()?;
        let per_class_accuracy = (0..k)
            .map(|c| {
                let of_class: Vec<_> = outcomes.iter().filter(|o| o.true_class == c).collect();
                if of_class.is_empty() {
                    0.0
                } else {
                    of_class.iter().filter(|o| o.is_correct()).count() as f64
                        / of_class.len() as f64
                }
            })
            .collect();
        Ok(EvalReport {
            method: first.method.clone(),
            k,
            pooled: Stats::from_outcomes(outcomes, k)?,
            per_subject,
            per_class_accuracy,
            hyperparameters: BTreeMap::new(),
        })
    }

    pub fn with_hyperparameters(mut self, h: BTreeMap<String, String>) -> Self {
        self.hyperparameters = h;
        self
    }

    /// Aligned plain-text table: one row per subject plus the pooled row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Method: {}  (K = {}, {} trials)",
            self.method, self.k, self.pooled.trials
        );
        for (k, v) in &self.hyperparameters {
            let _ = writeln!(out, "  {k} = {v}");
        }
        let _ = writeln!(
            out,
            "{:<12} {:>7} {:>9} {:>12} {:>16}",
            "Subject", "Trials", "MRT (s)", "Accuracy (%)", "ITR (bits/min)"
        );
        let rows = self
            .per_subject
            .iter()
            .map(|(s, st)| (s.as_str(), st))
            .chain(std::iter::once(("Pooled", &self.pooled)));
        for (name, st) in rows {
            let _ = writeln!(
                out,
                "{:<12} {:>7} {:>9} {:>12.2} {:>16}",
                name,
                st.trials,
                fmt_opt(st.mrt_s, 3),
                100.0 * st.accuracy,
                fmt_opt(st.itr_bits_per_min, 3),
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,subject,trials,correct,decided,accuracy,mrt_s,commands_per_min,itr_bits_per_min\n",
        );
        let rows = self
            .per_subject
            .iter()
            .map(|(s, st)| (s.as_str(), st))
            .chain(std::iter::once(("pooled", &self.pooled)));
        for (name, st) in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                self.method,
                name,
                st.trials,
                st.correct,
                st.decided,
                st.accuracy,
                opt_csv(st.mrt_s),
                opt_csv(st.commands_per_min),
                opt_csv(st.itr_bits_per_min),
            );
        }
        out
    }
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

fn opt_csv(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Summarizes outcomes of one method; fails with [`Error::NoDecisions`]
/// when no trial decided (MRT, and hence ITR, undefined).
pub fn summarize(outcomes: &[TrialOutcome], k: usize) -> Result<EvalReport> {
    let report = EvalReport::from_outcomes(outcomes, k)?;
    if report.pooled.decided == 0 {
        return Err(Error::NoDecisions {
            accuracy: report.pooled.accuracy,
        });
    }
    Ok(report)
}

/// Writes outcomes as CSV with a fixed column order.
pub fn outcomes_to_csv(outcomes: &[TrialOutcome], stimuli: &[f64]) -> String {
    let mut out = String::from(
        "trial_id,subject_id,method,true_class,true_freq_hz,recognized_class,recognized_freq_hz,recognition_time_s\n",
    );
    for o in outcomes {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            o.trial_id,
            o.subject_id,
            o.method,
            o.true_class,
            stimuli.get(o.true_class).copied().unwrap_or(f64::NAN),
            o.recognized_class
                .map_or_else(String::new, |c| c.to_string()),
            o.recognized_class
                .and_then(|c| stimuli.get(c))
                .map_or_else(String::new, |f| f.to_string()),
            opt_csv(o.recognition_time_s),
        );
    }
    out
}

/// Parses the CSV written by [`outcomes_to_csv`].
pub fn outcomes_from_csv(text: &str) -> Result<Vec<TrialOutcome>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
        let parse_err = |what: &str| Error::InvalidConfig(format!("outcome CSV: bad {what}"));
        let opt_usize = |s: String| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| parse_err("class"))
            }
        };
        let time = field(7);
        out.push(TrialOutcome {
            trial_id: field(0),
            subject_id: field(1),
            method: field(2),
            true_class: field(3).parse().map_err(|_| parse_err("true_class"))?,
            recognized_class: opt_usize(field(5))?,
            recognition_time_s: if time.is_empty() {
                None
            } else {
                Some(time.parse().map_err(|_| parse_err("recognition_time_s"))?)
            },
        });
    }
    Ok(out)
}
