use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{MethodKind, PipelineConfig, PreparedDataset};
use super::EvalReport;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Candidate values per hyperparameter; the search visits their Cartesian
/// product in field order (last field varies fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub segment_length_s: Vec<f64>,
    pub overlap: Vec<f64>,
    pub lambda: Vec<f64>,
    pub learning_rate: Vec<f64>,
}

impl GridSpec {
    /// A one-point grid at the base configuration.
    pub fn singleton(base: &PipelineConfig) -> Self {
        GridSpec {
            gamma: vec![base.bifb.gamma],
            beta: vec![base.bifb.beta],
            segment_length_s: vec![base.segment.length_s],
            overlap: vec![base.segment.overlap],
            lambda: vec![base.train.lambda],
            learning_rate: vec![base.train.learning_rate],
        }
    }

    fn axes(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("gamma", &self.gamma),
            ("beta", &self.beta),
            ("segment_length_s", &self.segment_length_s),
            ("overlap", &self.overlap),
            ("lambda", &self.lambda),
            ("learning_rate", &self.learning_rate),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, values) in self.axes() {
            if values.is_empty() {
                return Err(Error::InvalidGrid(format!("axis {name} has no values")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "axis {name} has a non-finite value"
                )));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &gamma in &self.gamma {
            for &beta in &self.beta {
                for &segment_length_s in &self.segment_length_s {
                    for &overlap in &self.overlap {
                        for &lambda in &self.lambda {
                            for &learning_rate in &self.learning_rate {
                                out.push(GridPoint {
                                    gamma,
                                    beta,
                                    segment_length_s,
                                    overlap,
                                    lambda,
                                    learning_rate,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub beta: f64,
    pub segment_length_s: f64,
    pub overlap: f64,
    pub lambda: f64,
    pub learning_rate: f64,
}

impl GridPoint {
    pub fn apply(&self, base: &PipelineConfig) -> PipelineConfig {
        let mut cfg = base.clone();
        cfg.bifb.gamma = self.gamma;
        cfg.bifb.beta = self.beta;
        cfg.segment.length_s = self.segment_length_s;
        cfg.segment.overlap = self.overlap;
        cfg.train.lambda = self.lambda;
        cfg.train.learning_rate = self.learning_rate;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub point: GridPoint,
    pub accuracy: f64,
    pub mrt_s: Option<f64>,
    /// `None` when no trial reached a decision.
    pub itr_bits_per_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub best: usize,
}

impl GridResult {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "gamma,beta,segment_length_s,overlap,lambda,learning_rate,accuracy,mrt_s,itr_bits_per_min,selected\n",
        );
        for (i, r) in self.rows.iter().enumerate() {
            let p = &r.point;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                p.gamma,
                p.beta,
                p.segment_length_s,
                p.overlap,
                p.lambda,
                p.learning_rate,
                r.accuracy,
                r.mrt_s.map_or(String::new(), |v| v.to_string()),
                r.itr_bits_per_min.map_or(String::new(), |v| v.to_string()),
                i == self.best,
            );
        }
        out
    }
}

/// Ranks rows: higher ITR, then shorter segment, then smaller lambda, then
/// earlier enumeration. Rows without decisions rank below every other row.
fn better(a: &GridRow, ia: usize, b: &GridRow, ib: usize) -> bool {
    let itr = |r: &GridRow| r.itr_bits_per_min.unwrap_or(f64::NEG_INFINITY);
    let ord = itr(a)
        .total_cmp(&itr(b))
        .then_with(|| {
            b.point
                .segment_length_s
                .total_cmp(&a.point.segment_length_s)
        })
        .then_with(|| b.point.lambda.total_cmp(&a.point.lambda))
        .then_with(|| ib.cmp(&ia));
    ord == Ordering::Greater
}

fn score(
    prepared: &PreparedDataset,
    cfg: &PipelineConfig,
) -> Result<(f64, Option<f64>, Option<f64>)> {
    let outcomes = prepared.loo_cv(cfg)?;
    let report = EvalReport::from_outcomes(&outcomes, prepared.stimuli.len())?;
    Ok((
        report.pooled.accuracy,
        report.pooled.mrt_s,
        report.pooled.itr_bits_per_min,
    ))
}

/// Exhaustive search maximizing pooled leave-one-out ITR.
pub fn grid_search(ds: &Dataset, base: &PipelineConfig, grid: &GridSpec) -> Result<GridResult> {
    grid.validate()?;
    let prepared = PreparedDataset::new(ds, &base.preprocess)?;
    let points = grid.points();
    log::info!("grid search over {} points", points.len());
    let rows = points
        .par_iter()
        .map(|p| {
            let cfg = p.apply(base);
            let (accuracy, mrt_s, itr) = score(&prepared, &cfg)?;
            log::debug!("{p:?}: accuracy {accuracy}, ITR {itr:?}");
            Ok(GridRow {
                point: *p,
                accuracy,
                mrt_s,
                itr_bits_per_min: itr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for i in 1..rows.len() {
        if better(&rows[i], i, &rows[best], best) {
            best = i;
        }
    }
    Ok(GridResult { rows, best })
}

/// One coordinate pass over the stimuli scaling the bandwidth of each
/// stimulus's fundamental and harmonic filters by each multiplier in turn,
/// keeping a change only when pooled ITR strictly improves.
///
/// Returns a configuration with explicit gains and bandwidths and its ITR.
pub fn refine_bandwidths(
    ds: &Dataset,
    cfg: &PipelineConfig,
    multipliers: &[f64],
) -> Result<(PipelineConfig, Option<f64>)> {
    if cfg.method != MethodKind::Bifb {
        return Err(Error::InvalidConfig(
            "bandwidth refinement applies to bifb only".into(),
        ));
    }
    if multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::InvalidGrid(
            "bandwidth multipliers must be positive".into(),
        ));
    }
    let prepared = PreparedDataset::new(ds, &cfg.preprocess)?;
    let (gains, bandwidths) = cfg.bifb.resolve(&prepared.stimuli)?;
    let mut current = cfg.clone();
    current.bifb.gains = Some(gains);
    current.bifb.bandwidths = Some(bandwidths);
    let mut best_itr = score(&prepared, &current)?.2;
    let k = prepared.stimuli.len();
    for class in 0..k {
        let trials: Vec<(PipelineConfig, Option<f64>)> = multipliers
            .par_iter()
            .map(|&m| {
                let mut c = current.clone();
                let bw = c.bifb.bandwidths.as_mut().expect("explicit bandwidths");
                bw[class] *= m;
                bw[k + class] *= m;
                let itr = score(&prepared, &c)?.2;
                Ok((c, itr))
            })
            .collect::<Result<_>>()?;
        for (c, itr) in trials {
            if itr.unwrap_or(f64::NEG_INFINITY) > best_itr.unwrap_or(f64::NEG_INFINITY) {
                best_itr = itr;
                current = c;
            }
        }
    }
    Ok((current, best_itr))
}
