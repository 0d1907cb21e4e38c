//! Frequency-domain filter banks and spectral feature extraction.
//!
//! A bank holds `2K` filters for `K` stimuli: filters `0..K` sit on the
//! fundamentals `f_k`, filters `K..2K` on the second harmonics `2 f_k`.
//! Feature `i` is the PSD weighted by filter `i`'s response, summed over the
//! DFT bins.
//!
//! The triangular (bio-inspired) filter rises linearly from `f_k - BW_k/2`
//! to the centre and falls back to zero at `f_k + BW_k/2`, scaled by
//! `g_k / BW_k`. Its peak is therefore `g_k / 2`, not `g_k`.

use serde::{Deserialize, Serialize};

use crate::dsp::Spectrum;
use crate::error::{Error, Result};
use crate::synth::ResponseProfile;

/// Slack for closed-interval tests on computed bin frequencies.
const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriFilter {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub gain: f64,
}

impl TriFilter {
    pub fn new(center_hz: f64, bandwidth_hz: f64, gain: f64) -> Result<Self> {
        if !(bandwidth_hz > 0.0 && gain > 0.0) {
            return Err(Error::NonPositiveParameter(format!(
                "triangular filter at {center_hz} Hz: bandwidth {bandwidth_hz}, gain {gain}"
            )));
        }
        if center_hz - bandwidth_hz / 2.0 <= 0.0 {
            return Err(Error::NonPositiveParameter(format!(
                "triangular filter at {center_hz} Hz with bandwidth {bandwidth_hz} reaches 0 Hz"
            )));
        }
        Ok(TriFilter {
            center_hz,
            bandwidth_hz,
            gain,
        })
    }

    pub fn response(&self, f: f64) -> f64 {
        tri_response(self, f)
    }

    pub fn support(&self) -> (f64, f64) {
        let half = self.bandwidth_hz / 2.0;
        (self.center_hz - half, self.center_hz + half)
    }
}

pub fn tri_response(filt: &TriFilter, f: f64) -> f64 {
    let (lo, hi) = filt.support();
    let c = filt.center_hz;
    if lo <= f && f <= c {
        (f - lo) / filt.bandwidth_hz * filt.gain
    } else if c < f && f <= hi {
        (hi - f) / filt.bandwidth_hz * filt.gain
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitFilter {
    pub center_hz: f64,
    pub half_width_hz: f64,
}

impl UnitFilter {
    pub fn new(center_hz: f64, half_width_hz: f64) -> Result<Self> {
        if !(half_width_hz.is_finite() && half_width_hz > 0.0) {
            return Err(Error::NonPositiveParameter(format!(
                "unit filter half width {half_width_hz}"
            )));
        }
        Ok(UnitFilter {
            center_hz,
            half_width_hz,
        })
    }

    pub fn response(&self, f: f64) -> f64 {
        unit_response(self, f)
    }

    pub fn support(&self) -> (f64, f64) {
        (
            self.center_hz - self.half_width_hz,
            self.center_hz + self.half_width_hz,
        )
    }
}

/// Indicator of the closed interval `[center - half_width, center + half_width]`.
pub fn unit_response(filt: &UnitFilter, f: f64) -> f64 {
    let (lo, hi) = filt.support();
    if f >= lo - EDGE_EPS && f <= hi + EDGE_EPS {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Filter {
    Triangular(TriFilter),
    Unit(UnitFilter),
}

impl Filter {
    pub fn response(&self, f: f64) -> f64 {
        match self {
            Filter::Triangular(t) => t.response(f),
            Filter::Unit(u) => u.response(f),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Filter::Triangular(t) => t.support(),
            Filter::Unit(u) => u.support(),
        }
    }

    pub fn center_hz(&self) -> f64 {
        match self {
            Filter::Triangular(t) => t.center_hz,
            Filter::Unit(u) => u.center_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Triangular,
    Unit,
}

/// `2K` filters: fundamentals first, then second harmonics in the same order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub kind: FilterKind,
    pub stimuli_hz: Vec<f64>,
    pub filters: Vec<Filter>,
}

impl FilterBank {
    pub fn n_classes(&self) -> usize {
        self.stimuli_hz.len()
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// Highest frequency any filter responds to.
    pub fn upper_edge_hz(&self) -> f64 {
        self.filters
            .iter()
            .map(|f| f.support().1)
            .fold(0.0, f64::max)
    }

    fn check_nyquist(&self, sampling_rate_hz: f64) -> Result<()> {
        let nyquist = sampling_rate_hz / 2.0;
        for f in &self.filters {
            let hi = f.support().1;
            if hi > nyquist + EDGE_EPS {
                return Err(Error::NyquistViolation {
                    what: format!("filter centred at {} Hz", f.center_hz()),
                    freq_hz: hi,
                    nyquist_hz: nyquist,
                });
            }
        }
        Ok(())
    }

    fn warn_overlaps(&self) {
        let k = self.n_classes();
        for (i, f) in self.filters[..k].iter().enumerate() {
            let (lo, hi) = f.support();
            for (j, &s) in self.stimuli_hz.iter().enumerate() {
                if i != j && lo < s && s < hi {
                    log::warn!(
                        "filter for {} Hz covers neighbouring stimulus {} Hz",
                        self.stimuli_hz[i],
                        s
                    );
                }
            }
        }
    }
}

fn check_stimuli(stimuli: &[f64]) -> Result<()> {
    if stimuli.is_empty() || stimuli.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::NonPositiveParameter("stimulus frequencies".into()));
    }
    Ok(())
}

/// Builds a triangular bank from explicit per-filter gains and bandwidths
/// (`2K` each, fundamentals first).
pub fn build_bifb(
    stimuli: &[f64],
    gains: &[f64],
    bandwidths: &[f64],
    sampling_rate_hz: f64,
) -> Result<FilterBank> {
    check_stimuli(stimuli)?;
    let k = stimuli.len();
    for (what, v) in [("gains", gains), ("bandwidths", bandwidths)] {
        if v.len() != 2 * k {
            return Err(Error::InvalidConfig(format!(
                "{what}: expected {} values for {k} stimuli, got {}",
                2 * k,
                v.len()
            )));
        }
    }
    let centers = stimuli
        .iter()
        .copied()
        .chain(stimuli.iter().map(|f| 2.0 * f));
    let filters = centers
        .zip(gains.iter().zip(bandwidths))
        .map(|(c, (&g, &bw))| TriFilter::new(c, bw, g).map(Filter::Triangular))
        .collect::<Result<Vec<_>>>()?;
    let bank = FilterBank {
        kind: FilterKind::Triangular,
        stimuli_hz: stimuli.to_vec(),
        filters,
    };
    bank.check_nyquist(sampling_rate_hz)?;
    bank.warn_overlaps();
    Ok(bank)
}

/// Builds a unit-filter bank with one half width for every filter.
pub fn build_unit_bank(
    stimuli: &[f64],
    half_width_hz: f64,
    sampling_rate_hz: f64,
) -> Result<FilterBank> {
    check_stimuli(stimuli)?;
    let filters = stimuli
        .iter()
        .copied()
        .chain(stimuli.iter().map(|f| 2.0 * f))
        .map(|c| UnitFilter::new(c, half_width_hz).map(Filter::Unit))
        .collect::<Result<Vec<_>>>()?;
    let bank = FilterBank {
        kind: FilterKind::Unit,
        stimuli_hz: stimuli.to_vec(),
        filters,
    };
    bank.check_nyquist(sampling_rate_hz)?;
    Ok(bank)
}

/// Profile-driven shaping of a triangular bank.
///
/// Stimulus `k` gets weight `w_k = (a_max / a(f_k))^gamma`, where `a` is the
/// response profile and `a_max` its largest value over the stimuli, so the
/// strongest responder has weight 1. Then `g_k = w_k` and
/// `BW_k = beta · base_bandwidth_hz`. Harmonic filters copy their
/// fundamental's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankShape {
    pub gamma: f64,
    pub beta: f64,
    pub base_bandwidth_hz: f64,
}

impl Default for BankShape {
    fn default() -> Self {
        BankShape {
            gamma: 1.0,
            beta: 1.0,
            base_bandwidth_hz: 2.0,
        }
    }
}

impl BankShape {
    /// `(gains, bandwidths)`, each of length `2K`.
    pub fn parameters(
        &self,
        stimuli: &[f64],
        profile: &ResponseProfile,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(self.beta > 0.0 && self.base_bandwidth_hz > 0.0 && self.gamma.is_finite()) {
            return Err(Error::NonPositiveParameter(format!("bank shape {self:?}")));
        }
        let amps = stimuli
            .iter()
            .map(|&f| profile.amplitude(f))
            .collect::<Result<Vec<_>>>()?;
        let a_max = amps.iter().copied().fold(0.0, f64::max);
        let weights: Vec<f64> = amps.iter().map(|a| (a_max / a).powf(self.gamma)).collect();
        let gains: Vec<f64> = weights.iter().chain(&weights).copied().collect();
        let bws = vec![self.beta * self.base_bandwidth_hz; gains.len()];
        Ok((gains, bws))
    }

    pub fn build(
        &self,
        stimuli: &[f64],
        profile: &ResponseProfile,
        sampling_rate_hz: f64,
    ) -> Result<FilterBank> {
        let (g, bw) = self.parameters(stimuli, profile)?;
        build_bifb(stimuli, &g, &bw, sampling_rate_hz)
    }
}

/// Spectral features of one segment, with optional provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    #[serde(default)]
    pub trial_id: Option<String>,
    #[serde(default)]
    pub segment: Option<usize>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector {
            values,
            trial_id: None,
            segment: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Precomputed filter responses on one spectrum grid.
///
/// Only bins with non-zero response are stored, so repeated extraction on
/// spectra of the same shape is a short sparse dot product per filter.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    n_bins: usize,
    bin_resolution_hz: f64,
    weights: Vec<Vec<(usize, f64)>>,
}

impl FeatureExtractor {
    pub fn new(bank: &FilterBank, n_bins: usize, bin_resolution_hz: f64) -> Result<Self> {
        let max_hz = (n_bins - 1) as f64 * bin_resolution_hz;
        let upper = bank.upper_edge_hz();
        if upper > max_hz + EDGE_EPS {
            return Err(Error::BankExceedsSpectrumRange {
                upper_hz: upper,
                max_hz,
            });
        }
        let weights = bank
            .filters
            .iter()
            .map(|filt| {
                (0..n_bins)
                    .filter_map(|b| {
                        let h = filt.response(b as f64 * bin_resolution_hz);
                        (h != 0.0).then_some((b, h))
                    })
                    .collect()
            })
            .collect();
        Ok(FeatureExtractor {
            n_bins,
            bin_resolution_hz,
            weights,
        })
    }

    pub fn for_spectrum(bank: &FilterBank, spec: &Spectrum) -> Result<Self> {
        Self::new(bank, spec.power.len(), spec.bin_resolution_hz)
    }

    pub fn extract(&self, spec: &Spectrum) -> Result<FeatureVector> {
        if spec.power.len() != self.n_bins || spec.bin_resolution_hz != self.bin_resolution_hz {
            return Err(Error::DimensionMismatch {
                expected: self.n_bins,
                got: spec.power.len(),
            });
        }
        Ok(FeatureVector::new(
            self.weights
                .iter()
                .map(|w| w.iter().map(|&(b, h)| spec.power[b] * h).sum())
                .collect(),
        ))
    }
}

/// `x_i = Σ_f S[f] · H_i[f]` over the spectrum's DFT bins.
pub fn extract_features(spec: &Spectrum, bank: &FilterBank) -> Result<FeatureVector> {
    FeatureExtractor::for_spectrum(bank, spec)?.extract(spec)
}
