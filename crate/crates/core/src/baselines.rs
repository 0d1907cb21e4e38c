//! Training-free comparison recognizers: harmonic PSDA and CCA.

use std::f64::consts::PI;

use crate::classify::argmax;
use crate::dsp::Spectrum;
use crate::error::{Error, Result};
use crate::filterbank::{FeatureExtractor, Filter, FilterBank, FilterKind, UnitFilter};
use crate::linalg::{jacobi_eigen, SquareMatrix};

/// Relative ridge added to CCA's diagonal covariance blocks.
pub const CCA_RIDGE: f64 = 1e-10;

fn unit_bank(stimuli: &[f64], half_width_hz: f64) -> Result<FilterBank> {
    let filters = stimuli
        .iter()
        .copied()
        .chain(stimuli.iter().map(|f| 2.0 * f))
        .map(|c| UnitFilter::new(c, half_width_hz).map(Filter::Unit))
        .collect::<Result<Vec<_>>>()?;
    Ok(FilterBank {
        kind: FilterKind::Unit,
        stimuli_hz: stimuli.to_vec(),
        filters,
    })
}

/// Band energy at each stimulus: fundamental band plus second-harmonic band.
#[derive(Debug, Clone)]
pub struct Psda {
    extractor: FeatureExtractor,
    k: usize,
}

impl Psda {
    pub fn new(
        stimuli: &[f64],
        half_width_hz: f64,
        n_bins: usize,
        bin_resolution_hz: f64,
    ) -> Result<Self> {
        let bank = unit_bank(stimuli, half_width_hz)?;
        Ok(Psda {
            extractor: FeatureExtractor::new(&bank, n_bins, bin_resolution_hz)?,
            k: stimuli.len(),
        })
    }

    pub fn scores(&self, spec: &Spectrum) -> Result<Vec<f64>> {
        let x = self.extractor.extract(spec)?.values;
        Ok((0..self.k).map(|i| x[i] + x[self.k + i]).collect())
    }

    pub fn recognize(&self, spec: &Spectrum) -> Result<usize> {
        Ok(argmax(&self.scores(spec)?))
    }
}

/// Class with the largest fundamental-plus-harmonic band energy
/// (lowest index on ties).
pub fn psda_recognize(spec: &Spectrum, stimuli: &[f64], half_width_hz: f64) -> Result<usize> {
    Psda::new(
        stimuli,
        half_width_hz,
        spec.power.len(),
        spec.bin_resolution_hz,
    )?
    .recognize(spec)
}

/// Sine/cosine templates at `h · f` for `h = 1..=harmonics`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaReference {
    pub freq_hz: f64,
    pub harmonics: usize,
    /// `2 · harmonics` rows: `sin(h)`, `cos(h)` for each harmonic in turn.
    pub rows: Vec<Vec<f64>>,
}

impl CcaReference {
    pub fn new(
        freq_hz: f64,
        harmonics: usize,
        sampling_rate_hz: f64,
        n_samples: usize,
    ) -> Result<Self> {
        if harmonics == 0 {
            return Err(Error::NonPositiveParameter("CCA harmonic count".into()));
        }
        let nyquist = sampling_rate_hz / 2.0;
        if harmonics as f64 * freq_hz >= nyquist {
            return Err(Error::NyquistViolation {
                what: format!("CCA reference harmonic {harmonics}"),
                freq_hz: harmonics as f64 * freq_hz,
                nyquist_hz: nyquist,
            });
        }
        let mut rows = Vec::with_capacity(2 * harmonics);
        for h in 1..=harmonics {
            let w = 2.0 * PI * h as f64 * freq_hz / sampling_rate_hz;
            rows.push((0..n_samples).map(|n| (w * n as f64).sin()).collect());
            rows.push((0..n_samples).map(|n| (w * n as f64).cos()).collect());
        }
        Ok(CcaReference {
            freq_hz,
            harmonics,
            rows,
        })
    }
}

fn centered(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            r.iter().map(|v| v - mean).collect()
        })
        .collect()
}

fn cross_cov(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t = a[0].len() as f64;
    a.iter()
        .map(|ra| {
            b.iter()
                .map(|rb| ra.iter().zip(rb).map(|(x, y)| x * y).sum::<f64>() / t)
                .collect()
        })
        .collect()
}

fn regularized(rows: &[Vec<f64>], what: &str) -> Result<SquareMatrix> {
    let mut c = SquareMatrix::from_rows(&cross_cov(rows, rows));
    let n = c.size();
    let tr = c.trace();
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::DegenerateCovariance(format!(
            "{what} has zero variance"
        )));
    }
    let ridge = CCA_RIDGE * tr / n as f64;
    for i in 0..n {
        c[(i, i)] += ridge;
    }
    Ok(c)
}

/// Largest canonical correlation between the row spaces of `a` and `b`
/// (`channels × time` each).
///
/// Solved as an ordinary symmetric eigenproblem on the smaller side:
/// `ρ² = λ_max(Cxx^{-1/2} Cxy Cyy^{-1} Cyx Cxx^{-1/2})`.
pub fn cca_correlation(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::DegenerateCovariance("empty signal set".into()));
    }
    let t = a[0].len();
    if a.iter().chain(b).any(|r| r.len() != t) {
        return Err(Error::DimensionMismatch {
            expected: t,
            got: b[0].len(),
        });
    }
    if t <= a.len() || t <= b.len() {
        return Err(Error::DegenerateCovariance(format!(
            "{t} samples for {} x {} signals",
            a.len(),
            b.len()
        )));
    }
    let (x, y) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let (x, y) = (centered(x), centered(y));

    let cxx = regularized(&x, "first signal set")?;
    let cyy = regularized(&y, "second signal set")?;
    let cxy = cross_cov(&x, &y);

    let wx = jacobi_eigen(&cxx).apply_function(|l| 1.0 / l.max(f64::MIN_POSITIVE).sqrt());
    let cyy_inv = jacobi_eigen(&cyy).apply_function(|l| 1.0 / l.max(f64::MIN_POSITIVE));

    // K = Wx · Cxy  (p × q)
    let p = x.len();
    let q = y.len();
    let k: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..q)
                .map(|j| (0..p).map(|l| wx[(i, l)] * cxy[l][j]).sum())
                .collect()
        })
        .collect();
    // M = K · Cyy⁻¹ · Kᵀ  (p × p)
    let kc: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..q)
                .map(|j| (0..q).map(|l| k[i][l] * cyy_inv[(l, j)]).sum())
                .collect()
        })
        .collect();
    let mut m = SquareMatrix::zeros(p);
    for i in 0..p {
        for j in 0..p {
            m[(i, j)] = (0..q).map(|l| kc[i][l] * k[j][l]).sum();
        }
    }
    let rho2 = jacobi_eigen(&m).max_value();
    Ok(rho2.clamp(0.0, 1.0).sqrt())
}

/// CCA against a fixed set of references for segments of one length.
#[derive(Debug, Clone)]
pub struct Cca {
    pub references: Vec<CcaReference>,
}

impl Cca {
    pub fn new(
        stimuli: &[f64],
        harmonics: usize,
        sampling_rate_hz: f64,
        n_samples: usize,
    ) -> Result<Self> {
        Ok(Cca {
            references: stimuli
                .iter()
                .map(|&f| CcaReference::new(f, harmonics, sampling_rate_hz, n_samples))
                .collect::<Result<_>>()?,
        })
    }

    pub fn correlations(&self, eeg: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.references
            .iter()
            .map(|r| cca_correlation(eeg, &r.rows))
            .collect()
    }

    pub fn recognize(&self, eeg: &[Vec<f64>]) -> Result<usize> {
        Ok(argmax(&self.correlations(eeg)?))
    }
}

/// `(class, ρ per stimulus)` for one multichannel window.
pub fn cca_recognize(
    eeg: &[Vec<f64>],
    stimuli: &[f64],
    harmonics: usize,
    sampling_rate_hz: f64,
) -> Result<(usize, Vec<f64>)> {
    let n = eeg.first().map_or(0, Vec::len);
    let cca = Cca::new(stimuli, harmonics, sampling_rate_hz, n)?;
    let rhos = cca.correlations(eeg)?;
    Ok((argmax(&rhos), rhos))
}
