//! Second-order-section IIR filters and zero-phase application.

use std::f64::consts::PI;

/// One normalized biquad section (`a0 == 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn from_raw(b: [f64; 3], a: [f64; 3]) -> Self {
        Biquad {
            b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]],
            a: [a[1] / a[0], a[2] / a[0]],
        }
    }

    /// Bilinear lowpass section with corner `fc` prewarped and quality `q`.
    pub fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn highpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn notch(f0: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw([1.0, -2.0 * c, 1.0], [1.0 + alpha, -2.0 * c, 1.0 - alpha])
    }

    /// Magnitude response at `f` Hz.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let (num_re, num_im) = (
            self.b[0] + self.b[1] * w.cos() + self.b[2] * (2.0 * w).cos(),
            -(self.b[1] * w.sin() + self.b[2] * (2.0 * w).sin()),
        );
        let (den_re, den_im) = (
            1.0 + self.a[0] * w.cos() + self.a[1] * (2.0 * w).cos(),
            -(self.a[0] * w.sin() + self.a[1] * (2.0 * w).sin()),
        );
        (num_re.hypot(num_im)) / (den_re.hypot(den_im))
    }

    /// Gain at DC.
    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Runs the section with its state at steady state for a constant
    /// input `initial`, so a signal starting at that level causes no step.
    fn run(&self, x: &mut [f64], initial: f64) {
        // transposed direct form II
        let y0 = self.dc_gain() * initial;
        let mut z2 = self.b[2] * initial - self.a[1] * y0;
        let mut z1 = self.b[1] * initial - self.a[0] * y0 + z2;
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * out + z2;
            z2 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }
}

/// A cascade of biquads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

/// Quality factors of the biquads that realize an even-order Butterworth
/// prototype.
fn butterworth_qs(order: usize) -> impl Iterator<Item = f64> {
    (0..order / 2).map(move |k| {
        let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
        1.0 / (2.0 * theta.cos())
    })
}

impl Sos {
    /// `order` must be even and at least 2.
    pub fn butterworth_lowpass(order: usize, fc: f64, fs: f64) -> Self {
        Sos {
            sections: butterworth_qs(order)
                .map(|q| Biquad::lowpass(fc, fs, q))
                .collect(),
        }
    }

    pub fn butterworth_highpass(order: usize, fc: f64, fs: f64) -> Self {
        Sos {
            sections: butterworth_qs(order)
                .map(|q| Biquad::highpass(fc, fs, q))
                .collect(),
        }
    }

    pub fn push(&mut self, other: Sos) {
        self.sections.extend(other.sections);
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        self.sections.iter().map(|s| s.magnitude(f, fs)).product()
    }

    /// Causal filtering from rest.
    pub fn filter_in_place(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x, 0.0);
        }
    }

    /// Causal filtering with every section at steady state for the first
    /// input sample.
    fn filter_from_first(&self, x: &mut [f64]) {
        let mut level = x.first().copied().unwrap_or(0.0);
        for s in &self.sections {
            s.run(x, level);
            level *= s.dc_gain();
        }
    }

    /// Forward-backward filtering. Each end is extended by `padlen`
    /// samples of autoregressive extrapolation before filtering and the
    /// extension is cut off afterwards; each pass starts at steady state for
    /// its first sample.
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Vec<f64> {
        let n = x.len();
        if n == 0 || self.is_empty() {
            return x.to_vec();
        }
        let (mut ext, pad) = extend_edges(x, padlen);
        self.filter_from_first(&mut ext);
        ext.reverse();
        self.filter_from_first(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Order of the edge-extrapolation model.
const AR_ORDER: usize = 24;

/// Prediction-error filter `[1, a_1, .., a_p]` fitted by Burg's method,
/// which keeps every reflection coefficient inside the unit circle.
pub fn burg_ar(x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let mut f = x.to_vec();
    let mut b = x.to_vec();
    let mut a = vec![1.0];
    for m in 0..order.min(n.saturating_sub(1)) {
        let (mut num, mut den) = (0.0, 0.0);
        for i in (m + 1)..n {
            num += f[i] * b[i - 1];
            den += f[i] * f[i] + b[i - 1] * b[i - 1];
        }
        if den <= f64::MIN_POSITIVE {
            break;
        }
        let k = -2.0 * num / den;
        for i in ((m + 1)..n).rev() {
            let fi = f[i];
            f[i] = fi + k * b[i - 1];
            b[i] = b[i - 1] + k * fi;
        }
        let prev = a.clone();
        a.push(0.0);
        for j in 1..a.len() {
            a[j] += k * prev[prev.len() - j];
        }
    }
    a
}

/// Continues `x` by `len` samples with an AR model fitted to its last
/// `fit_len` samples (mean removed).
fn extrapolate(x: &[f64], fit_len: usize, len: usize) -> Vec<f64> {
    let tail = &x[x.len() - fit_len.min(x.len())..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let mut hist: Vec<f64> = tail.iter().map(|v| v - mean).collect();
    let a = burg_ar(&hist, AR_ORDER);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let t = hist.len();
        let v = -(1..a.len()).map(|j| a[j] * hist[t - j]).sum::<f64>();
        hist.push(v);
        out.push(v + mean);
    }
    out
}

/// `(extended signal, pad length)`. Short signals fall back to even
/// reflection, clamped to the signal length.
fn extend_edges(x: &[f64], padlen: usize) -> (Vec<f64>, usize) {
    let n = x.len();
    if n < 4 * AR_ORDER {
        let pad = padlen.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| x[n - 1 - i]));
        return (ext, pad);
    }
    let fit = (4 * padlen).max(8 * AR_ORDER);
    let reversed: Vec<f64> = x.iter().rev().copied().collect();
    let mut ext = extrapolate(&reversed, fit, padlen);
    ext.reverse();
    ext.extend_from_slice(x);
    ext.extend(extrapolate(x, fit, padlen));
    (ext, padlen)
}
