//! One-vs-all regularized logistic regression and the t-of-T decision rule.
//!
//! For class `k` the hypothesis is `h_k(x) = sigmoid(θ_kᵀ x̃)` with the
//! bias-augmented feature vector `x̃ = [1, x_1, …, x_2K]`. Each `θ_k` minimizes
//!
//! ```text
//! J(θ) = (1/M) Σ_m [ -y_m log h(x̃_m) - (1 - y_m) log(1 - h(x̃_m)) ]
//!        + (λ / 2M) Σ_{j≥1} θ_j²
//! ```
//!
//! by fixed-step gradient descent from all-zero weights. The bias `θ_0` is
//! not penalized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::FeatureVector;

/// Lower clamp on the logit; `exp(-744)` is still a positive subnormal.
const MIN_LOGIT: f64 = -744.0;

/// Logistic function, evaluated without overflow for any finite `z`.
///
/// Never returns exactly zero: very negative inputs saturate at the smallest
/// subnormal `exp(-744)`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.max(MIN_LOGIT).exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logit(theta: &[f64], x: &[f64]) -> f64 {
    theta[0] + theta[1..].iter().zip(x).map(|(t, v)| t * v).sum::<f64>()
}

fn check_shapes(theta: &[f64], features: &[Vec<f64>], targets: &[bool]) {
    assert!(!features.is_empty(), "cost needs at least one example");
    assert_eq!(features.len(), targets.len(), "one target per example");
    assert!(
        features.iter().all(|x| x.len() + 1 == theta.len()),
        "theta must be one longer than every feature vector"
    );
}

/// Regularized cross-entropy of one binary problem.
pub fn cost(theta: &[f64], features: &[Vec<f64>], targets: &[bool], lambda: f64) -> f64 {
    check_shapes(theta, features, targets);
    let m = features.len() as f64;
    let data: f64 = features
        .iter()
        .zip(targets)
        .map(|(x, &y)| {
            let z = logit(theta, x);
            // -ln h(z) = softplus(-z), -ln(1 - h(z)) = softplus(z)
            if y {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    let penalty: f64 = theta[1..].iter().map(|t| t * t).sum();
    data / m + lambda / (2.0 * m) * penalty
}

/// Analytic gradient of [`cost`].
pub fn gradient(theta: &[f64], features: &[Vec<f64>], targets: &[bool], lambda: f64) -> Vec<f64> {
    check_shapes(theta, features, targets);
    let m = features.len() as f64;
    let mut g = vec![0.0; theta.len()];
    for (x, &y) in features.iter().zip(targets) {
        let err = sigmoid(logit(theta, x)) - if y { 1.0 } else { 0.0 };
        g[0] += err;
        for (gj, xj) in g[1..].iter_mut().zip(x) {
            *gj += err * xj;
        }
    }
    for gj in &mut g {
        *gj /= m;
    }
    for (gj, tj) in g[1..].iter_mut().zip(&theta[1..]) {
        *gj += lambda / m * tj;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once one step lowers the cost by less than this.
    pub convergence_tol: f64,
    pub lambda: f64,
    /// Centre and scale features with training-set statistics.
    pub feature_standardization: bool,
    pub scaling: FeatureScaling,
}

/// How standardization scales features after centring them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScaling {
    /// One divisor for every feature, so their relative sizes survive.
    #[default]
    Shared,
    /// Z-score: each feature by its own standard deviation.
    PerFeature,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            max_iterations: 5000,
            convergence_tol: 1e-9,
            lambda: 1.0,
            feature_standardization: true,
            scaling: FeatureScaling::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.convergence_tol > 0.0 && self.max_iterations > 0) {
            return Err(Error::InvalidTrainConfig(
                "learning_rate, convergence_tol and max_iterations must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidTrainConfig(format!("lambda {}", self.lambda)));
        }
        Ok(())
    }
}

/// Result of minimizing one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFit {
    pub theta: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Gradient descent on one binary problem; returns the lowest-cost iterate.
pub fn fit_binary(features: &[Vec<f64>], targets: &[bool], cfg: &TrainConfig) -> BinaryFit {
    let dim = features[0].len() + 1;
    let mut theta = vec![0.0; dim];
    let mut current = cost(&theta, features, targets, cfg.lambda);
    let mut best = (theta.clone(), current);
    for it in 1..=cfg.max_iterations {
        let g = gradient(&theta, features, targets, cfg.lambda);
        for (t, gj) in theta.iter_mut().zip(&g) {
            *t -= cfg.learning_rate * gj;
        }
        let next = cost(&theta, features, targets, cfg.lambda);
        let decrease = current - next;
        if next < best.1 {
            best = (theta.clone(), next);
        }
        current = next;
        if decrease < cfg.convergence_tol {
            return BinaryFit {
                theta: best.0,
                cost: best.1,
                iterations: it,
                converged: decrease >= 0.0,
            };
        }
    }
    BinaryFit {
        theta: best.0,
        cost: best.1,
        iterations: cfg.max_iterations,
        converged: false,
    }
}

/// Affine map `(x - mean) / scale`, per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population statistics; constant features get scale 1. With
    /// [`FeatureScaling::Shared`] every feature is divided by the root mean
    /// of the per-feature variances.
    pub fn fit(features: &[Vec<f64>], scaling: FeatureScaling) -> Self {
        let m = features.len() as f64;
        let d = features[0].len();
        let mut mean = vec![0.0; d];
        for x in features {
            for (a, v) in mean.iter_mut().zip(x) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= m);
        let mut var = vec![0.0; d];
        for x in features {
            for ((s, v), mu) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - mu).powi(2);
            }
        }
        let usable = |sd: f64| if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
        let scale = match scaling {
            FeatureScaling::PerFeature => var.into_iter().map(|s| usable((s / m).sqrt())).collect(),
            FeatureScaling::Shared => {
                let pooled = usable((var.iter().sum::<f64>() / (m * d as f64)).sqrt());
                vec![pooled; d]
            }
        };
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (mu, s))| (v - mu) / s)
            .collect()
    }
}

/// `K` one-vs-all weight vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvaModel {
    pub class_frequencies_hz: Vec<f64>,
    pub lambda: f64,
    /// One bias-augmented weight vector per class.
    pub thetas: Vec<Vec<f64>>,
    #[serde(default)]
    pub standardization: Option<Standardizer>,
    /// Whether each class's descent met the tolerance before the cap.
    #[serde(default)]
    pub converged: Vec<bool>,
}

impl OvaModel {
    pub fn n_classes(&self) -> usize {
        self.thetas.len()
    }

    pub fn n_features(&self) -> usize {
        self.thetas.first().map_or(0, |t| t.len() - 1)
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: OvaModel = serde_json::from_str(text)?;
        if m.thetas.len() != m.class_frequencies_hz.len()
            || m.thetas.iter().flatten().any(|t| !t.is_finite())
        {
            return Err(Error::InvalidConfig(
                "model weights are inconsistent".into(),
            ));
        }
        Ok(m)
    }

    /// Raw scores `θ_kᵀ x̃` for each class.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let xs;
        let x = match &self.standardization {
            Some(s) => {
                xs = s.apply(x);
                &xs[..]
            }
            None => x,
        };
        Ok(self.thetas.iter().map(|t| logit(t, x)).collect())
    }
}

/// Trains one binary classifier per class on labeled feature vectors.
///
/// Labels are class indices into `class_frequencies_hz`.
pub fn train_ova(
    features: &[Vec<f64>],
    labels: &[usize],
    class_frequencies_hz: &[f64],
    cfg: &TrainConfig,
) -> Result<OvaModel> {
    cfg.validate()?;
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch(features.len(), labels.len()));
    }
    let k = class_frequencies_hz.len();
    for class in 0..k {
        if !labels.contains(&class) {
            return Err(Error::MissingClass(class));
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::MissingClass(bad));
    }
    let d = features[0].len();
    if let Some(x) = features.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }

    let standardization = cfg
        .feature_standardization
        .then(|| Standardizer::fit(features, cfg.scaling));
    let transformed: Vec<Vec<f64>>;
    let data = match &standardization {
        Some(s) => {
            transformed = features.iter().map(|x| s.apply(x)).collect();
            &transformed
        }
        None => features,
    };

    let mut thetas = Vec::with_capacity(k);
    let mut converged = Vec::with_capacity(k);
    for class in 0..k {
        let targets: Vec<bool> = labels.iter().map(|&l| l == class).collect();
        let fit = fit_binary(data, &targets, cfg);
        if !fit.converged {
            log::warn!(
                "class {class}: gradient descent stopped after {} iterations without converging (cost {})",
                fit.iterations,
                fit.cost
            );
        }
        thetas.push(fit.theta);
        converged.push(fit.converged);
    }
    Ok(OvaModel {
        class_frequencies_hz: class_frequencies_hz.to_vec(),
        lambda: cfg.lambda,
        thetas,
        standardization,
        converged,
    })
}

/// Candidate class for one feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub class: usize,
    /// Independent per-class sigmoid outputs; they need not sum to one.
    pub probabilities: Vec<f64>,
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Picks the class with the highest hypothesis value. The argmax is taken
/// on the logits, which orders identically to the sigmoid outputs but does
/// not saturate.
pub fn predict_candidate(model: &OvaModel, x: &FeatureVector) -> Result<Candidate> {
    let scores = model.scores(&x.values)?;
    Ok(Candidate {
        class: argmax(&scores),
        probabilities: scores.iter().map(|&z| sigmoid(z)).collect(),
    })
}

/// Requires the same candidate `t_required` times within the last
/// `window_t` candidates. At the start of a stream the window is whatever
/// history exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionRule {
    pub t_required: usize,
    pub window_t: usize,
}

impl Default for DecisionRule {
    fn default() -> Self {
        DecisionRule {
            t_required: 3,
            window_t: 4,
        }
    }
}

impl DecisionRule {
    pub fn new(t_required: usize, window_t: usize) -> Result<Self> {
        let r = DecisionRule {
            t_required,
            window_t,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_required == 0 || self.t_required > self.window_t {
            return Err(Error::InvalidConfig(format!(
                "decision rule needs 1 <= t ({}) <= T ({})",
                self.t_required, self.window_t
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub class: usize,
    /// Position in the candidate stream where the rule first held.
    pub index: usize,
}

/// Scans candidates in order and returns the first point where some class
/// occurs at least `t` times among the last `T` candidates.
pub fn decide(candidates: &[usize], rule: &DecisionRule) -> Option<Decision> {
    let mut counts: Vec<usize> = Vec::new();
    for (i, &c) in candidates.iter().enumerate() {
        if c >= counts.len() {
            counts.resize(c + 1, 0);
        }
        counts[c] += 1;
        if i >= rule.window_t {
            counts[candidates[i - rule.window_t]] -= 1;
        }
        // only the class just added can have crossed the threshold
        if counts[c] >= rule.t_required {
            return Some(Decision { class: c, index: i });
        }
    }
    None
}
