//! Steady-state visual evoked potential (SSVEP) recognition with a
//! bio-inspired triangular filter bank, plus the unit-filter, power-spectrum
//! and canonical-correlation baselines it is measured against.
//!
//! The crate is organized as a pipeline:
//!
//! - [`data`]: recordings, datasets on disk, re-referencing and filtering;
//! - [`synth`]: a synthetic SSVEP generator with a known response profile;
//! - [`dsp`]: segmentation and periodogram estimation;
//! - [`filterbank`]: filter shapes, bank construction, feature extraction;
//! - [`classify`]: one-vs-all logistic regression and the t-of-T decision rule;
//! - [`baselines`]: PSDA and CCA recognizers;
//! - [`eval`]: cross-validation, ITR, grid search and paired t-tests.
//!
//! ```
//! use bifb::eval::{loo_cv, summarize, MethodKind, PipelineConfig};
//! use bifb::synth::SynthDatasetConfig;
//!
//! let ds = SynthDatasetConfig {
//!     subjects: 1,
//!     repetitions: 3,
//!     duration_s: 6.0,
//!     ..Default::default()
//! }
//! .generate()?;
//! let cfg = PipelineConfig::for_method(MethodKind::Bifb);
//! let outcomes = loo_cv(&ds, &cfg)?;
//! let report = summarize(&outcomes, ds.n_classes())?;
//! assert_eq!(report.pooled.trials, 9);
//! # Ok::<(), bifb::Error>(())
//! ```

pub mod baselines;
pub mod classify;
pub mod data;
pub mod dsp;
mod error;
pub mod eval;
pub mod filterbank;
pub mod linalg;
pub mod synth;

pub use error::{Error, ErrorKind, Result};

// The guide's code blocks run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/filterbank.md")]
    mod filterbank {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    mod classifier {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
