//! Disentangled representation learning for off-policy RL under correlated
//! nuisance factors.
//!
//! The crate bundles everything needed to reproduce the effect at desk scale:
//!
//! - [`nn`] — a minimal dense-tensor reverse-mode autodiff engine with MLP
//!   layers, layer normalisation, Adam, and Polyak updates.
//! - [`envs`] — synthetic continuous-control tasks with a nuisance colour
//!   factor correlated with the dynamics variant, plus correlation-shift
//!   scenarios (reversed / uncorrelated).
//! - [`rl`] — a SAC-style learner over stacked latent representations with
//!   twin critics, automatic entropy temperature, and optional image-shift
//!   augmentation for the critic loss.
//! - [`cmid`] — the conditional-mutual-information auxiliary task: per-feature
//!   conditioning sets, isolated-kNN permutation sampling, a conditional
//!   discriminator, and the adversarial encoder update.
//! - [`eval`] — diagnostics: classifier-based CMI estimation, shift
//!   generalisation harness, colour-robustness grid, latent/factor probes,
//!   and integrated-gradients attributions.
//! - [`run`] — experiment orchestration: key=value run configs, named RNG
//!   substreams, metrics CSVs, checkpoints, sweeps.
//!
//! The `book/` directory at the repository root walks through the concepts;
//! its code snippets are compiled and run as doc-tests (see the bottom of
//! this file).

pub mod cmid;
pub mod envs;
pub mod eval;
pub mod nn;
pub mod rl;
pub mod run;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad dimensions, out-of-range hyperparameters,
    /// malformed config files).
    #[error("configuration error: {0}")]
    Config(String),
    /// API misuse (stepping a finished episode, backward on a non-scalar).
    #[error("usage error: {0}")]
    Usage(String),
    /// A loss or activation became non-finite; the run should abort.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Checkpoint file malformed or mismatched against the current nets.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

// The guide chapters double as doc-tests so the book can never drift from
// the library API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/autodiff.md")]
    pub struct AutodiffChapter;
    #[doc = include_str!("../../../book/src/environments.md")]
    pub struct EnvironmentsChapter;
    #[doc = include_str!("../../../book/src/agent.md")]
    pub struct AgentChapter;
    #[doc = include_str!("../../../book/src/disentanglement.md")]
    pub struct DisentanglementChapter;
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    pub struct DiagnosticsChapter;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct ExperimentsChapter;
}
