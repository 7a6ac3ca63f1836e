//! SAC-style off-policy learner over latent representations.
//!
//! The encoder maps single observations to latents; the policy and critics
//! consume a concatenation of the last three latents so velocity-like
//! information is recoverable without frame stacking at the encoder input.
//! Twin critics with target networks, a tanh-squashed Gaussian actor, and an
//! automatic entropy temperature follow the usual recipe; an optional
//! SVEA-style critic loss mixes clean and shift-augmented observations.

mod augment;
mod replay;
mod sac;

pub use augment::random_shift_augment;
pub use replay::{Batch, ReplayBuffer};
pub use sac::{Agent, AgentConfig, UpdateStats};
