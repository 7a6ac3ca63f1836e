//! Experiment orchestration: run configs, named RNG substreams, the
//! train/shift protocol, and grid sweeps.

mod config;
mod rng;
mod runner;
mod sweep;

pub use config::{
    AgentSection, EnvSection, IoSection, ProtocolSection, RunConfig, ShiftKind, SweepAxis,
    SweepSection,
};
pub use rng::{eval_rng, stream_rng, Stream};
pub use runner::{run_train, verify_run_dir, RunSummary, SeedSummary, ZeroShotSummary};
pub use sweep::{run_sweep, SweepSummary};
