//! Diagnostics and experiment protocols.
//!
//! Everything here treats a trained agent (or any other policy) as frozen:
//! classifier-based conditional-mutual-information estimation with analytic
//! Gaussian oracles, the correlation-shift generalisation harness, a
//! colour-robustness grid, latent-factor association probes, and
//! integrated-gradients attributions.

mod attribution;
mod cmi;
mod colours;
mod policies;
mod probe;
mod shift;

pub use attribution::{integrated_gradients, AttributionMap};
pub use cmi::{estimate_cmi, gaussian_fixture, CmiEstimate, CmiEstimatorConfig, CmiSamples, GaussianFixture};
pub use colours::{colour_robustness, ColourRobustnessReport};
pub use policies::{AgentPolicy, ColourCuePolicy, DecodedFactors, RandomPolicy, WidthOraclePolicy};
pub use probe::{latent_factor_probe, FactorLabel, ProbeReport};
pub use shift::{
    cell_name,
    evaluate_cells, evaluate_policy, shift_eval, ActionPolicy, CellSummary, EpisodeOutcome,
    EpisodeRecord, PhaseSummary, ShiftReport,
};
