//! Synthetic continuous-control MDPs with a nuisance colour factor
//! correlated with the dynamics variant.
//!
//! Two dynamics variants (A and B) invert the sign of the control gain, so
//! the optimal policy for one is anti-optimal for the other. The variant is
//! visible through a width cue; the colour is visible but never affects
//! dynamics or reward. A [`CorrelationSpec`] couples variant and colour at
//! episode starts, and its phase can be switched mid-experiment to model a
//! correlation shift.

mod correlation;
mod point_mass;
mod render;

pub use correlation::{joint_table, sample_episode_factors, CorrelationSpec, Phase};
pub use point_mass::{PointMass, PointMassParams};
pub use render::{decode_observation, obs_dim, render, DecodedFactors, Observation, RenderMode, IMAGE_SIDE};

/// Dynamics variant of the controlled object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Variant {
    A,
    B,
}

impl Variant {
    /// Width of the rendered object; also the observable cue separating
    /// the variants.
    pub fn width_cue(self) -> f64 {
        match self {
            Variant::A => 0.2,
            Variant::B => 0.4,
        }
    }

    /// Control gain; A and B are mirror images.
    pub fn gain(self) -> f64 {
        match self {
            Variant::A => 1.0,
            Variant::B => -1.0,
        }
    }
}

/// RGB colour in `[0,1]^3`. Episode draws use blue/green; the robustness
/// grid uses arbitrary values.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rgb(pub [f64; 3]);

impl Rgb {
    pub const fn blue() -> Rgb {
        Rgb([0.0, 0.0, 1.0])
    }

    pub const fn green() -> Rgb {
        Rgb([0.0, 1.0, 0.0])
    }

    /// Rec. 601 luminance, used for greyscale rendering.
    pub fn luminance(self) -> f64 {
        0.299 * self.0[0] + 0.587 * self.0[1] + 0.114 * self.0[2]
    }

    pub fn is_blue(self) -> bool {
        self == Rgb::blue()
    }
}

/// Ground-truth generative factors of one environment state. Variant and
/// colour are fixed for a whole episode; kinematics evolve per step.
#[derive(Debug, Clone, Copy)]
pub struct FactorState {
    pub variant: Variant,
    pub colour: Rgb,
    pub position: f64,
    pub velocity: f64,
    pub step: usize,
    pub horizon: usize,
}
