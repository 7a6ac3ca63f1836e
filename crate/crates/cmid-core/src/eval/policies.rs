use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use crate::envs::{decode_observation, DecodedFactors};
use crate::envs::{Observation, PointMassParams};
use crate::rl::Agent;

use super::shift::ActionPolicy;

/// One-step deadbeat controller: pick the action that lands the next
/// position as close to the goal as the actuator allows.
fn deadbeat_action(position: f64, velocity: f64, gain: f64, params: &PointMassParams) -> f64 {
    let want_velocity = (params.goal - position) / params.dt;
    ((want_velocity - velocity) / (gain * params.dt)).clamp(-1.0, 1.0)
}

/// Colour-blind reference policy: reads the width cue to identify the
/// dynamics variant and tracks velocity from consecutive observations.
pub struct WidthOraclePolicy {
    params: PointMassParams,
    prev_position: Option<f64>,
}

impl WidthOraclePolicy {
    pub fn new(params: PointMassParams) -> Self {
        WidthOraclePolicy { params, prev_position: None }
    }
}

impl ActionPolicy for WidthOraclePolicy {
    fn begin_episode(&mut self) {
        self.prev_position = None;
    }

    fn act(&mut self, obs: &Observation) -> Vec<f64> {
        let d = decode_observation(obs);
        let velocity = match self.prev_position {
            Some(p) => (d.position - p) / self.params.dt,
            None => 0.0,
        };
        self.prev_position = Some(d.position);
        let gain = if d.width_cue < 0.3 { 1.0 } else { -1.0 };
        vec![deadbeat_action(d.position, velocity, gain, &self.params)]
    }
}

/// Spurious-shortcut policy: infers the variant from the colour instead of
/// the width cue. Optimal on the training diagonal at rho = 1, wrong-signed
/// on every reversed-phase episode.
pub struct ColourCuePolicy {
    params: PointMassParams,
    prev_position: Option<f64>,
}

impl ColourCuePolicy {
    pub fn new(params: PointMassParams) -> Self {
        ColourCuePolicy { params, prev_position: None }
    }
}

impl ActionPolicy for ColourCuePolicy {
    fn begin_episode(&mut self) {
        self.prev_position = None;
    }

    fn act(&mut self, obs: &Observation) -> Vec<f64> {
        let d = decode_observation(obs);
        let velocity = match self.prev_position {
            Some(p) => (d.position - p) / self.params.dt,
            None => 0.0,
        };
        self.prev_position = Some(d.position);
        // Blue (low luminance / high blue channel) means variant A on the
        // training diagonal.
        let blue = match d.colour.len() {
            1 => d.colour[0] < 0.35,
            _ => d.colour[2] >= d.colour[1],
        };
        let gain = if blue { 1.0 } else { -1.0 };
        vec![deadbeat_action(d.position, velocity, gain, &self.params)]
    }
}

/// Uniform random actions.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    action_dim: usize,
}

impl RandomPolicy {
    pub fn new(rng: ChaCha8Rng, action_dim: usize) -> Self {
        RandomPolicy { rng, action_dim }
    }
}

impl ActionPolicy for RandomPolicy {
    fn begin_episode(&mut self) {}

    fn act(&mut self, _obs: &Observation) -> Vec<f64> {
        (0..self.action_dim).map(|_| self.rng.gen_range(-1.0..=1.0)).collect()
    }
}

/// Frozen trained agent acting through its latent stack; deterministic
/// (mean action) for evaluation.
pub struct AgentPolicy<'a> {
    agent: &'a Agent,
    frames: Vec<Array2<f64>>,
}

impl<'a> AgentPolicy<'a> {
    pub fn new(agent: &'a Agent) -> Self {
        AgentPolicy { agent, frames: Vec::new() }
    }
}

impl ActionPolicy for AgentPolicy<'_> {
    fn begin_episode(&mut self) {
        self.frames.clear();
    }

    fn act(&mut self, obs: &Observation) -> Vec<f64> {
        let row = Array2::from_shape_vec((1, obs.values.len()), obs.values.clone()).unwrap();
        self.frames.push(row);
        if self.frames.len() > self.agent.cfg.stack {
            self.frames.remove(0);
        }
        // Deterministic evaluation never consumes randomness.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        use rand::SeedableRng as _;
        self.agent.select_action(&self.frames, true, &mut rng)
    }
}
