use rand::Rng;

use super::{render, sample_episode_factors, CorrelationSpec, FactorState, Observation, RenderMode, Rgb, Variant};
use crate::{Error, Result};

/// Dynamics parameters of the point-mass task.
///
/// A correct-variant feedback policy reaches a mean return near -5 at these
/// defaults; a wrong-sign policy lands near -150.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PointMassParams {
    pub dt: f64,
    pub goal: f64,
    pub horizon: usize,
    /// Start positions are drawn uniformly from `[-start_range, start_range]`.
    pub start_range: f64,
}

impl Default for PointMassParams {
    fn default() -> Self {
        PointMassParams { dt: 0.2, goal: 0.8, horizon: 100, start_range: 0.5 }
    }
}

/// Point-mass task with a variant-dependent control gain.
///
/// Dynamics (semi-implicit Euler, positions clipped to `[-1, 1]`):
/// `v' = v + gain * a * dt`, `p' = p + v' * dt`, reward `-|p' - goal|`.
/// Hitting a wall zeroes the velocity. The colour factor never enters the
/// dynamics or the reward.
#[derive(Debug, Clone)]
pub struct PointMass {
    pub params: PointMassParams,
    pub spec: CorrelationSpec,
    pub mode: RenderMode,
    state: Option<FactorState>,
}

impl PointMass {
    pub fn new(params: PointMassParams, spec: CorrelationSpec, mode: RenderMode) -> Self {
        PointMass { params, spec, mode, state: None }
    }

    /// Switches the correlation phase for subsequent episodes (the running
    /// episode, if any, is unaffected).
    pub fn set_spec(&mut self, spec: CorrelationSpec) {
        self.spec = spec;
    }

    pub fn action_dim(&self) -> usize {
        1
    }

    pub fn obs_dim(&self) -> usize {
        render::obs_dim(self.mode, self.spec.greyscale)
    }

    /// Current ground-truth factors, if an episode is active.
    pub fn factors(&self) -> Option<&FactorState> {
        self.state.as_ref()
    }

    /// Starts an episode with factors drawn from the correlation spec.
    pub fn reset<R: Rng>(&mut self, rng: &mut R) -> Observation {
        let (variant, colour) = sample_episode_factors(&self.spec, rng);
        self.reset_with_factors(variant, colour, rng)
    }

    /// Starts an episode with forced factors (per-cell evaluation and the
    /// colour-robustness grid).
    pub fn reset_with_factors<R: Rng>(
        &mut self,
        variant: Variant,
        colour: Rgb,
        rng: &mut R,
    ) -> Observation {
        let position = rng.gen_range(-self.params.start_range..=self.params.start_range);
        let state = FactorState {
            variant,
            colour,
            position,
            velocity: 0.0,
            step: 0,
            horizon: self.params.horizon,
        };
        self.state = Some(state);
        self.observe()
    }

    pub fn observe(&self) -> Observation {
        let state = self.state.as_ref().expect("no active episode");
        render::render(state, self.mode, self.spec.greyscale)
    }

    /// Advances one step. Errors if called after the episode finished.
    pub fn step(&mut self, action: &[f64]) -> Result<(Observation, f64, bool)> {
        if action.len() != 1 {
            return Err(Error::Usage(format!("point-mass expects 1-d actions, got {}", action.len())));
        }
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::Usage("step before reset".into()))?;
        if state.step >= state.horizon {
            return Err(Error::Usage("step after episode end".into()));
        }
        let a = action[0].clamp(-1.0, 1.0);
        let gain = state.variant.gain();
        state.velocity += gain * a * self.params.dt;
        state.position += state.velocity * self.params.dt;
        if state.position > 1.0 {
            state.position = 1.0;
            state.velocity = 0.0;
        } else if state.position < -1.0 {
            state.position = -1.0;
            state.velocity = 0.0;
        }
        state.step += 1;
        let reward = -(state.position - self.params.goal).abs();
        let done = state.step >= state.horizon;
        Ok((self.observe(), reward, done))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Phase;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(mode: RenderMode) -> PointMass {
        let spec = CorrelationSpec::new(0.95, Phase::Train, false).unwrap();
        PointMass::new(PointMassParams::default(), spec, mode)
    }

    #[test]
    fn zero_action_from_rest_keeps_position() {
        let mut e = env(RenderMode::FactorVector);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        e.reset(&mut rng);
        let p0 = e.factors().unwrap().position;
        let (_, r, _) = e.step(&[0.0]).unwrap();
        let f = e.factors().unwrap();
        assert_eq!(f.position, p0);
        assert_eq!(r, -(p0 - 0.8).abs());
    }

    #[test]
    fn variants_mirror_under_positive_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ea = env(RenderMode::FactorVector);
        ea.reset_with_factors(Variant::A, Rgb::blue(), &mut rng);
        let mut eb = env(RenderMode::FactorVector);
        eb.reset_with_factors(Variant::B, Rgb::blue(), &mut rng);
        // Pin both to the same start so the mirror is exact.
        let (sa, sb) = (ea.state.as_mut().unwrap(), eb.state.as_mut().unwrap());
        sa.position = 0.0;
        sb.position = 0.0;
        ea.step(&[1.0]).unwrap();
        eb.step(&[1.0]).unwrap();
        let va = ea.factors().unwrap().velocity;
        let vb = eb.factors().unwrap().velocity;
        assert_eq!(va, ea.params.dt);
        assert_eq!(vb, -va);
    }

    #[test]
    fn step_after_done_is_an_error() {
        let mut e = env(RenderMode::FactorVector);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        e.reset(&mut rng);
        for _ in 0..e.params.horizon {
            e.step(&[0.1]).unwrap();
        }
        assert!(e.step(&[0.1]).is_err());
    }

    #[test]
    fn colour_never_affects_dynamics_or_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for variant in [Variant::A, Variant::B] {
            let mut blue = env(RenderMode::FactorVector);
            blue.reset_with_factors(variant, Rgb::blue(), &mut rng);
            let mut green = env(RenderMode::FactorVector);
            green.reset_with_factors(variant, Rgb::green(), &mut rng);
            green.state.as_mut().unwrap().position = blue.factors().unwrap().position;
            for k in 0..50 {
                let a = ((k * 13 % 7) as f64 - 3.0) / 3.0;
                let (_, rb, _) = blue.step(&[a]).unwrap();
                let (_, rg, _) = green.step(&[a]).unwrap();
                assert_eq!(rb, rg);
                assert_eq!(blue.factors().unwrap().position, green.factors().unwrap().position);
                assert_eq!(blue.factors().unwrap().velocity, green.factors().unwrap().velocity);
            }
        }
    }

    #[test]
    fn variant_changes_trajectories() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ea = env(RenderMode::FactorVector);
        ea.reset_with_factors(Variant::A, Rgb::blue(), &mut rng);
        let mut eb = env(RenderMode::FactorVector);
        eb.reset_with_factors(Variant::B, Rgb::blue(), &mut rng);
        ea.state.as_mut().unwrap().position = 0.0;
        eb.state.as_mut().unwrap().position = 0.0;
        for _ in 0..5 {
            ea.step(&[0.7]).unwrap();
            eb.step(&[0.7]).unwrap();
        }
        assert_ne!(ea.factors().unwrap().position, eb.factors().unwrap().position);
    }

    /// Straight-line duplicate of the dynamics, written independently of the
    /// environment implementation.
    fn oracle_episode(variant: Variant, start: f64, actions: &[f64]) -> f64 {
        let (dt, goal) = (0.2, 0.8);
        let gain = match variant {
            Variant::A => 1.0,
            Variant::B => -1.0,
        };
        let (mut p, mut v) = (start, 0.0);
        let mut total = 0.0;
        for &a in actions {
            let a = a.clamp(-1.0, 1.0);
            v += gain * a * dt;
            p += v * dt;
            if p > 1.0 {
                p = 1.0;
                v = 0.0;
            }
            if p < -1.0 {
                p = -1.0;
                v = 0.0;
            }
            total += -(p - goal).abs();
        }
        total
    }

    #[test]
    fn random_policy_returns_match_duplicate_simulator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut diff_max: f64 = 0.0;
        for _ in 0..1000 {
            let mut e = env(RenderMode::FactorVector);
            e.reset(&mut rng);
            let variant = e.factors().unwrap().variant;
            let start = e.factors().unwrap().position;
            let actions: Vec<f64> = (0..e.params.horizon).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let mut ret = 0.0;
            for a in &actions {
                let (_, r, _) = e.step(&[*a]).unwrap();
                ret += r;
            }
            let want = oracle_episode(variant, start, &actions);
            diff_max = diff_max.max((ret - want).abs());
        }
        assert!(diff_max < 1e-9, "max return difference {diff_max}");
    }
}
