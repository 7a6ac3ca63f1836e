use std::collections::VecDeque;

use ndarray::Array2;
use rand::Rng;

/// One sampled training batch.
///
/// `obs_stack` holds the frames feeding the current-latent stack, oldest
/// first; `next_obs_stack` the frames for the bootstrap target.
/// `prev_obs`/`prev_actions` hold `history` earlier frames of the same
/// episode, most recent first, for the conditioning set.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs_stack: Vec<Array2<f64>>,
    pub next_obs_stack: Vec<Array2<f64>>,
    pub obs: Array2<f64>,
    pub action: Array2<f64>,
    pub reward: Array2<f64>,
    pub not_terminated: Array2<f64>,
    pub prev_obs: Vec<Array2<f64>>,
    pub prev_actions: Vec<Array2<f64>>,
    pub episode_ids: Vec<u64>,
    pub step_indices: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.episode_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episode_ids.is_empty()
    }
}

#[derive(Debug)]
struct Episode {
    id: u64,
    /// T+1 observations for T recorded steps.
    obs: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    /// True termination (not a time limit) at the final step.
    terminated: bool,
}

impl Episode {
    fn steps(&self) -> usize {
        self.actions.len()
    }
}

/// Ring of whole episodes with consecutive-step sampling.
///
/// Sampling never returns a transition straddling an episode boundary: all
/// frames of a sample, including the `history` previous ones, come from one
/// episode. The oldest episode is evicted when the step count exceeds the
/// capacity.
#[derive(Debug)]
pub struct ReplayBuffer {
    episodes: VecDeque<Episode>,
    capacity: usize,
    total_steps: usize,
    next_episode_id: u64,
    obs_dim: usize,
    action_dim: usize,
    /// Earliest sampleable step index within an episode; equals the
    /// conditioning history length so every sample carries its context.
    history: usize,
    open: bool,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize, history: usize) -> Self {
        ReplayBuffer {
            episodes: VecDeque::new(),
            capacity,
            total_steps: 0,
            next_episode_id: 0,
            obs_dim,
            action_dim,
            history,
            open: false,
        }
    }

    pub fn len_steps(&self) -> usize {
        self.total_steps
    }

    pub fn begin_episode(&mut self, first_obs: Vec<f64>) {
        assert_eq!(first_obs.len(), self.obs_dim);
        self.episodes.push_back(Episode {
            id: self.next_episode_id,
            obs: vec![first_obs],
            actions: Vec::new(),
            rewards: Vec::new(),
            terminated: false,
        });
        self.next_episode_id += 1;
        self.open = true;
    }

    /// Records one step of the currently open episode.
    pub fn push_step(&mut self, action: Vec<f64>, reward: f64, next_obs: Vec<f64>, terminated: bool) {
        assert!(self.open, "push_step without begin_episode");
        assert_eq!(action.len(), self.action_dim);
        assert_eq!(next_obs.len(), self.obs_dim);
        let ep = self.episodes.back_mut().expect("open episode");
        ep.actions.push(action);
        ep.rewards.push(reward);
        ep.obs.push(next_obs);
        ep.terminated = terminated;
        self.total_steps += 1;
        while self.total_steps > self.capacity && self.episodes.len() > 1 {
            let evicted = self.episodes.pop_front().unwrap();
            self.total_steps -= evicted.steps();
        }
    }

    pub fn end_episode(&mut self) {
        self.open = false;
    }

    fn valid_count(&self, ep: &Episode) -> usize {
        ep.steps().saturating_sub(self.history)
    }

    /// Number of currently sampleable transitions.
    pub fn sampleable(&self) -> usize {
        self.episodes.iter().map(|e| self.valid_count(e)).sum()
    }

    /// Draws a batch uniformly over valid transitions.
    ///
    /// Panics if nothing is sampleable; callers gate on [`Self::sampleable`].
    pub fn sample<R: Rng>(&self, batch_size: usize, stack: usize, rng: &mut R) -> Batch {
        let total = self.sampleable();
        assert!(total > 0, "sample from empty replay buffer");
        let b = batch_size;
        let mut obs_stack = vec![Array2::zeros((b, self.obs_dim)); stack];
        let mut next_obs_stack = vec![Array2::zeros((b, self.obs_dim)); stack];
        let mut obs = Array2::zeros((b, self.obs_dim));
        let mut action = Array2::zeros((b, self.action_dim));
        let mut reward = Array2::zeros((b, 1));
        let mut not_terminated = Array2::ones((b, 1));
        let mut prev_obs = vec![Array2::zeros((b, self.obs_dim)); self.history];
        let mut prev_actions = vec![Array2::zeros((b, self.action_dim)); self.history];
        let mut episode_ids = Vec::with_capacity(b);
        let mut step_indices = Vec::with_capacity(b);

        for row in 0..b {
            let mut pick = rng.gen_range(0..total);
            let mut chosen: Option<(&Episode, usize)> = None;
            for ep in &self.episodes {
                let c = self.valid_count(ep);
                if pick < c {
                    chosen = Some((ep, self.history + pick));
                    break;
                }
                pick -= c;
            }
            let (ep, t) = chosen.expect("index within total");

            for (k, frame) in obs_stack.iter_mut().enumerate() {
                let idx = t.saturating_sub(stack - 1 - k);
                frame.row_mut(row).assign(&ndarray::ArrayView1::from(&ep.obs[idx][..]));
            }
            for (k, frame) in next_obs_stack.iter_mut().enumerate() {
                let idx = (t + 1).saturating_sub(stack - 1 - k);
                frame.row_mut(row).assign(&ndarray::ArrayView1::from(&ep.obs[idx][..]));
            }
            obs.row_mut(row).assign(&ndarray::ArrayView1::from(&ep.obs[t][..]));
            action.row_mut(row).assign(&ndarray::ArrayView1::from(&ep.actions[t][..]));
            reward[[row, 0]] = ep.rewards[t];
            if t + 1 == ep.steps() && ep.terminated {
                not_terminated[[row, 0]] = 0.0;
            }
            for k in 0..self.history {
                let idx = t - 1 - k;
                prev_obs[k].row_mut(row).assign(&ndarray::ArrayView1::from(&ep.obs[idx][..]));
                prev_actions[k]
                    .row_mut(row)
                    .assign(&ndarray::ArrayView1::from(&ep.actions[idx][..]));
            }
            episode_ids.push(ep.id);
            step_indices.push(t);
        }

        Batch {
            obs_stack,
            next_obs_stack,
            obs,
            action,
            reward,
            not_terminated,
            prev_obs,
            prev_actions,
            episode_ids,
            step_indices,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fill(buffer: &mut ReplayBuffer, episodes: usize, steps: usize) {
        // Observation encodes (episode, step) so samples are traceable.
        for e in 0..episodes {
            buffer.begin_episode(vec![e as f64, 0.0]);
            for t in 0..steps {
                buffer.push_step(vec![0.1], -1.0, vec![e as f64, (t + 1) as f64], false);
            }
            buffer.end_episode();
        }
    }

    #[test]
    fn samples_never_straddle_episode_boundaries() {
        let mut buf = ReplayBuffer::new(10_000, 2, 1, 1);
        fill(&mut buf, 7, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let batch = buf.sample(16, 3, &mut rng);
            for row in 0..batch.len() {
                let ep = batch.obs[[row, 0]];
                for frame in batch.obs_stack.iter().chain(&batch.next_obs_stack).chain(&batch.prev_obs) {
                    assert_eq!(frame[[row, 0]], ep, "frame from a different episode");
                }
                // history=1 means t >= 1 so the previous frame exists.
                assert!(batch.step_indices[row] >= 1);
                let t = batch.step_indices[row] as f64;
                assert_eq!(batch.obs[[row, 1]], t);
                assert_eq!(batch.prev_obs[0][[row, 1]], t - 1.0);
            }
        }
    }

    #[test]
    fn stack_repeats_first_frame_at_episode_start() {
        let mut buf = ReplayBuffer::new(100, 2, 1, 0);
        fill(&mut buf, 1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Sample until t=0 shows up.
        let mut seen_start = false;
        for _ in 0..100 {
            let batch = buf.sample(8, 3, &mut rng);
            for row in 0..batch.len() {
                if batch.step_indices[row] == 0 {
                    seen_start = true;
                    assert_eq!(batch.obs_stack[0][[row, 1]], 0.0);
                    assert_eq!(batch.obs_stack[1][[row, 1]], 0.0);
                    assert_eq!(batch.obs_stack[2][[row, 1]], 0.0);
                }
            }
        }
        assert!(seen_start);
    }

    #[test]
    fn capacity_evicts_oldest_episodes() {
        let mut buf = ReplayBuffer::new(25, 2, 1, 1);
        fill(&mut buf, 5, 10);
        assert!(buf.len_steps() <= 25 + 10);
        // Oldest episodes must be gone.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let batch = buf.sample(8, 3, &mut rng);
            for row in 0..batch.len() {
                assert!(batch.obs[[row, 0]] >= 2.0, "evicted episode sampled");
            }
        }
    }

    #[test]
    fn terminal_flag_masks_bootstrap() {
        let mut buf = ReplayBuffer::new(100, 2, 1, 0);
        buf.begin_episode(vec![0.0, 0.0]);
        buf.push_step(vec![0.0], -1.0, vec![0.0, 1.0], false);
        buf.push_step(vec![0.0], -1.0, vec![0.0, 2.0], true);
        buf.end_episode();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = buf.sample(64, 3, &mut rng);
        for row in 0..batch.len() {
            let expected = if batch.step_indices[row] == 1 { 0.0 } else { 1.0 };
            assert_eq!(batch.not_terminated[[row, 0]], expected);
        }
    }
}
