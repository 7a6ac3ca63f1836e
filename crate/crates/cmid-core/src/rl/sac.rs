use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::augment::{draw_offsets, shift_with_offsets};
use super::replay::Batch;
use crate::envs::RenderMode;
use crate::nn::{soft_update, Activation, Adam, Graph, Mlp, NodeId, Param, ParamMode, Tail};
use crate::{Error, Result};

/// Guards `ln(1 - tanh(u)^2 + eps)` in the squash correction. Small enough
/// that the correction matches the numeric Jacobian to well under 1e-6.
const SQUASH_EPS: f64 = 1e-9;
const LN_2PI: f64 = 1.8378770664093453;

/// Hyperparameters of the latent-stack SAC learner.
#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub latent_dim: usize,
    /// Number of per-frame latents concatenated into the policy input.
    pub stack: usize,
    pub encoder_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub lr: f64,
    pub alpha_lr: f64,
    pub init_temperature: f64,
    pub discount: f64,
    pub critic_tau: f64,
    /// Weight on the online encoder in the momentum-encoder update.
    pub momentum_tau: f64,
    pub actor_update_freq: u64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub target_entropy: f64,
    pub augment: bool,
    pub image_pad: usize,
    pub svea_alpha: f64,
    pub svea_beta: f64,
    pub mode: RenderMode,
    pub greyscale: bool,
}

impl AgentConfig {
    pub fn stack_dim(&self) -> usize {
        self.stack * self.latent_dim
    }

    fn augmentation_active(&self) -> bool {
        self.augment && self.mode == RenderMode::Image16
    }

    fn channels(&self) -> usize {
        if self.greyscale {
            1
        } else {
            3
        }
    }
}

/// Losses produced by one update call.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
    pub alpha_loss: Option<f64>,
    pub temperature: f64,
}

/// SAC learner: encoder, momentum encoder, tanh-Gaussian actor, twin
/// critics with targets, and a learned entropy temperature.
///
/// The encoder receives gradients from the critic loss (and, when active,
/// the adversarial auxiliary loss) but never from the actor loss. The
/// momentum encoder provides both the bootstrap-target latents and the
/// conditioning representations; it changes only through Polyak averaging.
pub struct Agent {
    pub cfg: AgentConfig,
    pub encoder: Mlp,
    pub momentum_encoder: Mlp,
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_alpha: Param,
    opt_encoder: Adam,
    opt_actor: Adam,
    opt_critic: Adam,
    opt_alpha: Adam,
}

impl Agent {
    pub fn new<R: Rng>(cfg: AgentConfig, rng: &mut R) -> Result<Agent> {
        if cfg.stack == 0 {
            return Err(Error::Config("stack must be at least 1".into()));
        }
        let mut enc_dims = vec![cfg.obs_dim];
        enc_dims.extend(&cfg.encoder_hidden);
        enc_dims.push(cfg.latent_dim);
        let encoder = Mlp::new(&enc_dims, Activation::Relu, Tail::LayerNormTanh, 1.0, rng)?;
        let momentum_encoder = encoder.clone_detached();

        let mut actor_dims = vec![cfg.stack_dim()];
        actor_dims.extend(&cfg.head_hidden);
        actor_dims.push(2 * cfg.action_dim);
        let actor = Mlp::new(&actor_dims, Activation::Relu, Tail::None, 0.01, rng)?;

        let mut q_dims = vec![cfg.stack_dim() + cfg.action_dim];
        q_dims.extend(&cfg.head_hidden);
        q_dims.push(1);
        let q1 = Mlp::new(&q_dims, Activation::Relu, Tail::None, 0.01, rng)?;
        let q2 = Mlp::new(&q_dims, Activation::Relu, Tail::None, 0.01, rng)?;
        let q1_target = q1.clone_detached();
        let q2_target = q2.clone_detached();

        let log_alpha = Param::from_array(Array2::from_elem((1, 1), cfg.init_temperature.ln()));

        let opt_encoder = Adam::new(encoder.params(), cfg.lr);
        let opt_actor = Adam::new(actor.params(), cfg.lr);
        let mut critic_params = q1.params();
        critic_params.extend(q2.params());
        let opt_critic = Adam::new(critic_params, cfg.lr);
        let opt_alpha = Adam::new(vec![log_alpha.clone()], cfg.alpha_lr);

        Ok(Agent {
            cfg,
            encoder,
            momentum_encoder,
            actor,
            q1,
            q2,
            q1_target,
            q2_target,
            log_alpha,
            opt_encoder,
            opt_actor,
            opt_critic,
            opt_alpha,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.log_alpha.value()[[0, 0]].exp()
    }

    /// Concatenated per-frame latents, oldest frame first. `frames` may be
    /// shorter than the stack at episode start; the first frame is repeated
    /// to fill.
    pub fn encode_stack_values(&self, encoder: &Mlp, frames: &[Array2<f64>]) -> Array2<f64> {
        assert!(!frames.is_empty() && frames.len() <= self.cfg.stack);
        let mut latents = Vec::with_capacity(self.cfg.stack);
        let first = encoder.forward_values(&frames[0]);
        for _ in frames.len()..self.cfg.stack {
            latents.push(first.clone());
        }
        latents.push(first);
        for frame in &frames[1..] {
            latents.push(encoder.forward_values(frame));
        }
        concatenate(Axis(1), &latents.iter().map(|l| l.view()).collect::<Vec<_>>()).unwrap()
    }

    /// Taped encoder pass over a full stack of frames.
    fn encode_stack_graph(&self, g: &mut Graph, frames: &[Array2<f64>]) -> Result<NodeId> {
        assert_eq!(frames.len(), self.cfg.stack);
        let mut latents = Vec::with_capacity(frames.len());
        for frame in frames {
            let x = g.constant(frame.clone());
            latents.push(self.encoder.forward(g, x, ParamMode::Trainable)?);
        }
        Ok(g.cat_cols(&latents))
    }

    /// Maps raw actor log-std outputs into `[log_std_min, log_std_max]`.
    fn squash_log_std_values(&self, raw: &Array2<f64>) -> Array2<f64> {
        let (lo, hi) = (self.cfg.log_std_min, self.cfg.log_std_max);
        raw.mapv(|v| lo + 0.5 * (hi - lo) * (v.tanh() + 1.0))
    }

    /// Value-path actor heads: `(mean, log_std)`.
    pub fn actor_heads_values(&self, stack: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let out = self.actor.forward_values(stack);
        let da = self.cfg.action_dim;
        let mu = out.slice(ndarray::s![.., 0..da]).to_owned();
        let raw = out.slice(ndarray::s![.., da..2 * da]).to_owned();
        (mu, self.squash_log_std_values(&raw))
    }

    /// Tanh-squashed Gaussian sample and its log-probability, value path.
    pub fn sample_action_values(
        &self,
        mu: &Array2<f64>,
        log_std: &Array2<f64>,
        noise: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let std = log_std.mapv(f64::exp);
        let u = mu + &(&std * noise);
        let action = u.mapv(f64::tanh);
        let b = mu.nrows();
        let da = self.cfg.action_dim as f64;
        let mut logpi = Array2::zeros((b, 1));
        for r in 0..b {
            let mut lp = -0.5 * da * LN_2PI;
            for c in 0..mu.ncols() {
                lp += -log_std[[r, c]] - 0.5 * noise[[r, c]] * noise[[r, c]];
                let a = action[[r, c]];
                lp -= (1.0 - a * a + SQUASH_EPS).ln();
            }
            logpi[[r, 0]] = lp;
        }
        (action, logpi)
    }

    /// Deterministic (mean) or sampled action for one current frame window.
    pub fn select_action<R: Rng>(
        &self,
        frames: &[Array2<f64>],
        deterministic: bool,
        rng: &mut R,
    ) -> Vec<f64> {
        let stack = self.encode_stack_values(&self.encoder, frames);
        let (mu, log_std) = self.actor_heads_values(&stack);
        if deterministic {
            mu.row(0).mapv(f64::tanh).to_vec()
        } else {
            let noise =
                Array2::from_shape_fn(mu.dim(), |_| rng.sample::<f64, _>(StandardNormal));
            let (a, _) = self.sample_action_values(&mu, &log_std, &noise);
            a.row(0).to_vec()
        }
    }

    /// Bootstrap targets `y = r + gamma * (1-term) * (min Q_target - alpha log pi)`.
    ///
    /// Everything here is value-path (no gradients), with a fresh action
    /// sample from the current policy.
    pub fn critic_targets<R: Rng>(&self, batch: &Batch, rng: &mut R) -> Array2<f64> {
        let next_stack = self.encode_stack_values(&self.momentum_encoder, &batch.next_obs_stack);
        let (mu, log_std) = self.actor_heads_values(&next_stack);
        let noise = Array2::from_shape_fn(mu.dim(), |_| rng.sample::<f64, _>(StandardNormal));
        let (a_next, logpi) = self.sample_action_values(&mu, &log_std, &noise);
        let q_in = concatenate(Axis(1), &[next_stack.view(), a_next.view()]).unwrap();
        let q1 = self.q1_target.forward_values(&q_in);
        let q2 = self.q2_target.forward_values(&q_in);
        let alpha = self.temperature();
        let mut y = batch.reward.clone();
        for r in 0..y.nrows() {
            let qmin = q1[[r, 0]].min(q2[[r, 0]]);
            y[[r, 0]] += self.cfg.discount
                * batch.not_terminated[[r, 0]]
                * (qmin - alpha * logpi[[r, 0]]);
        }
        y
    }

    /// Builds the squared-error critic loss on a taped graph.
    ///
    /// `frames` are the observation-stack frames to encode (clean or
    /// augmented); `y` is the fixed bootstrap target.
    pub fn build_critic_loss(
        &self,
        g: &mut Graph,
        frames: &[Array2<f64>],
        action: &Array2<f64>,
        y: &Array2<f64>,
    ) -> Result<NodeId> {
        let stack = self.encode_stack_graph(g, frames)?;
        let a = g.constant(action.clone());
        let q_in = g.cat_cols(&[stack, a]);
        let yn = g.constant(y.clone());
        let mut loss = None;
        for q in [&self.q1, &self.q2] {
            let qv = q.forward(g, q_in, ParamMode::Trainable)?;
            let diff = g.sub(qv, yn);
            let sq = g.mul(diff, diff);
            let m = g.mean_all(sq);
            loss = Some(match loss {
                None => m,
                Some(prev) => g.add(prev, m),
            });
        }
        Ok(loss.unwrap())
    }

    /// One critic update; returns the scalar loss. With augmentation active
    /// the loss is `svea_alpha * L(clean) + svea_beta * L(augmented)` with a
    /// shared target; otherwise the plain clean loss.
    pub fn critic_update<R: Rng>(
        &mut self,
        batch: &Batch,
        noise_rng: &mut R,
        augment_rng: &mut R,
    ) -> Result<f64> {
        let y = self.critic_targets(batch, noise_rng);
        let mut g = Graph::new();
        let clean = self.build_critic_loss(&mut g, &batch.obs_stack, &batch.action, &y)?;
        let loss = if self.cfg.augmentation_active() {
            let offsets = draw_offsets(batch.len(), self.cfg.image_pad, augment_rng);
            let aug_frames: Vec<Array2<f64>> = batch
                .obs_stack
                .iter()
                .map(|f| shift_with_offsets(f, self.cfg.channels(), self.cfg.image_pad, &offsets))
                .collect();
            let aug = self.build_critic_loss(&mut g, &aug_frames, &batch.action, &y)?;
            let c = g.scale(clean, self.cfg.svea_alpha);
            let a = g.scale(aug, self.cfg.svea_beta);
            g.add(c, a)
        } else {
            clean
        };
        let value = g.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("critic loss {value}")));
        }
        self.encoder.zero_grads();
        self.q1.zero_grads();
        self.q2.zero_grads();
        g.backward(loss)?;
        self.opt_critic.step();
        self.opt_encoder.step();
        Ok(value)
    }

    /// Builds the actor loss `mean(alpha log pi - min Q)` on a taped graph.
    ///
    /// The latent stack enters as a constant (no encoder gradient) and the
    /// critics are frozen; gradient reaches only the actor parameters.
    /// Returns the loss node and the in-graph log-probability column.
    pub fn build_actor_loss(
        &self,
        g: &mut Graph,
        stack: &Array2<f64>,
        noise: &Array2<f64>,
    ) -> Result<(NodeId, NodeId)> {
        let da = self.cfg.action_dim;
        let s = g.constant(stack.clone());
        let out = self.actor.forward(g, s, ParamMode::Trainable)?;
        let mu = g.slice_cols(out, 0, da);
        let raw = g.slice_cols(out, da, 2 * da);
        // log_std = lo + 0.5 (hi - lo) (tanh(raw) + 1)
        let (lo, hi) = (self.cfg.log_std_min, self.cfg.log_std_max);
        let t = g.tanh(raw);
        let t1 = g.add_scalar(t, 1.0);
        let scaled = g.scale(t1, 0.5 * (hi - lo));
        let log_std = g.add_scalar(scaled, lo);

        let std = g.exp(log_std);
        let xi = g.constant(noise.clone());
        let step = g.mul(std, xi);
        let u = g.add(mu, step);
        let action = g.tanh(u);

        // log N(u | mu, std) at u = mu + std*xi collapses to
        // sum(-log_std) - 0.5 sum(xi^2) - 0.5 d ln(2 pi).
        let neg_log_std = g.neg(log_std);
        let gauss = g.sum_cols(neg_log_std);
        let const_part = {
            let mut c = Array2::zeros((stack.nrows(), 1));
            for r in 0..noise.nrows() {
                let mut acc = -0.5 * da as f64 * LN_2PI;
                for cidx in 0..noise.ncols() {
                    acc -= 0.5 * noise[[r, cidx]] * noise[[r, cidx]];
                }
                c[[r, 0]] = acc;
            }
            g.constant(c)
        };
        let gauss = g.add(gauss, const_part);
        // Squash correction: -sum ln(1 - a^2 + eps).
        let asq = g.mul(action, action);
        let neg_asq = g.neg(asq);
        let one_minus = g.add_scalar(neg_asq, 1.0 + SQUASH_EPS);
        let ln_one_minus = g.ln(one_minus);
        let corr = g.sum_cols(ln_one_minus);
        let logpi = g.sub(gauss, corr);

        let q_in = g.cat_cols(&[s, action]);
        let q1 = self.q1.forward(g, q_in, ParamMode::Frozen)?;
        let q2 = self.q2.forward(g, q_in, ParamMode::Frozen)?;
        let qmin = g.min(q1, q2);

        let alpha = self.temperature();
        let weighted = g.scale(logpi, alpha);
        let neg_q = g.neg(qmin);
        let per_sample = g.add(weighted, neg_q);
        let loss = g.mean_all(per_sample);
        Ok((loss, logpi))
    }

    /// Temperature loss `-alpha * mean(log pi + target_entropy)` with the
    /// log-probabilities held fixed.
    pub fn build_temperature_loss(&self, g: &mut Graph, logpi: &Array2<f64>) -> NodeId {
        let m = logpi.mean().unwrap() + self.cfg.target_entropy;
        let la = g.param(&self.log_alpha);
        let alpha = g.exp(la);
        g.scale(alpha, -m)
    }

    /// Actor update followed by a temperature update on the same batch.
    /// Returns `(actor_loss, alpha_loss)`.
    pub fn actor_and_temperature_update<R: Rng>(
        &mut self,
        batch: &Batch,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        let stack = self.encode_stack_values(&self.encoder, &batch.obs_stack);
        let noise = Array2::from_shape_fn((batch.len(), self.cfg.action_dim), |_| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let mut g = Graph::new();
        let (loss, logpi) = self.build_actor_loss(&mut g, &stack, &noise)?;
        let actor_loss = g.scalar(loss);
        if !actor_loss.is_finite() {
            return Err(Error::NonFinite(format!("actor loss {actor_loss}")));
        }
        let logpi_values = g.value(logpi).clone();
        self.actor.zero_grads();
        g.backward(loss)?;
        self.opt_actor.step();

        let mut g = Graph::new();
        let aloss = self.build_temperature_loss(&mut g, &logpi_values);
        let alpha_loss = g.scalar(aloss);
        self.log_alpha.zero_grad();
        g.backward(aloss)?;
        self.opt_alpha.step();
        Ok((actor_loss, alpha_loss))
    }

    /// Polyak step for critic targets and the momentum encoder. Runs once
    /// per environment step so target trajectories are identical whether or
    /// not the auxiliary task is enabled.
    pub fn update_targets(&mut self) -> Result<()> {
        soft_update(&self.q1_target.params(), &self.q1.params(), self.cfg.critic_tau)?;
        soft_update(&self.q2_target.params(), &self.q2.params(), self.cfg.critic_tau)?;
        soft_update(
            &self.momentum_encoder.params(),
            &self.encoder.params(),
            self.cfg.momentum_tau,
        )?;
        Ok(())
    }

    /// Optimiser handle for the encoder; the auxiliary task steps it during
    /// the adversarial update.
    pub fn encoder_optimizer(&mut self) -> &mut Adam {
        &mut self.opt_encoder
    }

    pub fn named_params(&self) -> Vec<(String, Param)> {
        let mut out = Vec::new();
        out.extend(self.encoder.named_params("encoder"));
        out.extend(self.momentum_encoder.named_params("momentum_encoder"));
        out.extend(self.actor.named_params("actor"));
        out.extend(self.q1.named_params("q1"));
        out.extend(self.q2.named_params("q2"));
        out.extend(self.q1_target.named_params("q1_target"));
        out.extend(self.q2_target.named_params("q2_target"));
        out.push(("log_alpha".to_string(), self.log_alpha.clone()));
        out
    }

    pub fn all_finite(&self) -> bool {
        self.named_params().iter().all(|(_, p)| p.is_finite())
    }
}
