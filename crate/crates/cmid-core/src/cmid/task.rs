use ndarray::{concatenate, Array2, Axis};
use rand::Rng;

use super::conditioning::build_conditioning;
use super::knn::knn_permute;
use super::losses::{adversarial_loss, discriminator_loss};
use crate::nn::{Activation, Adam, Graph, Mlp, ParamMode, Tail};
use crate::rl::{random_shift_augment, Agent, Batch};
use crate::{Error, Result};

/// Conditional (default) or unconditional variant of the auxiliary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CmidVariant {
    Cmid,
    Mi,
}

/// Hyperparameters of the auxiliary task.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CmidConfig {
    pub enabled: bool,
    /// Adversarial loss coefficient.
    pub alpha: f64,
    /// Neighbour count for the permutation sampler.
    pub k: usize,
    /// Conditioning history length; 0 only for the MI variant.
    pub history: usize,
    /// Weight on the online encoder in the momentum-encoder update.
    pub momentum_new_weight: f64,
    pub variant: CmidVariant,
    pub disc_lr: f64,
    /// Auxiliary update every `cadence` environment steps.
    pub cadence: u64,
    pub disc_hidden: Vec<usize>,
}

impl Default for CmidConfig {
    fn default() -> Self {
        CmidConfig {
            enabled: true,
            alpha: 0.5,
            k: 5,
            history: 1,
            momentum_new_weight: 0.01,
            variant: CmidVariant::Cmid,
            disc_lr: 1e-2,
            cadence: 1,
            disc_hidden: vec![64, 64],
        }
    }
}

impl CmidConfig {
    /// History actually used: the MI variant has no conditioning set.
    pub fn effective_history(&self) -> usize {
        match self.variant {
            CmidVariant::Cmid => self.history,
            CmidVariant::Mi => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("cmid.k must be at least 1".into()));
        }
        if self.variant == CmidVariant::Cmid && self.history == 0 {
            return Err(Error::Config(
                "cmid.history = 0 requires the mi variant (no conditioning set)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.momentum_new_weight) {
            return Err(Error::Config("cmid.momentum_new_weight must lie in [0, 1]".into()));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cmid.cadence must be at least 1".into()));
        }
        Ok(())
    }
}

/// Rows `[latent | conditioning]` feeding the conditional discriminator.
pub fn assemble_disc_inputs(latents: &Array2<f64>, conditioning: &Array2<f64>) -> Array2<f64> {
    if conditioning.ncols() == 0 {
        latents.clone()
    } else {
        concatenate(Axis(1), &[latents.view(), conditioning.view()]).unwrap()
    }
}

/// Losses of one auxiliary update.
#[derive(Debug, Clone, Copy)]
pub struct CmidStats {
    pub disc_loss: f64,
    pub adv_loss: f64,
}

/// The auxiliary task: a conditional discriminator and its optimiser.
pub struct CmidTask {
    pub cfg: CmidConfig,
    pub disc: Mlp,
    opt_disc: Adam,
}

impl CmidTask {
    pub fn new<R: Rng>(
        cfg: CmidConfig,
        latent_dim: usize,
        action_dim: usize,
        rng: &mut R,
    ) -> Result<CmidTask> {
        cfg.validate()?;
        let h = cfg.effective_history();
        let input_dim = latent_dim + h * (latent_dim + action_dim);
        let mut dims = vec![input_dim];
        dims.extend(&cfg.disc_hidden);
        dims.push(1);
        let disc = Mlp::new(&dims, Activation::Relu, Tail::None, 1.0, rng)?;
        let opt_disc = Adam::new(disc.params(), cfg.disc_lr);
        Ok(CmidTask { cfg, disc, opt_disc })
    }

    /// One auxiliary update after the RL losses, exactly in order:
    /// fresh permutations and a discriminator step, then the adversarial
    /// encoder step against the updated discriminator. The encoder pass
    /// reuses no permutations (it needs none) and the momentum encoder is
    /// untouched here — it advances once per environment step with the
    /// other Polyak targets.
    pub fn update_step<R: Rng>(
        &mut self,
        agent: &mut Agent,
        batch: &Batch,
        perm_rng: &mut R,
        augment_rng: &mut R,
    ) -> Result<CmidStats> {
        let h = self.cfg.effective_history();
        if batch.len() <= self.cfg.k {
            return Err(Error::Config(format!(
                "cmid needs batch size > k, got {} <= {}",
                batch.len(),
                self.cfg.k
            )));
        }
        if h > batch.prev_obs.len() {
            return Err(Error::Config(format!(
                "cmid history {h} exceeds batch history {}",
                batch.prev_obs.len()
            )));
        }

        // Single frames, never stacks. Augmented current observation when
        // the base algorithm augments; clean previous frames through the
        // momentum encoder.
        let obs = if agent.cfg.augment {
            random_shift_augment(
                &batch.obs,
                agent.cfg.mode,
                agent.cfg.greyscale,
                agent.cfg.image_pad,
                augment_rng,
            )
        } else {
            batch.obs.clone()
        };
        let prev_latents: Vec<Array2<f64>> = batch.prev_obs[..h]
            .iter()
            .map(|o| agent.momentum_encoder.forward_values(o))
            .collect();
        let latent_values = agent.encoder.forward_values(&obs);
        let n = latent_values.ncols();

        // Per-feature conditioning sets and permutations, then one
        // discriminator pass over the stacked feature blocks.
        let mut conditioning = Vec::with_capacity(n);
        let mut true_blocks = Vec::with_capacity(n);
        let mut perm_blocks = Vec::with_capacity(n);
        for feature in 0..n {
            let c = if h == 0 {
                Array2::zeros((latent_values.nrows(), 0))
            } else {
                build_conditioning(&prev_latents, &batch.prev_actions[..h], feature, h)?
            };
            let permuted = knn_permute(&latent_values, &c, feature, self.cfg.k, perm_rng)?;
            true_blocks.push(assemble_disc_inputs(&latent_values, &c));
            perm_blocks.push(assemble_disc_inputs(&permuted.permuted, &c));
            conditioning.push(c);
        }
        let true_rows =
            concatenate(Axis(0), &true_blocks.iter().map(|b| b.view()).collect::<Vec<_>>()).unwrap();
        let perm_rows =
            concatenate(Axis(0), &perm_blocks.iter().map(|b| b.view()).collect::<Vec<_>>()).unwrap();

        let mut g = Graph::new();
        let disc_loss_node = discriminator_loss(&mut g, &self.disc, &true_rows, &perm_rows)?;
        let disc_loss = g.scalar(disc_loss_node);
        if !disc_loss.is_finite() {
            return Err(Error::NonFinite(format!("discriminator loss {disc_loss}")));
        }
        self.disc.zero_grads();
        g.backward(disc_loss_node)?;
        self.opt_disc.step();

        // Adversarial encoder update against the refreshed discriminator,
        // true samples only.
        let mut g = Graph::new();
        let obs_node = g.constant(obs);
        let z = agent.encoder.forward(&mut g, obs_node, ParamMode::Trainable)?;
        let (adv_node, _) = adversarial_loss(&mut g, &self.disc, z, &conditioning, self.cfg.alpha)?;
        let adv_loss = g.scalar(adv_node);
        if !adv_loss.is_finite() {
            return Err(Error::NonFinite(format!("adversarial loss {adv_loss}")));
        }
        agent.encoder.zero_grads();
        g.backward(adv_node)?;
        agent.encoder_optimizer().step();

        Ok(CmidStats { disc_loss, adv_loss })
    }

    pub fn named_params(&self) -> Vec<(String, crate::nn::Param)> {
        self.disc.named_params("disc")
    }
}
