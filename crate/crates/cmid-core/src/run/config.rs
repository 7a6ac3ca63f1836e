use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::cmid::{CmidConfig, CmidVariant};
use crate::envs::{obs_dim, CorrelationSpec, Phase, PointMass, PointMassParams, RenderMode};
use crate::rl::AgentConfig;
use crate::{Error, Result};

/// Correlation-shift scenario applied at `protocol.shift_step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    None,
    Reversed,
    Uncorrelated,
}

impl ShiftKind {
    pub fn phase(self) -> Option<Phase> {
        match self {
            ShiftKind::None => None,
            ShiftKind::Reversed => Some(Phase::Reversed),
            ShiftKind::Uncorrelated => Some(Phase::Uncorrelated),
        }
    }
}

/// Sweep axis for `run_sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Alpha,
    Rho,
    History,
    K,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EnvSection {
    pub mode: RenderMode,
    pub rho: f64,
    pub greyscale: bool,
    pub horizon: usize,
    pub dt: f64,
    pub goal: f64,
    pub start_range: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AgentSection {
    pub latent_dim: usize,
    pub stack: usize,
    pub encoder_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub lr: f64,
    pub alpha_lr: f64,
    pub init_temperature: f64,
    pub discount: f64,
    pub critic_tau: f64,
    pub actor_update_freq: u64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub batch_size: usize,
    pub init_steps: u64,
    pub replay_capacity: usize,
    pub augment: bool,
    pub image_pad: usize,
    pub svea_alpha: f64,
    pub svea_beta: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ProtocolSection {
    pub total_steps: u64,
    pub shift_step: u64,
    pub shift: ShiftKind,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct IoSection {
    pub out_dir: PathBuf,
    pub checkpoint_interval: u64,
    pub step_trace: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepSection {
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
}

/// Full experiment description; one file fully determines a run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunConfig {
    pub env: EnvSection,
    pub agent: AgentSection,
    pub cmid: CmidConfig,
    pub protocol: ProtocolSection,
    pub io: IoSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvSection {
                mode: RenderMode::FactorVector,
                rho: 0.95,
                greyscale: false,
                horizon: 100,
                dt: 0.2,
                goal: 0.8,
                start_range: 0.5,
            },
            agent: AgentSection {
                latent_dim: 56,
                stack: 3,
                encoder_hidden: vec![64],
                head_hidden: vec![64, 64],
                lr: 1e-3,
                alpha_lr: 1e-4,
                init_temperature: 0.1,
                discount: 0.99,
                critic_tau: 0.01,
                actor_update_freq: 2,
                log_std_min: -10.0,
                log_std_max: 2.0,
                batch_size: 128,
                init_steps: 1000,
                replay_capacity: 100_000,
                augment: true,
                image_pad: 4,
                svea_alpha: 0.5,
                svea_beta: 0.5,
            },
            cmid: CmidConfig::default(),
            protocol: ProtocolSection {
                total_steps: 40_000,
                shift_step: 30_000,
                shift: ShiftKind::Reversed,
                eval_interval: 1000,
                eval_episodes: 10,
                seeds: vec![0, 1, 2, 3, 4],
            },
            io: IoSection {
                out_dir: PathBuf::from("runs/run"),
                checkpoint_interval: 10_000,
                step_trace: false,
            },
            sweep: SweepSection { axis: None, values: Vec::new() },
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|tok| tok.trim().parse().map_err(|_| Error::Config(format!("{key}: bad element {tok:?}"))))
        .collect()
}

fn join_list<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "env.mode" => {
                self.env.mode = match v {
                    "factor-vector" => RenderMode::FactorVector,
                    "image16" => RenderMode::Image16,
                    _ => return Err(Error::Config(format!("env.mode: unknown mode {v:?}"))),
                }
            }
            "env.rho" => self.env.rho = parse_num(key, v)?,
            "env.greyscale" => self.env.greyscale = parse_bool(key, v)?,
            "env.horizon" => self.env.horizon = parse_num(key, v)?,
            "env.dt" => self.env.dt = parse_num(key, v)?,
            "env.goal" => self.env.goal = parse_num(key, v)?,
            "env.start_range" => self.env.start_range = parse_num(key, v)?,
            "agent.latent_dim" => self.agent.latent_dim = parse_num(key, v)?,
            "agent.stack" => self.agent.stack = parse_num(key, v)?,
            "agent.encoder_hidden" => self.agent.encoder_hidden = parse_list(key, v)?,
            "agent.head_hidden" => self.agent.head_hidden = parse_list(key, v)?,
            "agent.lr" => self.agent.lr = parse_num(key, v)?,
            "agent.alpha_lr" => self.agent.alpha_lr = parse_num(key, v)?,
            "agent.init_temperature" => self.agent.init_temperature = parse_num(key, v)?,
            "agent.discount" => self.agent.discount = parse_num(key, v)?,
            "agent.critic_tau" => self.agent.critic_tau = parse_num(key, v)?,
            "agent.actor_update_freq" => self.agent.actor_update_freq = parse_num(key, v)?,
            "agent.log_std_min" => self.agent.log_std_min = parse_num(key, v)?,
            "agent.log_std_max" => self.agent.log_std_max = parse_num(key, v)?,
            "agent.batch_size" => self.agent.batch_size = parse_num(key, v)?,
            "agent.init_steps" => self.agent.init_steps = parse_num(key, v)?,
            "agent.replay_capacity" => self.agent.replay_capacity = parse_num(key, v)?,
            "agent.augment" => self.agent.augment = parse_bool(key, v)?,
            "agent.image_pad" => self.agent.image_pad = parse_num(key, v)?,
            "agent.svea_alpha" => self.agent.svea_alpha = parse_num(key, v)?,
            "agent.svea_beta" => self.agent.svea_beta = parse_num(key, v)?,
            "cmid.enabled" => self.cmid.enabled = parse_bool(key, v)?,
            "cmid.alpha" => self.cmid.alpha = parse_num(key, v)?,
            "cmid.k" => self.cmid.k = parse_num(key, v)?,
            "cmid.history" => self.cmid.history = parse_num(key, v)?,
            "cmid.variant" => {
                self.cmid.variant = match v {
                    "cmid" => CmidVariant::Cmid,
                    "mi" => CmidVariant::Mi,
                    _ => return Err(Error::Config(format!("cmid.variant: expected cmid or mi, got {v:?}"))),
                }
            }
            "cmid.momentum_new_weight" => self.cmid.momentum_new_weight = parse_num(key, v)?,
            "cmid.disc_lr" => self.cmid.disc_lr = parse_num(key, v)?,
            "cmid.cadence" => self.cmid.cadence = parse_num(key, v)?,
            "cmid.disc_hidden" => self.cmid.disc_hidden = parse_list(key, v)?,
            "protocol.total_steps" => self.protocol.total_steps = parse_num(key, v)?,
            "protocol.shift_step" => self.protocol.shift_step = parse_num(key, v)?,
            "protocol.shift" => {
                self.protocol.shift = match v {
                    "none" => ShiftKind::None,
                    "reversed" => ShiftKind::Reversed,
                    "uncorrelated" => ShiftKind::Uncorrelated,
                    _ => return Err(Error::Config(format!("protocol.shift: unknown scenario {v:?}"))),
                }
            }
            "protocol.eval_interval" => self.protocol.eval_interval = parse_num(key, v)?,
            "protocol.eval_episodes" => self.protocol.eval_episodes = parse_num(key, v)?,
            "protocol.seeds" => self.protocol.seeds = parse_list(key, v)?,
            "io.out_dir" => self.io.out_dir = PathBuf::from(v),
            "io.checkpoint_interval" => self.io.checkpoint_interval = parse_num(key, v)?,
            "io.step_trace" => self.io.step_trace = parse_bool(key, v)?,
            "sweep.axis" => {
                self.sweep.axis = match v {
                    "" | "none" => None,
                    "alpha" => Some(SweepAxis::Alpha),
                    "rho" => Some(SweepAxis::Rho),
                    "history" => Some(SweepAxis::History),
                    "k" => Some(SweepAxis::K),
                    _ => return Err(Error::Config(format!("sweep.axis: unknown axis {v:?}"))),
                }
            }
            "sweep.values" => self.sweep.values = parse_list(key, v)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` text (`#` comments, blank lines allowed) on top
    /// of the defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = RunConfig::parse(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialises every key in a stable order; `parse(serialise(c))`
    /// reproduces `c` exactly.
    pub fn serialise(&self) -> String {
        let mut out = String::new();
        let mode = match self.env.mode {
            RenderMode::FactorVector => "factor-vector",
            RenderMode::Image16 => "image16",
        };
        writeln!(out, "env.mode = {mode}").unwrap();
        writeln!(out, "env.rho = {}", self.env.rho).unwrap();
        writeln!(out, "env.greyscale = {}", self.env.greyscale).unwrap();
        writeln!(out, "env.horizon = {}", self.env.horizon).unwrap();
        writeln!(out, "env.dt = {}", self.env.dt).unwrap();
        writeln!(out, "env.goal = {}", self.env.goal).unwrap();
        writeln!(out, "env.start_range = {}", self.env.start_range).unwrap();
        writeln!(out, "agent.latent_dim = {}", self.agent.latent_dim).unwrap();
        writeln!(out, "agent.stack = {}", self.agent.stack).unwrap();
        writeln!(out, "agent.encoder_hidden = {}", join_list(&self.agent.encoder_hidden)).unwrap();
        writeln!(out, "agent.head_hidden = {}", join_list(&self.agent.head_hidden)).unwrap();
        writeln!(out, "agent.lr = {}", self.agent.lr).unwrap();
        writeln!(out, "agent.alpha_lr = {}", self.agent.alpha_lr).unwrap();
        writeln!(out, "agent.init_temperature = {}", self.agent.init_temperature).unwrap();
        writeln!(out, "agent.discount = {}", self.agent.discount).unwrap();
        writeln!(out, "agent.critic_tau = {}", self.agent.critic_tau).unwrap();
        writeln!(out, "agent.actor_update_freq = {}", self.agent.actor_update_freq).unwrap();
        writeln!(out, "agent.log_std_min = {}", self.agent.log_std_min).unwrap();
        writeln!(out, "agent.log_std_max = {}", self.agent.log_std_max).unwrap();
        writeln!(out, "agent.batch_size = {}", self.agent.batch_size).unwrap();
        writeln!(out, "agent.init_steps = {}", self.agent.init_steps).unwrap();
        writeln!(out, "agent.replay_capacity = {}", self.agent.replay_capacity).unwrap();
        writeln!(out, "agent.augment = {}", self.agent.augment).unwrap();
        writeln!(out, "agent.image_pad = {}", self.agent.image_pad).unwrap();
        writeln!(out, "agent.svea_alpha = {}", self.agent.svea_alpha).unwrap();
        writeln!(out, "agent.svea_beta = {}", self.agent.svea_beta).unwrap();
        writeln!(out, "cmid.enabled = {}", self.cmid.enabled).unwrap();
        writeln!(out, "cmid.alpha = {}", self.cmid.alpha).unwrap();
        writeln!(out, "cmid.k = {}", self.cmid.k).unwrap();
        writeln!(out, "cmid.history = {}", self.cmid.history).unwrap();
        let variant = match self.cmid.variant {
            CmidVariant::Cmid => "cmid",
            CmidVariant::Mi => "mi",
        };
        writeln!(out, "cmid.variant = {variant}").unwrap();
        writeln!(out, "cmid.momentum_new_weight = {}", self.cmid.momentum_new_weight).unwrap();
        writeln!(out, "cmid.disc_lr = {}", self.cmid.disc_lr).unwrap();
        writeln!(out, "cmid.cadence = {}", self.cmid.cadence).unwrap();
        writeln!(out, "cmid.disc_hidden = {}", join_list(&self.cmid.disc_hidden)).unwrap();
        writeln!(out, "protocol.total_steps = {}", self.protocol.total_steps).unwrap();
        writeln!(out, "protocol.shift_step = {}", self.protocol.shift_step).unwrap();
        let shift = match self.protocol.shift {
            ShiftKind::None => "none",
            ShiftKind::Reversed => "reversed",
            ShiftKind::Uncorrelated => "uncorrelated",
        };
        writeln!(out, "protocol.shift = {shift}").unwrap();
        writeln!(out, "protocol.eval_interval = {}", self.protocol.eval_interval).unwrap();
        writeln!(out, "protocol.eval_episodes = {}", self.protocol.eval_episodes).unwrap();
        writeln!(out, "protocol.seeds = {}", join_list(&self.protocol.seeds)).unwrap();
        writeln!(out, "io.out_dir = {}", self.io.out_dir.display()).unwrap();
        writeln!(out, "io.checkpoint_interval = {}", self.io.checkpoint_interval).unwrap();
        writeln!(out, "io.step_trace = {}", self.io.step_trace).unwrap();
        let axis = match self.sweep.axis {
            None => "none",
            Some(SweepAxis::Alpha) => "alpha",
            Some(SweepAxis::Rho) => "rho",
            Some(SweepAxis::History) => "history",
            Some(SweepAxis::K) => "k",
        };
        writeln!(out, "sweep.axis = {axis}").unwrap();
        writeln!(out, "sweep.values = {}", join_list(&self.sweep.values)).unwrap();
        out
    }

    pub fn validate(&self) -> Result<()> {
        CorrelationSpec::new(self.env.rho, Phase::Train, self.env.greyscale)?;
        if self.env.horizon < 2 {
            return Err(Error::Config("env.horizon must be at least 2".into()));
        }
        if self.env.dt <= 0.0 {
            return Err(Error::Config("env.dt must be positive".into()));
        }
        if self.agent.latent_dim == 0 || self.agent.stack == 0 {
            return Err(Error::Config("agent.latent_dim and agent.stack must be positive".into()));
        }
        if self.protocol.shift != ShiftKind::None && self.protocol.shift_step > self.protocol.total_steps
        {
            return Err(Error::Config(format!(
                "protocol.shift_step {} exceeds protocol.total_steps {}",
                self.protocol.shift_step, self.protocol.total_steps
            )));
        }
        if self.protocol.seeds.is_empty() {
            return Err(Error::Config("protocol.seeds must not be empty".into()));
        }
        if self.protocol.eval_interval == 0 {
            return Err(Error::Config("protocol.eval_interval must be positive".into()));
        }
        self.cmid.validate()?;
        if self.cmid.enabled && self.agent.batch_size <= self.cmid.k {
            return Err(Error::Config(format!(
                "agent.batch_size {} must exceed cmid.k {}",
                self.agent.batch_size, self.cmid.k
            )));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        obs_dim(self.env.mode, self.env.greyscale)
    }

    /// Environment in the training phase.
    pub fn make_env(&self) -> Result<PointMass> {
        let spec = CorrelationSpec::new(self.env.rho, Phase::Train, self.env.greyscale)?;
        let params = PointMassParams {
            dt: self.env.dt,
            goal: self.env.goal,
            horizon: self.env.horizon,
            start_range: self.env.start_range,
        };
        Ok(PointMass::new(params, spec, self.env.mode))
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            obs_dim: self.obs_dim(),
            action_dim: 1,
            latent_dim: self.agent.latent_dim,
            stack: self.agent.stack,
            encoder_hidden: self.agent.encoder_hidden.clone(),
            head_hidden: self.agent.head_hidden.clone(),
            lr: self.agent.lr,
            alpha_lr: self.agent.alpha_lr,
            init_temperature: self.agent.init_temperature,
            discount: self.agent.discount,
            critic_tau: self.agent.critic_tau,
            momentum_tau: self.cmid.momentum_new_weight,
            actor_update_freq: self.agent.actor_update_freq,
            log_std_min: self.agent.log_std_min,
            log_std_max: self.agent.log_std_max,
            target_entropy: -1.0,
            augment: self.agent.augment,
            image_pad: self.agent.image_pad,
            svea_alpha: self.agent.svea_alpha,
            svea_beta: self.agent.svea_beta,
            mode: self.env.mode,
            greyscale: self.env.greyscale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_exactly() {
        let cfg = RunConfig::default();
        let text = cfg.serialise();
        let parsed = RunConfig::parse(&text).unwrap();
        assert_eq!(text, parsed.serialise());
    }

    #[test]
    fn overrides_round_trip_exactly() {
        let mut cfg = RunConfig::default();
        for (k, v) in [
            ("env.mode", "image16"),
            ("env.rho", "0.99"),
            ("agent.encoder_hidden", "32,16"),
            ("cmid.variant", "mi"),
            ("cmid.history", "0"),
            ("protocol.shift", "uncorrelated"),
            ("protocol.seeds", "5,6,7"),
            ("sweep.axis", "alpha"),
            ("sweep.values", "0.1,0.5,1"),
        ] {
            cfg.set(k, v).unwrap();
        }
        let text = cfg.serialise();
        let parsed = RunConfig::parse(&text).unwrap();
        assert_eq!(text, parsed.serialise());
    }

    #[test]
    fn table_defaults_match_published_values() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.agent.replay_capacity, 100_000);
        assert_eq!(cfg.agent.init_steps, 1000);
        assert_eq!(cfg.agent.stack, 3);
        assert_eq!(cfg.agent.batch_size, 128);
        assert_eq!(cfg.agent.discount, 0.99);
        assert_eq!(cfg.agent.lr, 1e-3);
        assert_eq!(cfg.agent.alpha_lr, 1e-4);
        assert_eq!(cfg.cmid.disc_lr, 1e-2);
        assert_eq!(cfg.agent.svea_alpha, 0.5);
        assert_eq!(cfg.agent.svea_beta, 0.5);
        assert_eq!(cfg.agent.critic_tau, 0.01);
        assert_eq!(cfg.agent.actor_update_freq, 2);
        assert_eq!(cfg.agent.log_std_min, -10.0);
        assert_eq!(cfg.agent.log_std_max, 2.0);
        assert_eq!(cfg.agent.latent_dim, 56);
        assert_eq!(cfg.agent.image_pad, 4);
        assert_eq!(cfg.agent.init_temperature, 0.1);
        assert_eq!(cfg.cmid.alpha, 0.5);
        assert_eq!(cfg.cmid.k, 5);
        // Policy input is the concatenation of stacked latents.
        assert_eq!(cfg.agent.stack * cfg.agent.latent_dim, 168);
    }

    #[test]
    fn unknown_keys_and_bad_values_name_the_field() {
        let mut cfg = RunConfig::default();
        let err = cfg.set("agent.nope", "1").unwrap_err();
        assert!(err.to_string().contains("agent.nope"));
        let err = cfg.set("env.rho", "fast").unwrap_err();
        assert!(err.to_string().contains("env.rho"));
        let err = RunConfig::parse("env.rho 0.9").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn validation_catches_cross_field_errors() {
        let mut cfg = RunConfig::default();
        cfg.protocol.shift_step = cfg.protocol.total_steps + 1;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.protocol.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.agent.batch_size = 4;
        cfg.cmid.k = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.env.rho = 0.2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored()  {
        let cfg = RunConfig::parse("# comment\n\nenv.rho = 0.9 # inline\n").unwrap();
        assert_eq!(cfg.env.rho, 0.9);
    }
}
