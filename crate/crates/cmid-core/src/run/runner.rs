use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;

use super::config::{RunConfig, ShiftKind};
use super::rng::{eval_rng, stream_rng, Stream};
use crate::cmid::CmidTask;
use crate::envs::{Observation, Phase, PointMass};
use crate::eval::{evaluate_cells, evaluate_policy, AgentPolicy, CellSummary};
use crate::nn::save_checkpoint;
use crate::rl::{Agent, ReplayBuffer};
use crate::{Error, Result};

/// Zero-shot evaluation right at the shift step, before any post-shift
/// gradient update.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ZeroShotSummary {
    pub env_step: u64,
    pub mean_return: f64,
    pub per_cell: Vec<CellSummary>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_eval_return: f64,
    pub zero_shot: Option<ZeroShotSummary>,
    pub episodes: usize,
    pub dir: PathBuf,
}

/// Aggregate over seeds; means are seed-level first, standard errors are
/// across seed means.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub seeds: Vec<SeedSummary>,
    pub final_mean: f64,
    pub final_stderr: f64,
    pub zero_shot_mean: Option<f64>,
    pub zero_shot_stderr: Option<f64>,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn phase_label(phase: Phase) -> &'static str {
    match phase {
        Phase::Train => "train",
        Phase::Reversed => "reversed",
        Phase::Uncorrelated => "uncorrelated",
    }
}

fn obs_row(obs: &Observation) -> Array2<f64> {
    Array2::from_shape_vec((1, obs.values.len()), obs.values.clone()).unwrap()
}

struct LossTrack {
    critic: f64,
    actor: f64,
    alpha_loss: f64,
    disc: f64,
    adv: f64,
}

/// Trains every seed of the config through the train/shift protocol and
/// writes all artifacts under `io.out_dir`.
pub fn run_train(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.io.out_dir)?;
    fs::write(cfg.io.out_dir.join("config.txt"), cfg.serialise())?;

    let mut seeds = Vec::new();
    for &seed in &cfg.protocol.seeds {
        seeds.push(train_seed(cfg, seed)?);
    }

    let finals: Vec<f64> = seeds.iter().map(|s| s.final_eval_return).collect();
    let (final_mean, final_stderr) = mean_stderr(&finals);
    let zs: Vec<f64> = seeds.iter().filter_map(|s| s.zero_shot.as_ref().map(|z| z.mean_return)).collect();
    let (zero_shot_mean, zero_shot_stderr) = if zs.len() == seeds.len() && !zs.is_empty() {
        let (m, e) = mean_stderr(&zs);
        (Some(m), Some(e))
    } else {
        (None, None)
    };

    let summary = RunSummary {
        out_dir: cfg.io.out_dir.clone(),
        seeds,
        final_mean,
        final_stderr,
        zero_shot_mean,
        zero_shot_stderr,
    };
    fs::write(
        cfg.io.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serialises"),
    )?;
    verify_run_dir(&cfg.io.out_dir, &cfg.protocol.seeds)?;
    Ok(summary)
}

/// Post-run manifest check: effective config, per-seed metrics CSV, final
/// checkpoint, and the JSON summary must all exist.
pub fn verify_run_dir(out_dir: &Path, seeds: &[u64]) -> Result<()> {
    let mut required = vec![out_dir.join("config.txt"), out_dir.join("summary.json")];
    for seed in seeds {
        let d = out_dir.join(format!("seed_{seed}"));
        required.push(d.join("metrics.csv"));
        required.push(d.join("checkpoint_final.ckpt"));
    }
    for path in required {
        if !path.exists() {
            return Err(Error::Config(format!("run dir missing {}", path.display())));
        }
    }
    Ok(())
}

fn train_seed(cfg: &RunConfig, seed: u64) -> Result<SeedSummary> {
    let seed_dir = cfg.io.out_dir.join(format!("seed_{seed}"));
    fs::create_dir_all(&seed_dir)?;

    let mut env = cfg.make_env()?;
    let mut env_rng = stream_rng(seed, Stream::Env);
    let mut action_rng = stream_rng(seed, Stream::ActionNoise);
    let mut batch_rng = stream_rng(seed, Stream::Batch);
    let mut update_rng = stream_rng(seed, Stream::UpdateNoise);
    let mut augment_rng = stream_rng(seed, Stream::Augment);
    let mut perm_rng = stream_rng(seed, Stream::Permutation);
    let mut cmid_aug_rng = stream_rng(seed, Stream::CmidAugment);

    let mut init_rng = stream_rng(seed, Stream::AgentInit);
    let mut agent = Agent::new(cfg.agent_config(), &mut init_rng)?;
    // The discriminator draws after the agent so enabling the task never
    // perturbs the agent's initial weights.
    let mut task = if cfg.cmid.enabled {
        Some(CmidTask::new(cfg.cmid.clone(), cfg.agent.latent_dim, 1, &mut init_rng)?)
    } else {
        None
    };
    // The sampling constraint follows the configured history whether or not
    // the task runs, so same-seed runs stay batch-for-batch comparable.
    let mut replay = ReplayBuffer::new(
        cfg.agent.replay_capacity,
        cfg.obs_dim(),
        1,
        cfg.cmid.effective_history(),
    );

    let mut metrics = fs::File::create(seed_dir.join("metrics.csv"))?;
    writeln!(metrics, "env_step,episode_return,critic_loss,actor_loss,temperature,disc_loss,adv_loss,phase")?;
    let mut eval_csv = fs::File::create(seed_dir.join("eval.csv"))?;
    writeln!(eval_csv, "env_step,phase,episode,return,cell")?;
    let mut episodes_csv = fs::File::create(seed_dir.join("episodes.csv"))?;
    writeln!(episodes_csv, "episode,start_step,variant,colour,phase")?;
    let mut trace_csv = if cfg.io.step_trace {
        let mut f = fs::File::create(seed_dir.join("trace.csv"))?;
        writeln!(f, "step,position,velocity,variant,colour,action,reward")?;
        Some(f)
    } else {
        None
    };

    let checkpoint_entries = |agent: &Agent, task: &Option<CmidTask>| {
        let mut entries = agent.named_params();
        if let Some(t) = task {
            entries.extend(t.named_params());
        }
        entries
    };

    let mut phase = Phase::Train;
    let mut episode_active = false;
    let mut frames: Vec<Array2<f64>> = Vec::new();
    let mut episode_return = 0.0;
    let mut episode_count = 0usize;
    let mut losses = LossTrack { critic: 0.0, actor: 0.0, alpha_loss: 0.0, disc: 0.0, adv: 0.0 };
    let mut zero_shot = None;
    let mut final_eval_return = f64::NAN;
    let mut last_eval_step = 0;

    let result: Result<()> = (|| {
        for env_step in 1..=cfg.protocol.total_steps {
            if !episode_active {
                let obs = env.reset(&mut env_rng);
                let f = env.factors().expect("episode active");
                writeln!(
                    episodes_csv,
                    "{episode_count},{env_step},{},{},{}",
                    if f.variant == crate::envs::Variant::A { "A" } else { "B" },
                    if f.colour.is_blue() { "blue" } else { "green" },
                    phase_label(phase)
                )?;
                replay.begin_episode(obs.values.clone());
                frames = vec![obs_row(&obs)];
                episode_return = 0.0;
                episode_active = true;
            }

            let action = if env_step <= cfg.agent.init_steps {
                vec![action_rng.gen_range(-1.0..=1.0)]
            } else {
                agent.select_action(&frames, false, &mut action_rng)
            };
            let (next_obs, reward, done) = env.step(&action)?;
            if let Some(t) = trace_csv.as_mut() {
                let f = env.factors().expect("episode active");
                writeln!(
                    t,
                    "{env_step},{},{},{},{},{},{reward}",
                    f.position,
                    f.velocity,
                    if f.variant == crate::envs::Variant::A { "A" } else { "B" },
                    if f.colour.is_blue() { "blue" } else { "green" },
                    action[0]
                )?;
            }
            // Horizon ends are time limits, not terminations: bootstrap on.
            replay.push_step(action, reward, next_obs.values.clone(), false);
            episode_return += reward;
            frames.push(obs_row(&next_obs));
            if frames.len() > cfg.agent.stack {
                frames.remove(0);
            }
            if done {
                writeln!(
                    metrics,
                    "{env_step},{episode_return},{},{},{},{},{},{}",
                    losses.critic,
                    losses.actor,
                    agent.temperature(),
                    losses.disc,
                    losses.adv,
                    phase_label(phase)
                )?;
                replay.end_episode();
                episode_active = false;
                episode_count += 1;
            }

            if env_step > cfg.agent.init_steps && replay.sampleable() > cfg.agent.batch_size {
                let batch = replay.sample(cfg.agent.batch_size, cfg.agent.stack, &mut batch_rng);
                losses.critic = agent.critic_update(&batch, &mut update_rng, &mut augment_rng)?;
                if env_step % cfg.agent.actor_update_freq == 0 {
                    let (a, al) = agent.actor_and_temperature_update(&batch, &mut update_rng)?;
                    losses.actor = a;
                    losses.alpha_loss = al;
                }
                agent.update_targets()?;
                if let Some(t) = task.as_mut() {
                    if env_step % t.cfg.cadence == 0 {
                        let s = t.update_step(&mut agent, &batch, &mut perm_rng, &mut cmid_aug_rng)?;
                        losses.disc = s.disc_loss;
                        losses.adv = s.adv_loss;
                    }
                }
            }

            if env_step % cfg.protocol.eval_interval == 0 {
                let mean = write_eval(
                    &mut eval_csv,
                    &agent,
                    &env,
                    phase,
                    cfg.protocol.eval_episodes,
                    seed,
                    env_step,
                )?;
                final_eval_return = mean;
                last_eval_step = env_step;
            }

            if cfg.protocol.shift != ShiftKind::None && env_step == cfg.protocol.shift_step {
                let shifted = cfg.protocol.shift.phase().expect("not none");
                // Zero-shot: evaluate under the shifted distribution before
                // any post-shift gradient update.
                let mut eval_env = env.clone();
                eval_env.set_spec(env.spec.with_phase(shifted));
                let mut policy = AgentPolicy::new(&agent);
                let mut rng = eval_rng(seed, env_step | (1 << 48));
                let outcomes =
                    evaluate_policy(&mut eval_env, &mut policy, cfg.protocol.eval_episodes, &mut rng)?;
                let mean =
                    outcomes.iter().map(|o| o.ret).sum::<f64>() / outcomes.len().max(1) as f64;
                for (i, o) in outcomes.iter().enumerate() {
                    writeln!(
                        eval_csv,
                        "{env_step},zero-shot-{},{i},{},{}",
                        phase_label(shifted),
                        o.ret,
                        crate::eval::cell_name(o.variant, o.colour)
                    )?;
                }
                let per_cell = evaluate_cells(
                    &mut eval_env,
                    &mut policy,
                    (cfg.protocol.eval_episodes / 2).max(1),
                    &mut rng,
                )?;
                zero_shot = Some(ZeroShotSummary { env_step, mean_return: mean, per_cell });
                save_checkpoint(
                    &seed_dir.join("checkpoint_shift.ckpt"),
                    &checkpoint_entries(&agent, &task),
                )?;
                env.set_spec(env.spec.with_phase(shifted));
                phase = shifted;
            }

            if cfg.io.checkpoint_interval > 0 && env_step % cfg.io.checkpoint_interval == 0 {
                save_checkpoint(
                    &seed_dir.join(format!("checkpoint_step{env_step}.ckpt")),
                    &checkpoint_entries(&agent, &task),
                )?;
            }
        }
        Ok(())
    })();

    if let Err(e) = result {
        // Abort diagnostics; periodic checkpoints on disk stay as the
        // last-good state.
        fs::write(seed_dir.join("abort.txt"), format!("{e}\n"))?;
        return Err(e);
    }

    if last_eval_step != cfg.protocol.total_steps {
        final_eval_return = write_eval(
            &mut eval_csv,
            &agent,
            &env,
            phase,
            cfg.protocol.eval_episodes,
            seed,
            cfg.protocol.total_steps,
        )?;
    }
    save_checkpoint(&seed_dir.join("checkpoint_final.ckpt"), &checkpoint_entries(&agent, &task))?;

    Ok(SeedSummary {
        seed,
        final_eval_return,
        zero_shot,
        episodes: episode_count,
        dir: seed_dir,
    })
}

fn write_eval(
    eval_csv: &mut fs::File,
    agent: &Agent,
    env: &PointMass,
    phase: Phase,
    episodes: usize,
    seed: u64,
    env_step: u64,
) -> Result<f64> {
    let mut eval_env = env.clone();
    let mut policy = AgentPolicy::new(agent);
    let mut rng = eval_rng(seed, env_step);
    let outcomes = evaluate_policy(&mut eval_env, &mut policy, episodes, &mut rng)?;
    for (i, o) in outcomes.iter().enumerate() {
        writeln!(
            eval_csv,
            "{env_step},{},{i},{},{}",
            phase_label(phase),
            o.ret,
            crate::eval::cell_name(o.variant, o.colour)
        )?;
    }
    Ok(outcomes.iter().map(|o| o.ret).sum::<f64>() / outcomes.len().max(1) as f64)
}
