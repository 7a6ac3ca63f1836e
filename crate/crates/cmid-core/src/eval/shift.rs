use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{Observation, Phase, PointMass, Rgb, Variant};
#[cfg(test)]
use crate::envs::CorrelationSpec;
use crate::{Error, Result};

/// A policy driving evaluation episodes. Implementations may keep per-
/// episode state (frame windows, velocity trackers); `begin_episode`
/// clears it.
pub trait ActionPolicy {
    fn begin_episode(&mut self);
    fn act(&mut self, obs: &Observation) -> Vec<f64>;
}

/// Return and factors of one evaluation episode.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub ret: f64,
    pub variant: Variant,
    pub colour: Rgb,
}

/// One row of the evaluation CSV: `phase, seed, episode, return, cell`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EpisodeRecord {
    pub phase: String,
    pub seed: u64,
    pub episode: usize,
    pub ret: f64,
    pub cell: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PhaseSummary {
    pub phase: String,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CellSummary {
    pub variant: String,
    pub colour: String,
    pub mean: f64,
}

/// Result of a correlation-shift evaluation of a frozen policy.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ShiftReport {
    pub phases: Vec<PhaseSummary>,
    /// Mean return under the shifted distribution before any further
    /// learning; equals the shifted-phase summary for a frozen policy.
    pub zero_shot: PhaseSummary,
    pub per_cell: Vec<CellSummary>,
    pub records: Vec<EpisodeRecord>,
}

impl ShiftReport {
    /// CSV with the documented schema `phase,seed,episode,return,cell`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,seed,episode,return,cell\n");
        for r in &self.records {
            writeln!(out, "{},{},{},{},{}", r.phase, r.seed, r.episode, r.ret, r.cell).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

pub fn cell_name(variant: Variant, colour: Rgb) -> String {
    let v = match variant {
        Variant::A => "A",
        Variant::B => "B",
    };
    let c = if colour.is_blue() { "blue" } else { "green" };
    format!("{v}-{c}")
}

/// Runs `episodes` episodes with factors drawn from the environment's
/// correlation spec.
pub fn evaluate_policy(
    env: &mut PointMass,
    policy: &mut dyn ActionPolicy,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EpisodeOutcome>> {
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(rng);
        let f = env.factors().expect("episode active");
        let (variant, colour) = (f.variant, f.colour);
        policy.begin_episode();
        let mut total = 0.0;
        loop {
            let a = policy.act(&obs);
            let (next, r, done) = env.step(&a)?;
            total += r;
            obs = next;
            if done {
                break;
            }
        }
        out.push(EpisodeOutcome { ret: total, variant, colour });
    }
    Ok(out)
}

/// Mean return per forced (variant, colour) cell.
pub fn evaluate_cells(
    env: &mut PointMass,
    policy: &mut dyn ActionPolicy,
    episodes_per_cell: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<CellSummary>> {
    let mut out = Vec::new();
    for variant in [Variant::A, Variant::B] {
        for colour in [Rgb::blue(), Rgb::green()] {
            let mut total = 0.0;
            for _ in 0..episodes_per_cell {
                let mut obs = env.reset_with_factors(variant, colour, rng);
                policy.begin_episode();
                loop {
                    let a = policy.act(&obs);
                    let (next, r, done) = env.step(&a)?;
                    total += r;
                    obs = next;
                    if done {
                        break;
                    }
                }
            }
            out.push(CellSummary {
                variant: cell_name(variant, colour).split('-').next().unwrap().to_string(),
                colour: if colour.is_blue() { "blue" } else { "green" }.to_string(),
                mean: total / episodes_per_cell as f64,
            });
        }
    }
    Ok(out)
}

fn seed_level_summary(phase: &str, seed_means: &[f64]) -> PhaseSummary {
    let n = seed_means.len() as f64;
    let mean = seed_means.iter().sum::<f64>() / n;
    let stderr = if seed_means.len() > 1 {
        let var = seed_means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    PhaseSummary { phase: phase.to_string(), mean, stderr }
}

/// Evaluates a frozen policy under the training distribution and its
/// shifted counterpart, per seed, with per-cell breakdowns.
///
/// Episode means are aggregated per seed first; the reported standard
/// error is across seed-level means.
pub fn shift_eval(
    policy: &mut dyn ActionPolicy,
    env_template: &PointMass,
    scenario: Phase,
    episodes: usize,
    seeds: &[u64],
) -> Result<ShiftReport> {
    if seeds.len() < 2 {
        return Err(Error::Config("shift_eval needs at least 2 seeds for error bars".into()));
    }
    if scenario == Phase::Train {
        return Err(Error::Config("scenario must differ from the training phase".into()));
    }
    let shifted_name = match scenario {
        Phase::Reversed => "reversed",
        Phase::Uncorrelated => "uncorrelated",
        Phase::Train => unreachable!(),
    };

    let mut records = Vec::new();
    let mut train_means = Vec::new();
    let mut shift_means = Vec::new();
    let mut cell_sums = vec![0.0; 4];
    let mut cell_counts = vec![0usize; 4];

    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (phase_name, phase, sink) in [
            ("train", env_template.spec.phase, &mut train_means),
            (shifted_name, scenario, &mut shift_means),
        ] {
            let mut env = env_template.clone();
            env.set_spec(env_template.spec.with_phase(phase));
            let outcomes = evaluate_policy(&mut env, policy, episodes, &mut rng)?;
            let mean = outcomes.iter().map(|o| o.ret).sum::<f64>() / outcomes.len() as f64;
            sink.push(mean);
            for (i, o) in outcomes.iter().enumerate() {
                records.push(EpisodeRecord {
                    phase: phase_name.to_string(),
                    seed,
                    episode: i,
                    ret: o.ret,
                    cell: cell_name(o.variant, o.colour),
                });
            }
        }
        // Per-cell breakdown under forced factors (shifted dynamics are the
        // same; cells cover the whole joint table).
        let mut env = env_template.clone();
        let cells = evaluate_cells(&mut env, policy, episodes.div_ceil(2), &mut rng)?;
        for (i, c) in cells.iter().enumerate() {
            cell_sums[i] += c.mean;
            cell_counts[i] += 1;
        }
    }

    let per_cell = {
        let mut env = env_template.clone();
        let _ = &mut env;
        let mut out = Vec::new();
        let labels = [
            (Variant::A, Rgb::blue()),
            (Variant::A, Rgb::green()),
            (Variant::B, Rgb::blue()),
            (Variant::B, Rgb::green()),
        ];
        for (i, (v, c)) in labels.iter().enumerate() {
            out.push(CellSummary {
                variant: if *v == Variant::A { "A" } else { "B" }.to_string(),
                colour: if c.is_blue() { "blue" } else { "green" }.to_string(),
                mean: cell_sums[i] / cell_counts[i] as f64,
            });
        }
        out
    };

    let zero_shot = seed_level_summary(shifted_name, &shift_means);
    Ok(ShiftReport {
        phases: vec![seed_level_summary("train", &train_means), zero_shot.clone()],
        zero_shot,
        per_cell,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{PointMassParams, RenderMode};
    use crate::eval::policies::{ColourCuePolicy, WidthOraclePolicy};

    fn template(rho: f64) -> PointMass {
        let spec = CorrelationSpec::new(rho, Phase::Train, false).unwrap();
        PointMass::new(PointMassParams::default(), spec, RenderMode::FactorVector)
    }

    #[test]
    fn bookkeeping_ten_episodes_five_seeds() {
        let env = template(0.95);
        let mut policy = WidthOraclePolicy::new(env.params);
        let report = shift_eval(&mut policy, &env, Phase::Reversed, 10, &[0, 1, 2, 3, 4]).unwrap();
        // 10 episodes x 5 seeds x 2 phases of sampled-factor records.
        assert_eq!(report.records.len(), 100);
        let train_records = report.records.iter().filter(|r| r.phase == "train").count();
        assert_eq!(train_records, 50);
        assert_eq!(report.per_cell.len(), 4);
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 101);
        assert!(csv.starts_with("phase,seed,episode,return,cell\n"));
    }

    #[test]
    fn colour_blind_oracle_has_uniform_cells() {
        let env = template(0.95);
        let mut policy = WidthOraclePolicy::new(env.params);
        let report = shift_eval(&mut policy, &env, Phase::Reversed, 6, &[0, 1]).unwrap();
        let means: Vec<f64> = report.per_cell.iter().map(|c| c.mean).collect();
        let spread = means.iter().cloned().fold(f64::MIN, f64::max)
            - means.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 3.0, "cells should be near-uniform, spread {spread}");
        // Zero-shot equals training performance for a colour-blind policy.
        assert!((report.phases[0].mean - report.zero_shot.mean).abs() < 3.0);
    }

    #[test]
    fn colour_policy_collapses_only_after_reversal() {
        let env = template(1.0);
        let mut policy = ColourCuePolicy::new(env.params);
        let report = shift_eval(&mut policy, &env, Phase::Reversed, 6, &[0, 1, 2]).unwrap();
        let train = &report.phases[0];
        assert!(train.mean > -15.0, "train mean {}", train.mean);
        assert!(report.zero_shot.mean < -120.0, "zero-shot mean {}", report.zero_shot.mean);
        // The failure concentrates on the off-diagonal cells.
        for c in &report.per_cell {
            let diagonal = (c.variant == "A") == (c.colour == "blue");
            if diagonal {
                assert!(c.mean > -15.0, "diagonal cell {c:?}");
            } else {
                assert!(c.mean < -120.0, "off-diagonal cell {c:?}");
            }
        }
    }

    #[test]
    fn fixed_seed_reports_are_bit_identical() {
        let env = template(0.9);
        let mut p1 = WidthOraclePolicy::new(env.params);
        let r1 = shift_eval(&mut p1, &env, Phase::Uncorrelated, 4, &[7, 8]).unwrap();
        let mut p2 = WidthOraclePolicy::new(env.params);
        let r2 = shift_eval(&mut p2, &env, Phase::Uncorrelated, 4, &[7, 8]).unwrap();
        assert_eq!(r1.to_csv(), r2.to_csv());
        assert_eq!(r1.to_json(), r2.to_json());
    }

    #[test]
    fn rejects_one_seed_and_train_scenario() {
        let env = template(0.9);
        let mut policy = WidthOraclePolicy::new(env.params);
        assert!(shift_eval(&mut policy, &env, Phase::Reversed, 4, &[0]).is_err());
        assert!(shift_eval(&mut policy, &env, Phase::Train, 4, &[0, 1]).is_err());
    }
}
