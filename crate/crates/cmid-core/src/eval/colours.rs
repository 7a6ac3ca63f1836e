use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{PointMass, Rgb, Variant};
use crate::{Error, Result};

use super::shift::ActionPolicy;

/// Zero-shot returns over a grid of unseen colours.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ColourRobustnessReport {
    /// `(rgb, mean return)` per grid colour.
    pub per_colour: Vec<([f64; 3], f64)>,
    pub worst: f64,
    pub best: f64,
    pub average: f64,
}

impl ColourRobustnessReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,g,b,mean_return\n");
        for (rgb, ret) in &self.per_colour {
            writeln!(out, "{},{},{},{ret}", rgb[0], rgb[1], rgb[2]).unwrap();
        }
        out
    }
}

/// Evaluates the policy on `grid^3` equally spaced RGB colours (a grid of 6
/// gives 216), forcing each colour while the variant stays equiprobable.
pub fn colour_robustness(
    env_template: &PointMass,
    policy: &mut dyn ActionPolicy,
    grid: usize,
    episodes_per_colour: usize,
    seed: u64,
) -> Result<ColourRobustnessReport> {
    if grid < 2 {
        return Err(Error::Config("colour grid must be at least 2".into()));
    }
    let levels: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let mut per_colour = Vec::with_capacity(grid * grid * grid);
    let mut colour_index = 0u64;
    for &r in &levels {
        for &g in &levels {
            for &b in &levels {
                // Seed per colour so report entries are order-independent.
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (colour_index.wrapping_mul(0x9e3779b97f4a7c15)));
                colour_index += 1;
                let mut env = env_template.clone();
                let mut total = 0.0;
                for ep in 0..episodes_per_colour {
                    let variant = if ep % 2 == 0 { Variant::A } else { Variant::B };
                    let mut obs = env.reset_with_factors(variant, Rgb([r, g, b]), &mut rng);
                    policy.begin_episode();
                    loop {
                        let a = policy.act(&obs);
                        let (next, reward, done) = env.step(&a)?;
                        total += reward;
                        obs = next;
                        if done {
                            break;
                        }
                    }
                }
                per_colour.push(([r, g, b], total / episodes_per_colour as f64));
            }
        }
    }
    let worst = per_colour.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let best = per_colour.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let average = per_colour.iter().map(|c| c.1).sum::<f64>() / per_colour.len() as f64;
    Ok(ColourRobustnessReport { per_colour, worst, best, average })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{CorrelationSpec, Phase, PointMassParams, RenderMode};
    use crate::eval::policies::WidthOraclePolicy;

    #[test]
    fn grid_of_six_yields_216_colours() {
        let spec = CorrelationSpec::new(0.95, Phase::Train, false).unwrap();
        let env = PointMass::new(PointMassParams::default(), spec, RenderMode::FactorVector);
        let mut policy = WidthOraclePolicy::new(env.params);
        let report = colour_robustness(&env, &mut policy, 6, 1, 3).unwrap();
        assert_eq!(report.per_colour.len(), 216);
        assert_eq!(report.to_csv().lines().count(), 217);
    }

    #[test]
    fn colour_blind_policy_has_tight_worst_best_spread() {
        let spec = CorrelationSpec::new(0.95, Phase::Train, false).unwrap();
        let env = PointMass::new(PointMassParams::default(), spec, RenderMode::FactorVector);
        let mut policy = WidthOraclePolicy::new(env.params);
        // Small grid keeps the test quick; spread is evaluation noise only.
        let report = colour_robustness(&env, &mut policy, 3, 4, 7).unwrap();
        assert_eq!(report.per_colour.len(), 27);
        assert!(report.best <= 0.0);
        assert!(
            report.best - report.worst < 5.0,
            "colour-blind spread too wide: worst {} best {}",
            report.worst,
            report.best
        );
        assert!(report.worst <= report.average && report.average <= report.best);
    }
}
