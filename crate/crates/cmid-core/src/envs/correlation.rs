use rand::Rng;

use super::{Rgb, Variant};
use crate::{Error, Result};

/// Which joint distribution over (variant, colour) is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Diagonal cells (A,blue) and (B,green) carry mass `rho` in total.
    Train,
    /// Diagonals swapped: (A,green) and (B,blue) carry mass `rho`.
    Reversed,
    /// All four cells at 0.25.
    Uncorrelated,
}

/// Correlation between the dynamics variant and the nuisance colour.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorrelationSpec {
    /// Probability mass on the variant-colour leading diagonal, in [0.5, 1].
    pub rho: f64,
    pub phase: Phase,
    pub greyscale: bool,
}

impl CorrelationSpec {
    pub fn new(rho: f64, phase: Phase, greyscale: bool) -> Result<Self> {
        if !(0.5..=1.0).contains(&rho) {
            return Err(Error::Config(format!("correlation rho must lie in [0.5, 1], got {rho}")));
        }
        Ok(CorrelationSpec { rho, phase, greyscale })
    }

    pub fn with_phase(self, phase: Phase) -> Self {
        CorrelationSpec { phase, ..self }
    }
}

/// Joint probability table; rows (A, B), columns (blue, green).
pub fn joint_table(spec: &CorrelationSpec) -> [[f64; 2]; 2] {
    let diag = match spec.phase {
        Phase::Train => spec.rho,
        Phase::Reversed => 1.0 - spec.rho,
        Phase::Uncorrelated => 0.5,
    };
    [[diag / 2.0, (1.0 - diag) / 2.0], [(1.0 - diag) / 2.0, diag / 2.0]]
}

/// Draws the episode factors. The variant is equiprobable; the colour is
/// conditionally drawn so the joint matches [`joint_table`].
pub fn sample_episode_factors<R: Rng>(spec: &CorrelationSpec, rng: &mut R) -> (Variant, Rgb) {
    let variant = if rng.gen_range(0.0..1.0) < 0.5 { Variant::A } else { Variant::B };
    let diag = match spec.phase {
        Phase::Train => spec.rho,
        Phase::Reversed => 1.0 - spec.rho,
        Phase::Uncorrelated => 0.5,
    };
    let on_diag = rng.gen_range(0.0..1.0) < diag;
    let colour = match (variant, on_diag) {
        (Variant::A, true) | (Variant::B, false) => Rgb::blue(),
        (Variant::A, false) | (Variant::B, true) => Rgb::green(),
    };
    (variant, colour)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell_index(v: Variant, c: Rgb) -> (usize, usize) {
        (if v == Variant::A { 0 } else { 1 }, if c.is_blue() { 0 } else { 1 })
    }

    fn empirical_table(spec: &CorrelationSpec, draws: usize, seed: u64) -> [[f64; 2]; 2] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = [[0usize; 2]; 2];
        for _ in 0..draws {
            let (v, c) = sample_episode_factors(spec, &mut rng);
            let (i, j) = cell_index(v, c);
            counts[i][j] += 1;
        }
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = counts[i][j] as f64 / draws as f64;
            }
        }
        out
    }

    #[test]
    fn train_table_at_rho_095() {
        let spec = CorrelationSpec::new(0.95, Phase::Train, false).unwrap();
        let t = joint_table(&spec);
        assert!((t[0][0] - 0.475).abs() < 1e-12); // P(A, blue)
        assert!((t[0][1] - 0.025).abs() < 1e-12); // P(A, green)
        assert!((t[1][0] - 0.025).abs() < 1e-12);
        assert!((t[1][1] - 0.475).abs() < 1e-12);
    }

    #[test]
    fn rho_half_equals_uncorrelated() {
        let half = CorrelationSpec::new(0.5, Phase::Train, false).unwrap();
        let unc = CorrelationSpec::new(0.9, Phase::Uncorrelated, false).unwrap();
        assert_eq!(joint_table(&half), joint_table(&unc));
        for row in joint_table(&half) {
            for cell in row {
                assert_eq!(cell, 0.25);
            }
        }
    }

    #[test]
    fn reversed_swaps_colour_labels() {
        let spec = CorrelationSpec::new(0.9, Phase::Train, false).unwrap();
        let rev = spec.with_phase(Phase::Reversed);
        let t = joint_table(&spec);
        let r = joint_table(&rev);
        for i in 0..2 {
            assert_eq!(t[i][0], r[i][1]);
            assert_eq!(t[i][1], r[i][0]);
        }
    }

    #[test]
    fn empirical_frequencies_match_table_within_one_percent() {
        let spec = CorrelationSpec::new(0.9, Phase::Train, false).unwrap();
        let emp = empirical_table(&spec, 100_000, 7);
        let want = joint_table(&spec);
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (emp[i][j] - want[i][j]).abs() < 0.01,
                    "cell ({i},{j}): {} vs {}",
                    emp[i][j],
                    want[i][j]
                );
            }
        }
    }

    #[test]
    fn chi_square_on_ten_thousand_episodes() {
        // Critical value for df=3 at p=0.01 is 11.345; staying below it
        // means the draw frequencies are consistent with the spec table.
        let spec = CorrelationSpec::new(0.95, Phase::Train, false).unwrap();
        let n = 10_000;
        let emp = empirical_table(&spec, n, 11);
        let want = joint_table(&spec);
        let mut stat = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let e = want[i][j] * n as f64;
                let o = emp[i][j] * n as f64;
                stat += (o - e) * (o - e) / e;
            }
        }
        assert!(stat < 11.345, "chi-square statistic too large: {stat}");
    }

    #[test]
    fn rejects_out_of_range_rho() {
        assert!(CorrelationSpec::new(0.4, Phase::Train, false).is_err());
        assert!(CorrelationSpec::new(1.01, Phase::Train, false).is_err());
    }
}
