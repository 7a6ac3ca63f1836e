use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::nn::{Activation, Adam, Graph, Mlp, ParamMode, Tail};
use crate::{Error, Result};

const CLAMP: f64 = 1e-6;

/// Samples of `(x, y, z)` for conditional-mutual-information estimation.
#[derive(Debug, Clone)]
pub struct CmiSamples {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub z: Array2<f64>,
}

impl CmiSamples {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Classifier and training settings for the estimator.
#[derive(Debug, Clone)]
pub struct CmiEstimatorConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub holdout_frac: f64,
    pub seed: u64,
}

impl Default for CmiEstimatorConfig {
    fn default() -> Self {
        CmiEstimatorConfig {
            hidden: vec![32, 32],
            epochs: 80,
            batch: 256,
            lr: 1e-3,
            holdout_frac: 0.25,
            seed: 0,
        }
    }
}

/// Point estimate of `I(X; Y | Z)` in nats plus classifier diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CmiEstimate {
    pub estimate_nats: f64,
    pub classifier_accuracy: f64,
    pub samples: usize,
    pub k: usize,
    /// Set when X or Y carried no variation; the estimate is pinned to 0.
    pub degenerate: bool,
}

fn permute_y_within<R: Rng>(
    y: &Array2<f64>,
    z: &Array2<f64>,
    indices: &[usize],
    k: usize,
    rng: &mut R,
) -> Array2<f64> {
    // Isolated kNN permutation on the conditioning variable: replace y_i by
    // the y of a z-neighbour within the same subset.
    let mut out = Array2::zeros((indices.len(), y.ncols()));
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(indices.len());
    for (row, &i) in indices.iter().enumerate() {
        order.clear();
        for &j in indices {
            if j == i {
                continue;
            }
            let d: f64 = z
                .row(i)
                .iter()
                .zip(z.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            order.push((d, j));
        }
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let donor = order[rng.gen_range(0..k)].1;
        out.row_mut(row).assign(&y.row(donor));
    }
    out
}

fn all_columns_constant(m: &Array2<f64>) -> bool {
    (0..m.ncols()).all(|c| {
        let col = m.column(c);
        let first = col[0];
        col.iter().all(|&v| (v - first).abs() < 1e-12)
    })
}

fn gather(m: &Array2<f64>, indices: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((indices.len(), m.ncols()));
    for (row, &i) in indices.iter().enumerate() {
        out.row_mut(row).assign(&m.row(i));
    }
    out
}

/// Classifier-based CMI estimate.
///
/// A classifier is trained to separate joint samples `(x, y, z)` from
/// kNN-permuted samples `(x, y', z)` drawn from the approximate product of
/// marginals. The point estimate is the held-out mean log-likelihood ratio
/// `ln(sigma / (1 - sigma))` over joint samples (direct ratio form), which
/// converges to the KL divergence between the two distributions.
pub fn estimate_cmi(samples: &CmiSamples, k: usize, cfg: &CmiEstimatorConfig) -> Result<CmiEstimate> {
    let n = samples.len();
    if samples.y.nrows() != n || samples.z.nrows() != n {
        return Err(Error::Config("x, y, z must have the same sample count".into()));
    }
    if n < 8 {
        return Err(Error::Config(format!("too few samples: {n}")));
    }
    if k == 0 || k >= n / 2 {
        return Err(Error::Config(format!("k = {k} out of range for n = {n}")));
    }
    if all_columns_constant(&samples.x) || all_columns_constant(&samples.y) {
        return Ok(CmiEstimate {
            estimate_nats: 0.0,
            classifier_accuracy: 0.5,
            samples: n,
            k,
            degenerate: true,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let holdout = ((n as f64 * cfg.holdout_frac).ceil() as usize).clamp(4, n - 4);
    let (hold_idx, train_idx) = indices.split_at(holdout);

    // Permutations are built within each split so no information leaks
    // across the boundary.
    let y_perm_train = permute_y_within(&samples.y, &samples.z, train_idx, k, &mut rng);
    let y_perm_hold = permute_y_within(&samples.y, &samples.z, hold_idx, k, &mut rng);

    let join = |x: &Array2<f64>, y: &Array2<f64>, z: &Array2<f64>| {
        concatenate(Axis(1), &[x.view(), y.view(), z.view()]).unwrap()
    };
    let train_joint = join(
        &gather(&samples.x, train_idx),
        &gather(&samples.y, train_idx),
        &gather(&samples.z, train_idx),
    );
    let train_perm = join(&gather(&samples.x, train_idx), &y_perm_train, &gather(&samples.z, train_idx));
    let hold_joint = join(
        &gather(&samples.x, hold_idx),
        &gather(&samples.y, hold_idx),
        &gather(&samples.z, hold_idx),
    );
    let hold_perm = join(&gather(&samples.x, hold_idx), &y_perm_hold, &gather(&samples.z, hold_idx));

    let dim = train_joint.ncols();
    let mut dims = vec![dim];
    dims.extend(&cfg.hidden);
    dims.push(1);
    let clf = Mlp::new(&dims, Activation::Relu, Tail::None, 1.0, &mut rng)?;
    let mut opt = Adam::new(clf.params(), cfg.lr);

    // Joint is the positive class here; BCE over both class batches.
    let m = train_joint.nrows();
    let mut order: Vec<usize> = (0..m).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            let joint = gather(&train_joint, chunk);
            let perm = gather(&train_perm, chunk);
            let mut g = Graph::new();
            let jn = g.constant(joint);
            let dj = clf.forward(&mut g, jn, ParamMode::Trainable)?;
            let sj = g.sigmoid(dj);
            let sj = g.clamp(sj, CLAMP, 1.0 - CLAMP);
            let lnj = g.ln(sj);
            let pj = g.mean_all(lnj);

            let pn = g.constant(perm);
            let dp = clf.forward(&mut g, pn, ParamMode::Trainable)?;
            let sp = g.sigmoid(dp);
            let sp = g.clamp(sp, CLAMP, 1.0 - CLAMP);
            let neg = g.neg(sp);
            let om = g.add_scalar(neg, 1.0);
            let lnp = g.ln(om);
            let pp = g.mean_all(lnp);

            let sum = g.add(pj, pp);
            let loss = g.scale(sum, -1.0);
            clf.zero_grads();
            g.backward(loss)?;
            opt.step();
        }
    }

    let score = |rows: &Array2<f64>| -> Vec<f64> {
        clf.forward_values(rows)
            .column(0)
            .iter()
            .map(|&v| (1.0 / (1.0 + (-v).exp())).clamp(CLAMP, 1.0 - CLAMP))
            .collect()
    };
    let joint_scores = score(&hold_joint);
    let perm_scores = score(&hold_perm);
    let correct = joint_scores.iter().filter(|&&s| s > 0.5).count()
        + perm_scores.iter().filter(|&&s| s < 0.5).count();
    let accuracy = correct as f64 / (joint_scores.len() + perm_scores.len()) as f64;
    let estimate =
        joint_scores.iter().map(|&s| (s / (1.0 - s)).ln()).sum::<f64>() / joint_scores.len() as f64;

    Ok(CmiEstimate {
        estimate_nats: estimate,
        classifier_accuracy: accuracy,
        samples: n,
        k,
        degenerate: false,
    })
}

/// Analytic Gaussian test distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussianFixture {
    /// X, Y, Z independent standard normals; CMI = 0.
    Independent,
    /// X = Z + e1, Y = Z + e2 with independent noise; CMI = 0.
    ConditionallyIndependent,
    /// X = Z + e1, Y = Z + e2 with corr(e1, e2) = rho_p;
    /// CMI = -0.5 ln(1 - rho_p^2).
    PartialCorrelation(f64),
}

impl GaussianFixture {
    pub fn analytic_cmi(&self) -> f64 {
        match self {
            GaussianFixture::Independent | GaussianFixture::ConditionallyIndependent => 0.0,
            GaussianFixture::PartialCorrelation(r) => -0.5 * (1.0 - r * r).ln(),
        }
    }
}

/// Draws `n` samples from one of the Gaussian fixtures.
pub fn gaussian_fixture(kind: GaussianFixture, n: usize, seed: u64) -> CmiSamples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |_: usize| -> f64 { rng.sample(StandardNormal) };
    let mut x = Array2::zeros((n, 1));
    let mut y = Array2::zeros((n, 1));
    let mut z = Array2::zeros((n, 1));
    for i in 0..n {
        let zi = normal(i);
        match kind {
            GaussianFixture::Independent => {
                x[[i, 0]] = normal(i);
                y[[i, 0]] = normal(i);
                z[[i, 0]] = zi;
            }
            GaussianFixture::ConditionallyIndependent => {
                x[[i, 0]] = zi + normal(i);
                y[[i, 0]] = zi + normal(i);
                z[[i, 0]] = zi;
            }
            GaussianFixture::PartialCorrelation(r) => {
                let e1 = normal(i);
                let e2 = r * e1 + (1.0 - r * r).sqrt() * normal(i);
                x[[i, 0]] = zi + e1;
                y[[i, 0]] = zi + e2;
                z[[i, 0]] = zi;
            }
        }
    }
    CmiSamples { x, y, z }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg() -> CmiEstimatorConfig {
        CmiEstimatorConfig { epochs: 60, ..CmiEstimatorConfig::default() }
    }

    #[test]
    fn independent_normals_estimate_near_zero() {
        let samples = gaussian_fixture(GaussianFixture::Independent, 3000, 1);
        let est = estimate_cmi(&samples, 5, &quick_cfg()).unwrap();
        assert!(est.estimate_nats.abs() <= 0.05, "estimate {}", est.estimate_nats);
    }

    #[test]
    fn conditionally_independent_estimate_near_zero() {
        let samples = gaussian_fixture(GaussianFixture::ConditionallyIndependent, 3000, 2);
        let est = estimate_cmi(&samples, 5, &quick_cfg()).unwrap();
        assert!(est.estimate_nats.abs() <= 0.05, "estimate {}", est.estimate_nats);
    }

    #[test]
    fn partial_correlation_point_eight_matches_analytic_value() {
        let kind = GaussianFixture::PartialCorrelation(0.8);
        let samples = gaussian_fixture(kind, 4000, 3);
        let est = estimate_cmi(&samples, 5, &quick_cfg()).unwrap();
        let want = kind.analytic_cmi();
        assert!((want - 0.5108).abs() < 1e-4);
        assert!(
            (est.estimate_nats - want).abs() <= 0.1,
            "estimate {} vs analytic {want}",
            est.estimate_nats
        );
        assert!(est.classifier_accuracy > 0.5);
    }

    #[test]
    fn constant_columns_are_flagged() {
        let mut samples = gaussian_fixture(GaussianFixture::Independent, 100, 4);
        samples.y.fill(2.5);
        let est = estimate_cmi(&samples, 5, &quick_cfg()).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.estimate_nats, 0.0);
    }

    #[test]
    fn rejects_mismatched_or_tiny_inputs() {
        let samples = gaussian_fixture(GaussianFixture::Independent, 100, 5);
        assert!(estimate_cmi(&samples, 0, &quick_cfg()).is_err());
        assert!(estimate_cmi(&samples, 60, &quick_cfg()).is_err());
        let bad = CmiSamples {
            x: Array2::zeros((10, 1)),
            y: Array2::zeros((9, 1)),
            z: Array2::zeros((10, 1)),
        };
        assert!(estimate_cmi(&bad, 2, &quick_cfg()).is_err());
    }
}
