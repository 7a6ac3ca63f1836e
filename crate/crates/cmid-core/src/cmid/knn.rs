use ndarray::Array2;
use rand::Rng;

use crate::{Error, Result};

/// Product-of-marginals sample produced by the isolated-kNN permutation.
#[derive(Debug, Clone)]
pub struct PermutedBatch {
    /// `[B, N]`: row i keeps `z^n_i` bit-exactly and takes every other
    /// column from the donor row.
    pub permuted: Array2<f64>,
    /// Donor row index per sample; never the sample itself.
    pub donors: Vec<usize>,
}

/// Swaps complementary features between conditioning-neighbours.
///
/// For each sample i the Euclidean distances of its conditioning vector to
/// every other sample are sorted (ties broken by lower index); a donor j is
/// drawn uniformly from the k nearest, and the output row combines `z^n_i`
/// with `z^{-n}_j`. Because the donor's conditioning is close to the
/// original's, the pair approximates `p(z^n, c) p(z^{-n} | c)`.
pub fn knn_permute<R: Rng>(
    latents: &Array2<f64>,
    conditioning: &Array2<f64>,
    feature: usize,
    k: usize,
    rng: &mut R,
) -> Result<PermutedBatch> {
    let b = latents.nrows();
    assert_eq!(conditioning.nrows(), b, "conditioning batch mismatch");
    assert!(feature < latents.ncols(), "feature index out of range");
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if b <= k {
        return Err(Error::Config(format!("batch size {b} must exceed k = {k}")));
    }

    let mut permuted = latents.clone();
    let mut donors = Vec::with_capacity(b);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(b - 1);
    for i in 0..b {
        order.clear();
        let ci = conditioning.row(i);
        for j in 0..b {
            if j == i {
                continue;
            }
            let cj = conditioning.row(j);
            let d2: f64 = ci.iter().zip(cj.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            order.push((d2, j));
        }
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let donor = order[rng.gen_range(0..k)].1;
        donors.push(donor);
        let kept = latents[[i, feature]];
        permuted.row_mut(i).assign(&latents.row(donor));
        permuted[[i, feature]] = kept;
    }
    Ok(PermutedBatch { permuted, donors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_neighbour_map_on_scalar_conditioning() {
        // Conditioning values [0.0, 0.1, 0.9, 1.0] with k = 1 pair up
        // deterministically: {0 -> 1, 1 -> 0, 2 -> 3, 3 -> 2}.
        let latents = arr2(&[[0.0, 10.0], [1.0, 11.0], [2.0, 12.0], [3.0, 13.0]]);
        let conditioning = arr2(&[[0.0], [0.1], [0.9], [1.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = knn_permute(&latents, &conditioning, 0, 1, &mut rng).unwrap();
        assert_eq!(out.donors, vec![1, 0, 3, 2]);
        // Kept column bit-exact, other column from the donor.
        for i in 0..4 {
            assert_eq!(out.permuted[[i, 0]], latents[[i, 0]]);
            assert_eq!(out.permuted[[i, 1]], latents[[out.donors[i], 1]]);
        }
    }

    #[test]
    fn donors_cover_all_others_when_k_is_b_minus_one() {
        let latents = Array2::from_shape_fn((6, 3), |(i, j)| (i * 3 + j) as f64);
        let conditioning = Array2::from_shape_fn((6, 2), |(i, _)| i as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = vec![std::collections::HashSet::new(); 6];
        for _ in 0..400 {
            let out = knn_permute(&latents, &conditioning, 1, 5, &mut rng).unwrap();
            for (i, &d) in out.donors.iter().enumerate() {
                assert_ne!(d, i, "sample must not donate to itself");
                seen[i].insert(d);
            }
        }
        // Uniform over the other five samples: all appear.
        for (i, s) in seen.iter().enumerate() {
            assert_eq!(s.len(), 5, "sample {i} saw donors {s:?}");
        }
    }

    #[test]
    fn rejects_batch_not_larger_than_k() {
        let latents = Array2::zeros((3, 2));
        let conditioning = Array2::zeros((3, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(knn_permute(&latents, &conditioning, 0, 3, &mut rng).is_err());
        assert!(knn_permute(&latents, &conditioning, 0, 0, &mut rng).is_err());
    }

    #[test]
    fn donor_is_always_within_k_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let b = 12;
            let latents = Array2::from_shape_fn((b, 4), |(i, j)| ((i * 7 + j * 13 + trial) as f64).sin());
            let conditioning =
                Array2::from_shape_fn((b, 3), |(i, j)| ((i * 5 + j * 11 + trial) as f64).cos());
            let k = 4;
            let out = knn_permute(&latents, &conditioning, 2, k, &mut rng).unwrap();
            for i in 0..b {
                let d = |a: usize, b: usize| -> f64 {
                    conditioning
                        .row(a)
                        .iter()
                        .zip(conditioning.row(b).iter())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum()
                };
                let donor_dist = d(i, out.donors[i]);
                let strictly_closer =
                    (0..b).filter(|&j| j != i && d(i, j) < donor_dist).count();
                assert!(strictly_closer < k, "donor outside the k nearest");
            }
        }
    }
}
