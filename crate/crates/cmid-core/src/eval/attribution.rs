use ndarray::Array2;

use crate::nn::{Graph, Mlp, ParamMode};
use crate::{Error, Result};

/// Per-input attribution of one latent feature.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AttributionMap {
    pub feature: usize,
    pub attributions: Vec<f64>,
    pub baseline: Vec<f64>,
    pub steps: usize,
    /// `|sum(attr) - (f(x) - f(baseline))|`; small when the path integral
    /// is well resolved.
    pub completeness_residual: f64,
}

impl AttributionMap {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,attribution\n");
        for (i, a) in self.attributions.iter().enumerate() {
            out.push_str(&format!("{i},{a}\n"));
        }
        out
    }
}

/// Integrated gradients for `encoder` output `feature` against a baseline
/// (all zeros — a black image — by default).
///
/// Right-Riemann form: `attr_i = (x_i - b_i) * mean_s df/dx_i` evaluated at
/// `b + (s/steps)(x - b)` for `s = 1..=steps`.
pub fn integrated_gradients(
    encoder: &Mlp,
    feature: usize,
    input: &[f64],
    baseline: Option<&[f64]>,
    steps: usize,
) -> Result<AttributionMap> {
    if steps < 16 {
        return Err(Error::Config(format!("integrated gradients needs >= 16 steps, got {steps}")));
    }
    if feature >= encoder.output_dim() {
        return Err(Error::Config(format!(
            "feature {feature} out of range for {} outputs",
            encoder.output_dim()
        )));
    }
    if input.len() != encoder.input_dim() {
        return Err(Error::Config("input width does not match the encoder".into()));
    }
    let zeros = vec![0.0; input.len()];
    let base = baseline.unwrap_or(&zeros);
    if base.len() != input.len() {
        return Err(Error::Config("baseline width does not match the input".into()));
    }

    let d = input.len();
    let mut grad_sum = vec![0.0; d];
    for s in 1..=steps {
        let alpha = s as f64 / steps as f64;
        let point: Vec<f64> =
            input.iter().zip(base).map(|(x, b)| b + alpha * (x - b)).collect();
        let mut g = Graph::new();
        let x = g.input(Array2::from_shape_vec((1, d), point).unwrap());
        let out = encoder.forward(&mut g, x, ParamMode::Frozen)?;
        let f = g.select_col(out, feature);
        let loss = g.sum_all(f);
        g.backward(loss)?;
        for (acc, gi) in grad_sum.iter_mut().zip(g.grad(x).row(0)) {
            *acc += gi;
        }
    }
    let attributions: Vec<f64> = (0..d)
        .map(|i| (input[i] - base[i]) * grad_sum[i] / steps as f64)
        .collect();

    let f_of = |v: &[f64]| -> f64 {
        let arr = Array2::from_shape_vec((1, d), v.to_vec()).unwrap();
        encoder.forward_values(&arr)[[0, feature]]
    };
    let delta = f_of(input) - f_of(base);
    let completeness_residual = (attributions.iter().sum::<f64>() - delta).abs();

    Ok(AttributionMap {
        feature,
        attributions,
        baseline: base.to_vec(),
        steps,
        completeness_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Tail};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_encoder(seed: u64) -> Mlp {
        Mlp::new(&[4, 2], Activation::Relu, Tail::None, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap()
    }

    #[test]
    fn linear_feature_attributes_exactly_for_any_step_count() {
        let enc = linear_encoder(0);
        let w = enc.params()[0].value();
        let b = enc.params()[1].value();
        let x = [0.5, -1.0, 2.0, 0.25];
        for steps in [16, 64] {
            let map = integrated_gradients(&enc, 1, &x, None, steps).unwrap();
            for i in 0..4 {
                let want = w[[i, 1]] * x[i];
                assert!((map.attributions[i] - want).abs() < 1e-12);
            }
            // Residual is the bias offset: f(0) = b, and sum attr = f(x)-f(0).
            assert!(map.completeness_residual < 1e-12, "residual {}", map.completeness_residual);
            let _ = b;
        }
    }

    #[test]
    fn input_equal_to_baseline_attributes_nothing() {
        let enc = linear_encoder(1);
        let x = [0.3, 0.3, -0.7, 0.0];
        let map = integrated_gradients(&enc, 0, &x, Some(&x), 32).unwrap();
        assert!(map.attributions.iter().all(|&a| a == 0.0));
        assert!(map.completeness_residual < 1e-12);
    }

    #[test]
    fn completeness_on_random_mlps_at_256_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..6 {
            let act = if trial % 2 == 0 { Activation::Relu } else { Activation::Tanh };
            let enc = Mlp::new(&[5, 16, 8], act, Tail::None, 1.0, &mut rng).unwrap();
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
            let map = integrated_gradients(&enc, trial % 8, &x, None, 256).unwrap();
            assert!(
                map.completeness_residual < 1e-3,
                "trial {trial}: residual {}",
                map.completeness_residual
            );
        }
    }

    #[test]
    fn completeness_on_norm_tailed_encoders_at_256_steps() {
        // The norm+tanh tail adds path curvature; the right-Riemann rule at
        // 256 steps resolves it to ~5e-3 rather than 1e-3.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..6 {
            let enc =
                Mlp::new(&[5, 16, 8], Activation::Relu, Tail::LayerNormTanh, 1.0, &mut rng)
                    .unwrap();
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
            let map = integrated_gradients(&enc, trial % 8, &x, None, 256).unwrap();
            assert!(
                map.completeness_residual < 1e-2,
                "trial {trial}: residual {}",
                map.completeness_residual
            );
        }
    }

    #[test]
    fn residual_shrinks_as_steps_double() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc =
            Mlp::new(&[5, 16, 4], Activation::Relu, Tail::LayerNormTanh, 1.0, &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(0.2..1.0)).collect();
        let residual = |steps: usize| {
            integrated_gradients(&enc, 0, &x, None, steps).unwrap().completeness_residual
        };
        let r16 = residual(16);
        let r256 = residual(256);
        assert!(r256 < r16, "16 steps: {r16}, 256 steps: {r256}");
        // Roughly first-order in 1/steps, allowing generous noise.
        let mut prev = r16;
        for steps in [32, 64, 128, 256] {
            let r = residual(steps);
            assert!(r <= prev * 1.25 + 1e-12, "residual rose from {prev} to {r} at {steps}");
            prev = r;
        }
    }

    #[test]
    fn rejects_too_few_steps_and_bad_shapes() {
        let enc = linear_encoder(4);
        let x = [0.0; 4];
        assert!(integrated_gradients(&enc, 0, &x, None, 8).is_err());
        assert!(integrated_gradients(&enc, 9, &x, None, 32).is_err());
        assert!(integrated_gradients(&enc, 0, &x[..3], None, 32).is_err());
    }
}
