use ndarray::Array2;

use super::tensor::Param;

/// Adam optimiser state bound to a fixed parameter list.
///
/// Standard bias-corrected update; gradients are zeroed after each step so
/// accumulation across updates cannot leak.
pub struct Adam {
    params: Vec<Param>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step_count: u64,
    first_moment: Vec<Array2<f64>>,
    second_moment: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(params: Vec<Param>, lr: f64) -> Self {
        let first_moment = params.iter().map(|p| Array2::zeros(p.shape())).collect();
        let second_moment = params.iter().map(|p| Array2::zeros(p.shape())).collect();
        Adam {
            params,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first_moment,
            second_moment,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update from the gradients currently on the parameters.
    pub fn step(&mut self) {
        self.step_count += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step_count as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step_count as i32);
        for (i, p) in self.params.iter().enumerate() {
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            p.with_value_and_grad(|value, grad| {
                m.zip_mut_with(grad, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
                v.zip_mut_with(grad, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
                for ((pv, &mv), &vv) in value.iter_mut().zip(m.iter()).zip(v.iter()) {
                    let m_hat = mv / bc1;
                    let v_hat = vv / bc2;
                    *pv -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                }
                grad.fill(0.0);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn zero_grad_leaves_params_unchanged() {
        let p = Param::from_array(arr2(&[[1.5, -2.5]]));
        let mut opt = Adam::new(vec![p.clone()], 0.1);
        opt.step();
        assert_eq!(p.value(), arr2(&[[1.5, -2.5]]));
    }

    #[test]
    fn single_scalar_step_matches_hand_recurrence() {
        // One step of the scalar Adam recurrence, worked by hand:
        // m = (1-b1) g, v = (1-b2) g^2, m^ = g, v^ = g^2,
        // delta = lr * g / (|g| + eps) ~= lr * sign(g).
        let p = Param::from_array(arr2(&[[2.0]]));
        p.accumulate_grad(&arr2(&[[0.5]]));
        let mut opt = Adam::new(vec![p.clone()], 0.1);
        opt.step();
        let g: f64 = 0.5;
        let expected = 2.0 - 0.1 * g / (g.abs() + 1e-8);
        assert!((p.value()[[0, 0]] - expected).abs() < 1e-15);
        // Gradient must be cleared afterwards.
        assert_eq!(p.grad()[[0, 0]], 0.0);
    }

    #[test]
    fn identical_params_with_identical_grads_stay_identical() {
        let a = Param::from_array(arr2(&[[0.7, -0.3]]));
        let b = Param::from_array(arr2(&[[0.7, -0.3]]));
        let mut opt = Adam::new(vec![a.clone(), b.clone()], 0.01);
        for step in 0..25 {
            let g = arr2(&[[(step as f64 * 0.13).sin(), -0.2]]);
            a.accumulate_grad(&g);
            b.accumulate_grad(&g);
            opt.step();
            assert_eq!(a.value(), b.value());
        }
    }
}
