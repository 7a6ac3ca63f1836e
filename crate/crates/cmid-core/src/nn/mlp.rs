use ndarray::Array2;
use rand::Rng;

use super::graph::{layer_norm_values, Graph, NodeId};
use super::tensor::Param;
use crate::{Error, Result};

/// Elementwise activation applied after a linear layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply_graph(&self, g: &mut Graph, x: NodeId) -> NodeId {
        match self {
            Activation::Identity => x,
            Activation::Relu => g.relu(x),
            Activation::Tanh => g.tanh(x),
            Activation::Sigmoid => g.sigmoid(x),
        }
    }

    fn apply_values(&self, x: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => x.mapv_inplace(f64::tanh),
            Activation::Sigmoid => x.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
        }
    }
}

/// Dense layer `y = x W + b` with `W: [in, out]`, `b: [1, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    fn new<R: Rng>(fan_in: usize, fan_out: usize, scale: f64, rng: &mut R) -> Self {
        // Uniform fan-in init, optionally scaled down for output heads.
        let limit = scale / (fan_in as f64).sqrt();
        let weight = Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-limit..=limit));
        let bias = Array2::from_shape_fn((1, fan_out), |_| rng.gen_range(-limit..=limit));
        Linear {
            weight: Param::from_array(weight),
            bias: Param::from_array(bias),
        }
    }
}

/// Whether pre-activation graph leaves use trainable or frozen parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamMode {
    Trainable,
    Frozen,
}

/// Optional output treatment after the last linear layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    None,
    /// Layer normalisation with learnable affine terms, then tanh. Keeps
    /// every output feature in (-1, 1); used by the representation encoder.
    LayerNormTanh,
}

/// Multi-layer perceptron over row-major batches.
#[derive(Debug, Clone)]
pub struct Mlp {
    dims: Vec<usize>,
    layers: Vec<Linear>,
    activations: Vec<Activation>,
    tail: Tail,
    ln_gain: Option<Param>,
    ln_shift: Option<Param>,
}

impl Mlp {
    /// Builds layers `dims[0] -> dims[1] -> ... -> dims.last()`, with
    /// `hidden` after every layer but the last. `final_scale` shrinks the
    /// last layer's init (actor/critic heads use 0.01).
    pub fn new<R: Rng>(
        dims: &[usize],
        hidden: Activation,
        tail: Tail,
        final_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("Mlp needs at least input and output dims".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("Mlp dims must be positive".into()));
        }
        let mut layers = Vec::new();
        let mut activations = Vec::new();
        for i in 0..dims.len() - 1 {
            let last = i == dims.len() - 2;
            let scale = if last { final_scale } else { 1.0 };
            layers.push(Linear::new(dims[i], dims[i + 1], scale, rng));
            activations.push(if last { Activation::Identity } else { hidden });
        }
        let (ln_gain, ln_shift) = match tail {
            Tail::None => (None, None),
            Tail::LayerNormTanh => {
                let out = *dims.last().unwrap();
                (
                    Some(Param::from_array(Array2::ones((1, out)))),
                    Some(Param::from_array(Array2::zeros((1, out)))),
                )
            }
        };
        Ok(Mlp { dims: dims.to_vec(), layers, activations, tail, ln_gain, ln_shift })
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Taped forward pass for training.
    pub fn forward(&self, g: &mut Graph, input: NodeId, mode: ParamMode) -> Result<NodeId> {
        if g.value(input).ncols() != self.input_dim() {
            return Err(Error::Config(format!(
                "Mlp input width {} does not match net input width {}",
                g.value(input).ncols(),
                self.input_dim()
            )));
        }
        let leaf = |g: &mut Graph, p: &Param| match mode {
            ParamMode::Trainable => g.param(p),
            ParamMode::Frozen => g.frozen(p),
        };
        let mut x = input;
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let w = leaf(g, &layer.weight);
            let b = leaf(g, &layer.bias);
            let mm = g.matmul(x, w);
            x = g.add_bias(mm, b);
            x = act.apply_graph(g, x);
        }
        if self.tail == Tail::LayerNormTanh {
            let gain = leaf(g, self.ln_gain.as_ref().unwrap());
            let shift = leaf(g, self.ln_shift.as_ref().unwrap());
            let normed = g.layer_norm(x);
            let scaled = g.mul_rows(normed, gain);
            let shifted = g.add_bias(scaled, shift);
            x = g.tanh(shifted);
        }
        Ok(x)
    }

    /// Value-only forward pass (no tape); mirrors [`Mlp::forward`] exactly.
    pub fn forward_values(&self, input: &Array2<f64>) -> Array2<f64> {
        assert_eq!(input.ncols(), self.input_dim(), "Mlp input width mismatch");
        let mut x = input.clone();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let mut z = x.dot(&layer.weight.value());
            z += &layer.bias.value().row(0);
            act.apply_values(&mut z);
            x = z;
        }
        if self.tail == Tail::LayerNormTanh {
            let mut z = layer_norm_values(&x);
            z *= &self.ln_gain.as_ref().unwrap().value().row(0);
            z += &self.ln_shift.as_ref().unwrap().value().row(0);
            z.mapv_inplace(f64::tanh);
            x = z;
        }
        x
    }

    /// Parameters in a stable order (layer weights/biases, then tail affine).
    pub fn params(&self) -> Vec<Param> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.weight.clone());
            out.push(layer.bias.clone());
        }
        if let Some(g) = &self.ln_gain {
            out.push(g.clone());
        }
        if let Some(s) = &self.ln_shift {
            out.push(s.clone());
        }
        out
    }

    /// `(name, param)` pairs with a dotted prefix, for checkpoints.
    pub fn named_params(&self, prefix: &str) -> Vec<(String, Param)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}.w{i}"), layer.weight.clone()));
            out.push((format!("{prefix}.b{i}"), layer.bias.clone()));
        }
        if let Some(g) = &self.ln_gain {
            out.push((format!("{prefix}.ln_gain"), g.clone()));
        }
        if let Some(s) = &self.ln_shift {
            out.push((format!("{prefix}.ln_shift"), s.clone()));
        }
        out
    }

    /// Deep copy with independent storage (target/momentum networks).
    pub fn clone_detached(&self) -> Mlp {
        let layers = self
            .layers
            .iter()
            .map(|l| Linear {
                weight: Param::from_array(l.weight.value()),
                bias: Param::from_array(l.bias.value()),
            })
            .collect();
        Mlp {
            dims: self.dims.clone(),
            layers,
            activations: self.activations.clone(),
            tail: self.tail,
            ln_gain: self.ln_gain.as_ref().map(|p| Param::from_array(p.value())),
            ln_shift: self.ln_shift.as_ref().map(|p| Param::from_array(p.value())),
        }
    }

    pub fn zero_grads(&self) {
        for p in self.params() {
            p.zero_grad();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = Mlp::new(&[2, 2], Activation::Relu, Tail::None, 1.0, &mut rng(0)).unwrap();
        net.layers[0].weight.set_value(ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0]]));
        net.layers[0].bias.set_value(ndarray::arr2(&[[0.0, 0.0]]));
        let out = net.forward_values(&ndarray::arr2(&[[1.0, 2.0]]));
        assert_eq!(out, ndarray::arr2(&[[1.0, 2.0]]));
    }

    #[test]
    fn zero_weight_net_outputs_zero() {
        let net = Mlp::new(&[3, 4, 2], Activation::Relu, Tail::None, 1.0, &mut rng(1)).unwrap();
        for p in net.params() {
            p.set_value(Array2::zeros(p.shape()));
        }
        let out = net.forward_values(&ndarray::arr2(&[[0.5, -1.0, 2.0]]));
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_matches_hand_rolled_matrix_arithmetic() {
        // Independent oracle: explicit loops, no shared code path.
        let net = Mlp::new(&[3, 5, 2], Activation::Relu, Tail::None, 1.0, &mut rng(42)).unwrap();
        let x = ndarray::arr2(&[[0.3, -0.8, 1.1], [2.0, 0.0, -0.5]]);
        let got = net.forward_values(&x);

        let w0 = net.layers[0].weight.value();
        let b0 = net.layers[0].bias.value();
        let w1 = net.layers[1].weight.value();
        let b1 = net.layers[1].bias.value();
        for r in 0..x.nrows() {
            let mut h = vec![0.0; 5];
            for j in 0..5 {
                let mut acc = b0[[0, j]];
                for i in 0..3 {
                    acc += x[[r, i]] * w0[[i, j]];
                }
                h[j] = acc.max(0.0);
            }
            for j in 0..2 {
                let mut acc = b1[[0, j]];
                for (i, hv) in h.iter().enumerate() {
                    acc += hv * w1[[i, j]];
                }
                let diff = (got[[r, j]] - acc).abs();
                assert!(diff < 1e-12, "row {r} col {j}: {} vs {acc}", got[[r, j]]);
            }
        }
    }

    #[test]
    fn graph_and_value_forwards_agree() {
        let net =
            Mlp::new(&[4, 8, 3], Activation::Relu, Tail::LayerNormTanh, 1.0, &mut rng(7)).unwrap();
        let x = Array2::from_shape_fn((5, 4), |(i, j)| ((i * 7 + j * 3) as f64).sin());
        let want = net.forward_values(&x);
        let mut g = Graph::new();
        let xn = g.constant(x);
        let y = net.forward(&mut g, xn, ParamMode::Trainable).unwrap();
        assert_eq!(g.value(y), &want);
        // Tail keeps every feature in (-1, 1).
        assert!(want.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = Mlp::new(&[3, 2], Activation::Relu, Tail::None, 1.0, &mut rng(3)).unwrap();
        let mut g = Graph::new();
        let xn = g.constant(Array2::zeros((1, 4)));
        assert!(net.forward(&mut g, xn, ParamMode::Trainable).is_err());
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let net =
            Mlp::new(&[3, 6, 2], Activation::Tanh, Tail::LayerNormTanh, 1.0, &mut rng(11)).unwrap();
        let x = Array2::from_shape_fn((4, 3), |(i, j)| ((i + 2 * j) as f64 * 0.37).cos());
        let loss_of = |net: &Mlp| {
            let mut g = Graph::new();
            let xn = g.constant(x.clone());
            let y = net.forward(&mut g, xn, ParamMode::Trainable).unwrap();
            let sq = g.mul(y, y);
            let loss = g.mean_all(sq);
            (g.scalar(loss), g, loss)
        };
        net.zero_grads();
        let (_, mut g, loss) = loss_of(&net);
        g.backward(loss).unwrap();

        let h = 1e-5;
        for p in net.params() {
            let ad = p.grad();
            let base = p.value();
            for i in 0..base.nrows() {
                for j in 0..base.ncols() {
                    let mut v = base.clone();
                    v[[i, j]] += h;
                    p.set_value(v.clone());
                    let (fp, _, _) = loss_of(&net);
                    v[[i, j]] -= 2.0 * h;
                    p.set_value(v.clone());
                    let (fm, _, _) = loss_of(&net);
                    v[[i, j]] += h;
                    p.set_value(v);
                    let fd = (fp - fm) / (2.0 * h);
                    let rel = (ad[[i, j]] - fd).abs() / ad[[i, j]].abs().max(fd.abs()).max(1e-6);
                    assert!(rel < 1e-4, "param grad mismatch: ad={} fd={fd}", ad[[i, j]]);
                }
            }
        }
    }

    #[test]
    fn identical_seed_gives_bit_identical_nets_and_grads() {
        let build = || {
            let net =
                Mlp::new(&[3, 5, 2], Activation::Relu, Tail::None, 1.0, &mut rng(99)).unwrap();
            let x = ndarray::arr2(&[[0.1, 0.2, 0.3]]);
            let mut g = Graph::new();
            let xn = g.constant(x);
            let y = net.forward(&mut g, xn, ParamMode::Trainable).unwrap();
            let loss = g.mean_all(y);
            g.backward(loss).unwrap();
            (g.value(y).clone(), net.params().iter().map(|p| p.grad()).collect::<Vec<_>>())
        };
        let (y1, g1) = build();
        let (y2, g2) = build();
        assert_eq!(y1, y2);
        assert_eq!(g1, g2);
    }
}
