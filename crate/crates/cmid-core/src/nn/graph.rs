use ndarray::{s, Array2, Axis};

use super::tensor::Param;
use crate::{Error, Result};

/// Index of a node on a [`Graph`] tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    /// Leaf value. If a [`Param`] is attached, `backward` flushes the node
    /// gradient into it; frozen/constant leaves carry `None`.
    Leaf(Option<Param>),
    StopGrad,
    MatMul(usize, usize),
    /// `[B,D] + [1,D]`, bias broadcast over rows.
    AddBias(usize, usize),
    /// `[B,D] * [1,D]`, row-broadcast scale (layer-norm affine).
    MulRows(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// Elementwise minimum; ties route the gradient to the first input.
    Min(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    AddScalar(usize),
    Relu(usize),
    Tanh(usize),
    Sigmoid(usize),
    Exp(usize),
    Ln(usize),
    Clamp(usize, f64, f64),
    SumAll(usize),
    MeanAll(usize),
    SumCols(usize),
    SelectCol(usize, usize),
    SliceCols(usize, usize, usize),
    CatCols(Vec<usize>),
    VStack(Vec<usize>),
    /// Row-wise normalisation to mean 0, variance 1 (before affine terms).
    LayerNorm(usize),
}

struct Node {
    value: Array2<f64>,
    grad: Array2<f64>,
    op: Op,
}

/// Tape for one forward/backward pass.
///
/// Operations execute eagerly and record themselves; [`Graph::backward`]
/// walks the tape in reverse. Deterministic: identical inputs and parameters
/// produce bit-identical values and gradients.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

// Small enough that normalised rows hit unit variance to ~1e-8 even for
// low-variance inputs, while still guarding the constant-row case.
const LAYER_NORM_EPS: f64 = 1e-8;

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        let grad = Array2::zeros(value.dim());
        self.nodes.push(Node { value, grad, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf whose gradient can be read back with [`Graph::grad`].
    pub fn input(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf(None))
    }

    /// Leaf treated as data; same as [`Graph::input`], named for intent.
    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        self.input(value)
    }

    /// Leaf bound to a trainable parameter: `backward` accumulates into it.
    pub fn param(&mut self, p: &Param) -> NodeId {
        self.push(p.value(), Op::Leaf(Some(p.clone())))
    }

    /// Leaf with the parameter's current value but no gradient flush.
    pub fn frozen(&mut self, p: &Param) -> NodeId {
        self.push(p.value(), Op::Leaf(None))
    }

    /// Identity in value; blocks gradient flow to its input.
    pub fn stop_grad(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.clone();
        self.push(v, Op::StopGrad)
    }

    pub fn value(&self, a: NodeId) -> &Array2<f64> {
        &self.nodes[a.0].value
    }

    pub fn grad(&self, a: NodeId) -> &Array2<f64> {
        &self.nodes[a.0].grad
    }

    pub fn scalar(&self, a: NodeId) -> f64 {
        let v = self.value(a);
        assert_eq!(v.dim(), (1, 1), "scalar() on non-scalar node");
        v[[0, 0]]
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.ncols(), bv.nrows(), "matmul inner dimension mismatch");
        let v = av.dot(bv);
        self.push(v, Op::MatMul(a.0, b.0))
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[bias.0].value);
        assert_eq!(bv.nrows(), 1, "bias must be a row vector");
        assert_eq!(av.ncols(), bv.ncols(), "bias width mismatch");
        let v = av + &bv.row(0);
        self.push(v, Op::AddBias(a.0, bias.0))
    }

    pub fn mul_rows(&mut self, a: NodeId, scale: NodeId) -> NodeId {
        let (av, sv) = (&self.nodes[a.0].value, &self.nodes[scale.0].value);
        assert_eq!(sv.nrows(), 1, "row scale must be a row vector");
        assert_eq!(av.ncols(), sv.ncols(), "row scale width mismatch");
        let v = av * &sv.row(0);
        self.push(v, Op::MulRows(a.0, scale.0))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(v, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value - &self.nodes[b.0].value;
        self.push(v, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value * &self.nodes[b.0].value;
        self.push(v, Op::Mul(a.0, b.0))
    }

    pub fn min(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.dim(), bv.dim(), "min shape mismatch");
        let mut v = av.clone();
        v.zip_mut_with(bv, |x, &y| *x = x.min(y));
        self.push(v, Op::Min(a.0, b.0))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = -&self.nodes[a.0].value;
        self.push(v, Op::Neg(a.0))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = &self.nodes[a.0].value * c;
        self.push(v, Op::Scale(a.0, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = &self.nodes[a.0].value + c;
        self.push(v, Op::AddScalar(a.0))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a.0))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.mapv(f64::tanh);
        self.push(v, Op::Tanh(a.0))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a.0))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.mapv(f64::exp);
        self.push(v, Op::Exp(a.0))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.mapv(f64::ln);
        self.push(v, Op::Ln(a.0))
    }

    /// Clamp to `[lo, hi]`; gradient passes only where the input is strictly
    /// inside the range.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.nodes[a.0].value.mapv(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp(a.0, lo, hi))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s = self.nodes[a.0].value.sum();
        self.push(Array2::from_elem((1, 1), s), Op::SumAll(a.0))
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value;
        let m = v.sum() / v.len() as f64;
        self.push(Array2::from_elem((1, 1), m), Op::MeanAll(a.0))
    }

    /// `[B,D] -> [B,1]`, summing each row.
    pub fn sum_cols(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(v, Op::SumCols(a.0))
    }

    /// Column `j` as a `[B,1]` node.
    pub fn select_col(&mut self, a: NodeId, j: usize) -> NodeId {
        let v = self.nodes[a.0].value.column(j).to_owned().insert_axis(Axis(1));
        self.push(v, Op::SelectCol(a.0, j))
    }

    /// Columns `from..to` as a `[B, to-from]` node.
    pub fn slice_cols(&mut self, a: NodeId, from: usize, to: usize) -> NodeId {
        let v = self.nodes[a.0].value.slice(s![.., from..to]).to_owned();
        self.push(v, Op::SliceCols(a.0, from, to))
    }

    /// Concatenate along columns.
    pub fn cat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.nodes[parts[0].0].value.nrows();
        let total: usize = parts.iter().map(|p| self.nodes[p.0].value.ncols()).sum();
        let mut v = Array2::zeros((rows, total));
        let mut at = 0;
        for p in parts {
            let pv = &self.nodes[p.0].value;
            assert_eq!(pv.nrows(), rows, "cat_cols row mismatch");
            v.slice_mut(s![.., at..at + pv.ncols()]).assign(pv);
            at += pv.ncols();
        }
        self.push(v, Op::CatCols(parts.iter().map(|p| p.0).collect()))
    }

    /// Stack along rows.
    pub fn vstack(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let cols = self.nodes[parts[0].0].value.ncols();
        let total: usize = parts.iter().map(|p| self.nodes[p.0].value.nrows()).sum();
        let mut v = Array2::zeros((total, cols));
        let mut at = 0;
        for p in parts {
            let pv = &self.nodes[p.0].value;
            assert_eq!(pv.ncols(), cols, "vstack column mismatch");
            v.slice_mut(s![at..at + pv.nrows(), ..]).assign(pv);
            at += pv.nrows();
        }
        self.push(v, Op::VStack(parts.iter().map(|p| p.0).collect()))
    }

    /// Row-wise layer normalisation without affine terms.
    pub fn layer_norm(&mut self, a: NodeId) -> NodeId {
        let v = layer_norm_values(&self.nodes[a.0].value);
        self.push(v, Op::LayerNorm(a.0))
    }

    /// Reverse pass from a scalar node; accumulates into every attached
    /// [`Param`]'s gradient buffer.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes[loss.0].value.dim() != (1, 1) {
            return Err(Error::Usage(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.dim()
            )));
        }
        if !self.nodes[loss.0].value[[0, 0]].is_finite() {
            return Err(Error::NonFinite("loss is not finite".into()));
        }
        self.nodes[loss.0].grad[[0, 0]] = 1.0;

        for i in (0..self.nodes.len()).rev() {
            // Split off the tail so node i's grad can be read while earlier
            // nodes are written.
            let (head, tail) = self.nodes.split_at_mut(i);
            let node = &tail[0];
            let g = &node.grad;
            match &node.op {
                Op::Leaf(_) => {}
                Op::StopGrad => {}
                Op::MatMul(a, b) => {
                    let ga = g.dot(&head[*b].value.t());
                    let gb = head[*a].value.t().dot(g);
                    head[*a].grad += &ga;
                    head[*b].grad += &gb;
                }
                Op::AddBias(a, b) => {
                    head[*a].grad += g;
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    head[*b].grad += &gb;
                }
                Op::MulRows(a, b) => {
                    let ga = g * &head[*b].value.row(0);
                    let gb = (g * &head[*a].value).sum_axis(Axis(0)).insert_axis(Axis(0));
                    head[*a].grad += &ga;
                    head[*b].grad += &gb;
                }
                Op::Add(a, b) => {
                    head[*a].grad += g;
                    head[*b].grad += g;
                }
                Op::Sub(a, b) => {
                    head[*a].grad += g;
                    head[*b].grad -= g;
                }
                Op::Mul(a, b) => {
                    let ga = g * &head[*b].value;
                    let gb = g * &head[*a].value;
                    head[*a].grad += &ga;
                    head[*b].grad += &gb;
                }
                Op::Min(a, b) => {
                    let av = &head[*a].value;
                    let bv = &head[*b].value;
                    let mut ga = g.clone();
                    let mut gb = g.clone();
                    ndarray::Zip::from(&mut ga).and(&mut gb).and(av).and(bv).for_each(
                        |ga, gb, &x, &y| {
                            if x <= y {
                                *gb = 0.0;
                            } else {
                                *ga = 0.0;
                            }
                        },
                    );
                    head[*a].grad += &ga;
                    head[*b].grad += &gb;
                }
                Op::Neg(a) => head[*a].grad -= g,
                Op::Scale(a, c) => {
                    let ga = g * *c;
                    head[*a].grad += &ga;
                }
                Op::AddScalar(a) => head[*a].grad += g,
                Op::Relu(a) => {
                    let ga = g * &head[*a].value.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    head[*a].grad += &ga;
                }
                Op::Tanh(a) => {
                    let ga = g * &node.value.mapv(|y| 1.0 - y * y);
                    head[*a].grad += &ga;
                }
                Op::Sigmoid(a) => {
                    let ga = g * &node.value.mapv(|y| y * (1.0 - y));
                    head[*a].grad += &ga;
                }
                Op::Exp(a) => {
                    let ga = g * &node.value;
                    head[*a].grad += &ga;
                }
                Op::Ln(a) => {
                    let ga = g / &head[*a].value;
                    head[*a].grad += &ga;
                }
                Op::Clamp(a, lo, hi) => {
                    let mut ga = g.clone();
                    ndarray::Zip::from(&mut ga).and(&head[*a].value).for_each(|ga, &x| {
                        if x <= *lo || x >= *hi {
                            *ga = 0.0;
                        }
                    });
                    head[*a].grad += &ga;
                }
                Op::SumAll(a) => {
                    let ga = Array2::from_elem(head[*a].value.dim(), g[[0, 0]]);
                    head[*a].grad += &ga;
                }
                Op::MeanAll(a) => {
                    let n = head[*a].value.len() as f64;
                    let ga = Array2::from_elem(head[*a].value.dim(), g[[0, 0]] / n);
                    head[*a].grad += &ga;
                }
                Op::SumCols(a) => {
                    let ga = g.broadcast(head[*a].value.dim()).unwrap().to_owned();
                    head[*a].grad += &ga;
                }
                Op::SelectCol(a, j) => {
                    let mut col = head[*a].grad.column_mut(*j);
                    col += &g.column(0);
                }
                Op::SliceCols(a, from, to) => {
                    let mut region = head[*a].grad.slice_mut(s![.., *from..*to]);
                    region += g;
                }
                Op::CatCols(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let w = head[*p].value.ncols();
                        head[*p].grad += &g.slice(s![.., at..at + w]);
                        at += w;
                    }
                }
                Op::VStack(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let h = head[*p].value.nrows();
                        head[*p].grad += &g.slice(s![at..at + h, ..]);
                        at += h;
                    }
                }
                Op::LayerNorm(a) => {
                    let x = &head[*a].value;
                    let y = &node.value;
                    let d = x.ncols() as f64;
                    let mut ga = Array2::zeros(x.dim());
                    for (r, xr) in x.outer_iter().enumerate() {
                        let mu = xr.mean().unwrap();
                        let var = xr.mapv(|v| (v - mu) * (v - mu)).mean().unwrap();
                        let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                        let gr = g.row(r);
                        let yr = y.row(r);
                        let g_mean = gr.mean().unwrap();
                        let gy_mean = gr
                            .iter()
                            .zip(yr.iter())
                            .map(|(&gi, &yi)| gi * yi)
                            .sum::<f64>()
                            / d;
                        for c in 0..x.ncols() {
                            ga[[r, c]] = inv_std * (gr[c] - g_mean - yr[c] * gy_mean);
                        }
                    }
                    head[*a].grad += &ga;
                }
            }
        }

        // Flush leaf gradients into their parameters.
        for node in &self.nodes {
            if let Op::Leaf(Some(p)) = &node.op {
                p.accumulate_grad(&node.grad);
            }
        }
        Ok(())
    }
}

/// Row-wise normalisation used by both the graph op and value-only forwards.
pub(crate) fn layer_norm_values(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.outer_iter_mut() {
        let mu = row.mean().unwrap();
        let var = row.mapv(|v| (v - mu) * (v - mu)).mean().unwrap();
        let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        row.mapv_inplace(|v| (v - mu) * inv_std);
    }
    out
}
