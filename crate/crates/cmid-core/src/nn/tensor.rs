use std::cell::RefCell;
use std::rc::Rc;

use ndarray::Array2;

/// Dense 2-D real array with a gradient accumulator of the same shape.
///
/// Vectors are rows (`1 x d`); batches stack rows. The gradient buffer always
/// exists and is zeroed between updates by the optimiser.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub data: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Tensor {
    pub fn new(data: Array2<f64>) -> Self {
        let grad = Array2::zeros(data.dim());
        Tensor { data, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor::new(Array2::zeros((rows, cols)))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Shared handle to a trainable [`Tensor`].
///
/// Cloning is cheap and aliases the same storage, which is how online nets,
/// optimisers, and checkpointing all see one parameter. Single-threaded by
/// contract.
#[derive(Debug, Clone)]
pub struct Param(Rc<RefCell<Tensor>>);

impl Param {
    pub fn new(tensor: Tensor) -> Self {
        Param(Rc::new(RefCell::new(tensor)))
    }

    pub fn from_array(data: Array2<f64>) -> Self {
        Param::new(Tensor::new(data))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.borrow().shape()
    }

    /// Clone of the current value.
    pub fn value(&self) -> Array2<f64> {
        self.0.borrow().data.clone()
    }

    /// Clone of the accumulated gradient.
    pub fn grad(&self) -> Array2<f64> {
        self.0.borrow().grad.clone()
    }

    pub fn set_value(&self, data: Array2<f64>) {
        let mut t = self.0.borrow_mut();
        assert_eq!(t.data.dim(), data.dim(), "Param::set_value shape mismatch");
        t.data = data;
    }

    pub fn update_value(&self, f: impl FnOnce(&mut Array2<f64>)) {
        f(&mut self.0.borrow_mut().data)
    }

    pub fn accumulate_grad(&self, delta: &Array2<f64>) {
        let mut t = self.0.borrow_mut();
        assert_eq!(t.grad.dim(), delta.dim(), "Param::accumulate_grad shape mismatch");
        t.grad += delta;
    }

    pub fn zero_grad(&self) {
        self.0.borrow_mut().grad.fill(0.0);
    }

    pub fn update_grad(&self, f: impl FnOnce(&mut Array2<f64>)) {
        f(&mut self.0.borrow_mut().grad)
    }

    /// Applies `f` to (value, grad) in one borrow; used by the optimiser.
    pub fn with_value_and_grad(&self, f: impl FnOnce(&mut Array2<f64>, &mut Array2<f64>)) {
        let t = &mut *self.0.borrow_mut();
        f(&mut t.data, &mut t.grad)
    }

    pub fn is_finite(&self) -> bool {
        self.0.borrow().is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn grad_matches_shape_and_accumulates() {
        let p = Param::from_array(arr2(&[[1.0, 2.0], [3.0, 4.0]]));
        assert_eq!(p.shape(), (2, 2));
        p.accumulate_grad(&arr2(&[[1.0, 0.0], [0.0, 1.0]]));
        p.accumulate_grad(&arr2(&[[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!(p.grad()[[0, 0]], 2.0);
        p.zero_grad();
        assert_eq!(p.grad()[[0, 0]], 0.0);
    }

    #[test]
    fn clones_alias_storage() {
        let p = Param::from_array(arr2(&[[1.0]]));
        let q = p.clone();
        q.set_value(arr2(&[[5.0]]));
        assert_eq!(p.value()[[0, 0]], 5.0);
    }
}
