use ndarray::Array2;
use rand::Rng;

/// A trainable dense tensor together with its gradient and Adam moments.
///
/// All tensors in this crate are stored as 2-D matrices; biases are `1 × n`
/// and convolution kernels are flattened to `(in · 9) × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
    pub adam_m: Array2<f64>,
    pub adam_v: Array2<f64>,
    /// Number of optimizer steps applied so far.
    pub step: u64,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Array2<f64>) -> Self {
        let dim = value.raw_dim();
        Param {
            name: name.into(),
            value,
            grad: Array2::zeros(dim),
            adam_m: Array2::zeros(dim),
            adam_v: Array2::zeros(dim),
            step: 0,
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self::new(name, Array2::zeros((rows, cols)))
    }

    /// Uniform init in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng>(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let value = Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-limit..=limit));
        Self::new(name, value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value.shape().to_vec()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything that owns trainable parameters.
///
/// The order of `params`/`params_mut` is part of the contract: it fixes the
/// checkpoint layout and the reduction order of accumulated gradients.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
