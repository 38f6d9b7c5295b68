use ndarray::{Array2, Axis};
use rand::Rng;

use super::param::{Param, Parameterized};
use crate::error::{Error, Result};

/// Affine map `y = x W + b` applied row-wise to a batch `x` (rows × in).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new<R: Rng>(name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Linear {
            weight: Param::glorot(
                format!("{name}.weight"),
                inputs,
                outputs,
                inputs,
                outputs,
                rng,
            ),
            bias: Param::zeros(format!("{name}.bias"), 1, outputs),
        }
    }

    pub fn from_parts(name: &str, weight: Array2<f64>, bias: Array2<f64>) -> Self {
        Linear {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        linear_forward(x, &self.weight.value, &self.bias.value)
    }

    /// Accumulates `dW`, `db` into the parameter gradients and returns `dx`.
    pub fn backward(&mut self, x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        let (dx, dw, db) = linear_backward(x, &self.weight.value, dy);
        self.weight.grad += &dw;
        self.bias.grad += &db;
        dx
    }
}

impl Parameterized for Linear {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub fn linear_forward(x: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != w.nrows() {
        return Err(Error::ShapeMismatch {
            op: "linear_forward",
            left: x.shape().to_vec(),
            right: w.shape().to_vec(),
        });
    }
    if b.nrows() != 1 || b.ncols() != w.ncols() {
        return Err(Error::ShapeMismatch {
            op: "linear_forward (bias)",
            left: w.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(x.dot(w) + b)
}

/// Returns `(dx, dW, db)` for `y = x W + b`.
pub fn linear_backward(
    x: &Array2<f64>,
    w: &Array2<f64>,
    dy: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let dx = dy.dot(&w.t());
    let dw = x.t().dot(dy);
    let db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    (dx, dw, db)
}
