use ndarray::Array2;
use rand::Rng;

use super::activation::{leaky_relu, leaky_relu_backward, LEAKY_SLOPE};
use super::linear::Linear;
use super::param::{Param, Parameterized};
use crate::error::Result;

pub const DEFAULT_HIDDEN: usize = 128;

/// One-hidden-layer perceptron: `in -> hidden -> out`, leaky ReLU after the
/// hidden layer and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

/// Values saved by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    input: Array2<f64>,
    pre_activation: Array2<f64>,
    activation: Array2<f64>,
}

impl Mlp {
    pub fn new<R: Rng>(name: &str, inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        Mlp {
            hidden: Linear::new(&format!("{name}.0"), inputs, hidden, rng),
            output: Linear::new(&format!("{name}.1"), hidden, outputs, rng),
        }
    }

    pub fn inputs(&self) -> usize {
        self.hidden.inputs()
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden.outputs()
    }

    pub fn outputs(&self) -> usize {
        self.output.outputs()
    }

    /// `(in + 1) * hidden + (hidden + 1) * out`.
    pub fn expected_parameter_count(inputs: usize, hidden: usize, outputs: usize) -> usize {
        (inputs + 1) * hidden + (hidden + 1) * outputs
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        let z = self.hidden.forward(x)?;
        let a = leaky_relu(&z, LEAKY_SLOPE);
        let y = self.output.forward(&a)?;
        Ok((
            y,
            MlpCache {
                input: x.clone(),
                pre_activation: z,
                activation: a,
            },
        ))
    }

    pub fn infer(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let z = self.hidden.forward(x)?;
        self.output.forward(&leaky_relu(&z, LEAKY_SLOPE))
    }

    pub fn backward(&mut self, cache: &MlpCache, dy: &Array2<f64>) -> Array2<f64> {
        let da = self.output.backward(&cache.activation, dy);
        let dz = leaky_relu_backward(&cache.pre_activation, &da, LEAKY_SLOPE);
        self.hidden.backward(&cache.input, &dz)
    }
}

impl Parameterized for Mlp {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.hidden.params();
        p.extend(self.output.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.hidden.params_mut();
        p.extend(self.output.params_mut());
        p
    }
}
