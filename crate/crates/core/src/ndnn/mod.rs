//! Dense tensor layers with hand-written backward passes, MSE loss, Adam
//! and a finite-difference gradient checker.
//!
//! There is no general autodiff graph: every layer exposes `forward`, which
//! returns the values needed later, and `backward`, which accumulates
//! parameter gradients and returns the gradient with respect to its input.

mod activation;
mod adam;
mod checkpoint;
mod gradcheck;
mod linear;
mod loss;
mod mlp;
mod param;

pub use activation::{
    leaky_relu, leaky_relu_backward, leaky_relu_grad_scalar, leaky_relu_scalar, LEAKY_SLOPE,
};
pub use adam::{adam_step, AdamConfig};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, relative_error, GradCheckConfig, GradCheckReport, ParamCheck};
pub use linear::{linear_backward, linear_forward, Linear};
pub use loss::mse_loss;
pub use mlp::{Mlp, MlpCache, DEFAULT_HIDDEN};
pub use param::{Param, Parameterized};
