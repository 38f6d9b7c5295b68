use ndarray::{Array2, Zip};

/// Negative slope used by every activation in the emulators.
pub const LEAKY_SLOPE: f64 = 0.01;

#[inline]
pub fn leaky_relu_scalar(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Derivative of leaky ReLU; the subgradient at 0 is taken as 1.
#[inline]
pub fn leaky_relu_grad_scalar(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

pub fn leaky_relu(x: &Array2<f64>, slope: f64) -> Array2<f64> {
    x.mapv(|v| leaky_relu_scalar(v, slope))
}

/// Gradient with respect to the pre-activation `x`.
pub fn leaky_relu_backward(x: &Array2<f64>, dy: &Array2<f64>, slope: f64) -> Array2<f64> {
    let mut dx = dy.clone();
    Zip::from(&mut dx)
        .and(x)
        .for_each(|d, &v| *d *= leaky_relu_grad_scalar(v, slope));
    dx
}
