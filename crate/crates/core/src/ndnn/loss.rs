use ndarray::Array2;

use crate::error::{Error, Result};

/// Mean squared error over every element, with its gradient
/// `2 (pred - target) / count`.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            op: "mse_loss",
            left: pred.shape().to_vec(),
            right: target.shape().to_vec(),
        });
    }
    let count = pred.len().max(1) as f64;
    let diff = pred - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    let grad = diff * (2.0 / count);
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn equal_inputs_give_zero() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let (l, g) = mse_loss(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_offset_gives_square() {
        let a = array![[1.0, 2.0, -7.0]];
        let b = a.mapv(|v| v - 1.5);
        let (l, _) = mse_loss(&a, &b).unwrap();
        assert_eq!(l, 2.25);
    }

    #[test]
    fn shape_mismatch() {
        let a = Array2::zeros((2, 3));
        let b = Array2::zeros((3, 2));
        assert!(matches!(
            mse_loss(&a, &b),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
