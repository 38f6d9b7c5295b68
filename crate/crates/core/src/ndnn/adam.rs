use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::param::Param;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Applies one bias-corrected Adam update to every parameter.
///
/// Gradients are validated before anything is modified, so a non-finite
/// gradient leaves all parameters untouched.
pub fn adam_step(params: &mut [&mut Param], config: &AdamConfig) -> Result<()> {
    for p in params.iter() {
        if p.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                param: p.name.clone(),
            });
        }
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = *config;
    for p in params.iter_mut() {
        p.step += 1;
        let t = p.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let Param {
            value,
            grad,
            adam_m,
            adam_v,
            ..
        } = &mut **p;
        Zip::from(value)
            .and(&*grad)
            .and(adam_m)
            .and(adam_v)
            .for_each(|theta, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn scalar(value: f64, grad: f64) -> Param {
        let mut p = Param::new("theta", array![[value]]);
        p.grad[[0, 0]] = grad;
        p
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = scalar(0.0, 1.0);
        adam_step(&mut [&mut p], &AdamConfig::default()).unwrap();
        let expected = -0.001 * 1.0 / (1.0 + 1e-8);
        assert!((p.value[[0, 0]] - expected).abs() < 1e-18);
        assert_eq!(p.step, 1);
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = Param::new("w", array![[0.3, -1.2], [5.0, 0.0]]);
        let before = p.value.clone();
        adam_step(&mut [&mut p], &AdamConfig::default()).unwrap();
        assert_eq!(p.value, before);
    }

    #[test]
    fn first_step_opposes_gradient_sign() {
        for g in [-3.0, -1e-6, 2e-9, 0.5, 400.0] {
            let mut p = scalar(1.0, g);
            adam_step(&mut [&mut p], &AdamConfig::default()).unwrap();
            let delta = p.value[[0, 0]] - 1.0;
            assert_eq!(delta.signum(), -g.signum(), "g = {g}");
        }
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut ok = scalar(1.0, 1.0);
        let mut bad = scalar(1.0, f64::NAN);
        bad.name = "layer3.bias".into();
        let err = adam_step(&mut [&mut ok, &mut bad], &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref param } if param == "layer3.bias"));
        assert_eq!(ok.value[[0, 0]], 1.0);
    }
}
