//! Central finite-difference verification of analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::param::Parameterized;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub step: f64,
    /// Pass threshold on the maximum relative error.
    pub tol: f64,
    /// Entries checked per parameter tensor; larger tensors are subsampled
    /// with a fixed seed.
    pub max_entries_per_param: usize,
    /// Lower bound on the relative-error denominator so entries whose true
    /// gradient is zero are compared absolutely.
    pub min_scale: f64,
    /// The denominator is also floored at this fraction of the largest
    /// analytic gradient in the model. Central differences carry roundoff
    /// of order `ε |loss| / step`, which swamps entries many orders of
    /// magnitude below the dominant ones.
    pub scale_fraction: f64,
    pub seed: u64,
}

impl GradCheckConfig {
    pub fn with_tol(tol: f64) -> Self {
        GradCheckConfig {
            tol,
            ..Default::default()
        }
    }
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-6,
            tol: 1e-5,
            max_entries_per_param: 64,
            min_scale: 1e-6,
            scale_fraction: 1e-3,
            seed: 0x6ead,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tol
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| p.max_rel_error >= self.tol)
    }
}

pub fn relative_error(analytic: f64, numeric: f64, min_scale: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(min_scale);
    (analytic - numeric).abs() / scale
}

/// Compares the gradients written by `backward` against central differences
/// of `loss` for every parameter of `model`.
///
/// `backward` must accumulate d(loss)/d(param) into `Param::grad`; gradients
/// are zeroed before it is called. Parameter values are restored exactly.
pub fn grad_check<M, L, B>(
    model: &mut M,
    loss: L,
    mut backward: B,
    config: &GradCheckConfig,
) -> GradCheckReport
where
    M: Parameterized,
    L: Fn(&M) -> f64,
    B: FnMut(&mut M),
{
    model.zero_grad();
    backward(model);
    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| p.grad.iter().copied().collect())
        .collect();

    let largest = analytic
        .iter()
        .flatten()
        .fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = config.min_scale.max(config.scale_fraction * largest);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_params = analytic.len();
    let mut reports = Vec::with_capacity(n_params);
    for pi in 0..n_params {
        let (name, len) = {
            let p = &model.params()[pi];
            (p.name.clone(), p.len())
        };
        let indices: Vec<usize> = if len <= config.max_entries_per_param {
            (0..len).collect()
        } else {
            let mut idx =
                rand::seq::index::sample(&mut rng, len, config.max_entries_per_param).into_vec();
            idx.sort_unstable();
            idx
        };
        let mut report = ParamCheck {
            name,
            checked: indices.len(),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for &k in &indices {
            let original = flat_get(model, pi, k);
            flat_set(model, pi, k, original + config.step);
            let plus = loss(model);
            flat_set(model, pi, k, original - config.step);
            let minus = loss(model);
            flat_set(model, pi, k, original);
            let numeric = (plus - minus) / (2.0 * config.step);
            let a = analytic[pi][k];
            let err = relative_error(a, numeric, floor);
            if err > report.max_rel_error || !err.is_finite() {
                report.max_rel_error = if err.is_finite() { err } else { f64::INFINITY };
                report.worst_index = k;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
        reports.push(report);
    }
    let max_rel_error = reports
        .iter()
        .map(|r| r.max_rel_error)
        .fold(0.0, f64::max);
    GradCheckReport {
        params: reports,
        max_rel_error,
        tol: config.tol,
    }
}

fn flat_get<M: Parameterized>(model: &M, param: usize, k: usize) -> f64 {
    let p = model.params()[param];
    *p.value.iter().nth(k).expect("index in range")
}

fn flat_set<M: Parameterized>(model: &mut M, param: usize, k: usize, v: f64) {
    let mut params = model.params_mut();
    let p = &mut params[param];
    *p.value.iter_mut().nth(k).expect("index in range") = v;
}
