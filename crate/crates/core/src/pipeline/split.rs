use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icesim::ScenarioKind;

/// Parameter-stratified split.
///
/// Samples whose parameter is in `test` form the test set. If `val` is
/// empty, the `trainval` samples are shuffled with `seed` and the first
/// `floor(train_fraction · n)` become training samples, the rest
/// validation. Otherwise validation is by parameter: `trainval` samples
/// train, `val` samples validate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub trainval: Vec<f64>,
    #[serde(default)]
    pub val: Vec<f64>,
    pub test: Vec<f64>,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_fraction() -> f64 {
    0.7
}

/// Sample indices of each subset, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    /// Calving sweep: hold out 0.75 and 0.95 MPa, random 70/30 on the rest.
    pub fn helheim() -> Self {
        SplitSpec {
            trainval: vec![0.70e6, 0.80e6, 0.85e6, 0.90e6, 1.0e6],
            val: vec![],
            test: vec![0.75e6, 0.95e6],
            train_fraction: 0.7,
            seed: 0,
        }
    }

    /// Melt sweep: validate on 10, 30, 50, 70 m/yr, test on 0, 20, 40,
    /// 60 m/yr, train on every other rate of the 0..70 grid.
    pub fn pig() -> Self {
        let val = vec![10.0, 30.0, 50.0, 70.0];
        let test = vec![0.0, 20.0, 40.0, 60.0];
        let trainval = ScenarioKind::Pig
            .default_grid()
            .into_iter()
            .filter(|v| !val.contains(v) && !test.contains(v))
            .collect();
        SplitSpec {
            trainval,
            val,
            test,
            train_fraction: 0.7,
            seed: 0,
        }
    }

    pub fn preset(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Helheim => Self::helheim(),
            ScenarioKind::Pig => Self::pig(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(Error::InvalidConfig(format!(
                "train fraction {} must lie in [0, 1]",
                self.train_fraction
            )));
        }
        for a in [&self.trainval, &self.val, &self.test] {
            for b in [&self.trainval, &self.val, &self.test] {
                if std::ptr::eq(a, b) {
                    continue;
                }
                if let Some(v) = a.iter().find(|v| contains(b, **v)) {
                    return Err(Error::InvalidConfig(format!(
                        "parameter {v} is listed in more than one split"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every parameter named by the spec.
    pub fn all_params(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .trainval
            .iter()
            .chain(&self.val)
            .chain(&self.test)
            .copied()
            .collect();
        all.sort_by(f64::total_cmp);
        all
    }
}

fn same_param(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn contains(list: &[f64], v: f64) -> bool {
    list.iter().any(|&p| same_param(p, v))
}

/// Splits samples given by their parameter values.
pub fn split_dataset(sample_params: &[f64], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut trainval = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (k, &p) in sample_params.iter().enumerate() {
        if contains(&spec.test, p) {
            test.push(k);
        } else if contains(&spec.val, p) {
            val.push(k);
        } else if contains(&spec.trainval, p) {
            trainval.push(k);
        } else {
            return Err(Error::UnknownParam(p));
        }
    }
    let train = if spec.val.is_empty() {
        trainval.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
        let n_train = (spec.train_fraction * trainval.len() as f64).floor() as usize;
        val = trainval.split_off(n_train);
        val.sort_unstable();
        trainval.sort_unstable();
        trainval
    } else {
        trainval
    };
    Ok(Split { train, val, test })
}
