use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bounds::TARGET_NAMES;
use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gnn::{Emulator, N_OUTPUTS};

/// Pairs in a canonical order, so sums do not depend on node order.
fn sorted_pairs(pred: &[f64], target: &[f64]) -> Vec<(f64, f64)> {
    assert_eq!(pred.len(), target.len());
    let mut pairs: Vec<(f64, f64)> = pred.iter().copied().zip(target.iter().copied()).collect();
    pairs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    pairs
}

/// Root mean square difference.
pub fn rmse(pred: &[f64], target: &[f64]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let ss: f64 = sorted_pairs(pred, target)
        .iter()
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    (ss / pred.len() as f64).sqrt()
}

/// Pearson correlation. If either series is constant the correlation is
/// undefined; it is reported as 1 when the series are identical and 0
/// otherwise.
pub fn pearson_r(pred: &[f64], target: &[f64]) -> f64 {
    let n = pred.len() as f64;
    if pred.is_empty() {
        return 0.0;
    }
    if pred == target {
        return 1.0;
    }
    let pairs = sorted_pairs(pred, target);
    let mp = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mt = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut spp, mut stt, mut spt) = (0.0, 0.0, 0.0);
    for (p, t) in &pairs {
        let (a, b) = (p - mp, t - mt);
        spp += a * a;
        stt += b * b;
        spt += a * b;
    }
    if spp == 0.0 || stt == 0.0 {
        return 0.0;
    }
    (spt / (spp.sqrt() * stt.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    /// Scenario parameter, or `None` for the average over parameters.
    pub scenario_param: Option<f64>,
    pub variable: String,
    pub rmse: f64,
    pub r: f64,
    /// Number of scored node values.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
    /// Fraction of all node values whose thresholded mask prediction is
    /// right, per test parameter and overall.
    pub mask_accuracy: Vec<(f64, f64)>,
    pub mask_accuracy_mean: f64,
    pub masked: bool,
}

pub const CSV_HEADER: &str = "model,scenario_param,variable,rmse,r,n";

impl MetricsReport {
    /// Mean row for `variable`.
    pub fn mean(&self, variable: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.scenario_param.is_none() && r.variable == variable)
    }

    pub fn write_csv(&self, w: &mut impl Write, header: bool) -> Result<()> {
        if header {
            writeln!(w, "{CSV_HEADER}")?;
        }
        for r in &self.rows {
            let p = r.scenario_param.map_or_else(|| "mean".to_owned(), |p| p.to_string());
            writeln!(w, "{},{},{},{},{},{}", r.model, p, r.variable, r.rmse, r.r, r.n)?;
        }
        Ok(())
    }

    pub fn write_csv_file(reports: &[MetricsReport], path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{CSV_HEADER}")?;
        for r in reports {
            r.write_csv(&mut w, false)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scored values for one scenario parameter, in physical units.
#[derive(Debug, Default, Clone)]
pub struct Collected {
    pub pred: [Vec<f64>; N_OUTPUTS],
    pub target: [Vec<f64>; N_OUTPUTS],
    pub mask_hits: usize,
    pub mask_total: usize,
}

impl Collected {
    /// Adds one sample's physical predictions and targets (N × 4).
    pub fn push(&mut self, pred: &ndarray::Array2<f64>, target: &ndarray::Array2<f64>, masked: bool) {
        for k in 0..pred.nrows() {
            let ice = target[[k, 3]] >= 0.5;
            self.mask_total += 1;
            if (pred[[k, 3]] >= 0.5) == ice {
                self.mask_hits += 1;
            }
            if masked && !ice {
                continue;
            }
            for c in 0..N_OUTPUTS {
                self.pred[c].push(pred[[k, c]]);
                self.target[c].push(target[[k, c]]);
            }
        }
    }
}

/// Builds the report from per-parameter collections (ascending parameter).
pub fn report_from(model: &str, groups: &[(f64, Collected)], masked: bool) -> MetricsReport {
    let mut rows = Vec::new();
    let mut mask_accuracy = Vec::new();
    for (p, c) in groups {
        for v in 0..N_OUTPUTS {
            rows.push(MetricRow {
                model: model.to_owned(),
                scenario_param: Some(*p),
                variable: TARGET_NAMES[v].to_owned(),
                rmse: rmse(&c.pred[v], &c.target[v]),
                r: pearson_r(&c.pred[v], &c.target[v]),
                n: c.pred[v].len(),
            });
        }
        mask_accuracy.push((*p, c.mask_hits as f64 / c.mask_total.max(1) as f64));
    }
    let k = groups.len().max(1) as f64;
    for v in 0..N_OUTPUTS {
        let per: Vec<&MetricRow> = rows.iter().filter(|r| r.variable == TARGET_NAMES[v]).collect();
        rows.push(MetricRow {
            model: model.to_owned(),
            scenario_param: None,
            variable: TARGET_NAMES[v].to_owned(),
            rmse: per.iter().map(|r| r.rmse).sum::<f64>() / k,
            r: per.iter().map(|r| r.r).sum::<f64>() / k,
            n: per.iter().map(|r| r.n).sum(),
        });
    }
    let mask_accuracy_mean = mask_accuracy.iter().map(|a| a.1).sum::<f64>() / k;
    MetricsReport {
        rows,
        mask_accuracy,
        mask_accuracy_mean,
        masked,
    }
}

/// Scores `model` on the samples `indices` of `dataset`, per test parameter
/// and averaged over parameters. With `masked`, only nodes whose target
/// mask is 1 are scored.
pub fn evaluate<M: Emulator + Sync>(
    model: &M,
    dataset: &Dataset,
    indices: &[usize],
    masked: bool,
) -> Result<MetricsReport> {
    if indices.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    use rayon::prelude::*;
    let predictions: Vec<Result<ndarray::Array2<f64>>> = indices
        .par_iter()
        .map(|&k| model.predict(&dataset.input(k)).map(|p| dataset.denormalize_targets(&p)))
        .collect();
    let mut params: Vec<f64> = indices.iter().map(|&k| dataset.samples[k].param).collect();
    params.sort_by(f64::total_cmp);
    params.dedup();
    let mut groups: Vec<(f64, Collected)> = params.iter().map(|&p| (p, Collected::default())).collect();
    for (&k, pred) in indices.iter().zip(predictions) {
        let pred = pred?;
        let s = &dataset.samples[k];
        let target = dataset.denormalize_targets(&s.targets);
        let g = params.iter().position(|&p| p == s.param).expect("param collected");
        groups[g].1.push(&pred, &target, masked);
    }
    Ok(report_from(model.architecture().kind.name(), &groups, masked))
}
