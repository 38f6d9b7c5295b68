use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::gnn::{Architecture, Model, ModelKind};
use crate::icesim::{write_trajectory, ScenarioParams, Simulator, Trajectory};
use crate::mesh::{GridSpec, MeshGridMap, TriMesh};
use crate::ndnn::{Checkpoint, Parameterized};
use crate::pipeline::{
    benchmark, build_dataset, evaluate, split_dataset, train, Dataset, MetricsReport, NominalBounds,
    TimingReport, TrainHistory, TARGET_NAMES,
};

/// File layout under the output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub root: PathBuf,
}

impl Artifacts {
    pub fn new(root: &Path) -> Self {
        Artifacts { root: root.to_owned() }
    }

    pub fn mesh(&self) -> PathBuf {
        self.root.join("mesh.json")
    }

    pub fn trajectories(&self) -> PathBuf {
        self.root.join("trajectories")
    }

    pub fn trajectory(&self, params: &ScenarioParams) -> PathBuf {
        self.trajectories().join(format!("{}.traj", params.id()))
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.bin")
    }

    pub fn checkpoint(&self, kind: ModelKind) -> PathBuf {
        self.root.join(kind.name()).join("checkpoint.bin")
    }

    pub fn history(&self, kind: ModelKind) -> PathBuf {
        self.root.join(kind.name()).join("history.json")
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn mask_accuracy(&self) -> PathBuf {
        self.root.join("mask_accuracy.json")
    }

    pub fn timing(&self) -> PathBuf {
        self.root.join("timing.json")
    }

    /// Models with a checkpoint on disk, in [`ModelKind::ALL`] order.
    pub fn trained_models(&self) -> Vec<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .filter(|&k| self.checkpoint(k).exists())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub n_scenarios: usize,
    pub n_nodes: usize,
    pub n_samples: usize,
    pub dataset: PathBuf,
}

/// Runs the oracle sweep and writes the mesh, one trajectory per scenario
/// and the normalized dataset.
pub fn cmd_generate(config: &RunConfig) -> Result<GenerateSummary> {
    let cfg = config.sim_config()?;
    let out = Artifacts::new(&config.out);
    std::fs::create_dir_all(out.trajectories())?;
    let sim = Simulator::new(cfg.clone(), config.seed)?;
    let params: Vec<ScenarioParams> = config
        .param_grid()
        .into_iter()
        .map(|p| config.scenario.params(p))
        .collect::<Result<_>>()?;
    let trajectories: Vec<Trajectory> = params
        .par_iter()
        .map(|p| {
            sim.run(p).map_err(|e| Error::Scenario {
                id: p.id(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    sim.mesh.write_json(&out.mesh())?;
    for t in &trajectories {
        write_trajectory(&out.trajectory(&t.params), t, Some("../mesh.json"))?;
    }
    let bounds = NominalBounds::from_config(&cfg);
    let dataset = build_dataset(&trajectories, &sim.mesh, &bounds, config.edge_mode)?;
    dataset.write(&out.dataset())?;
    Ok(GenerateSummary {
        n_scenarios: trajectories.len(),
        n_nodes: dataset.n_nodes(),
        n_samples: dataset.len(),
        dataset: out.dataset(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointHeader {
    architecture: Architecture,
    bounds_hash: String,
    seed: u64,
    train: crate::pipeline::TrainConfig,
    best_epoch: usize,
}

fn grid_map(mesh: &TriMesh, arch: &Architecture) -> Result<Option<MeshGridMap>> {
    if arch.kind != ModelKind::Fcn {
        return Ok(None);
    }
    Ok(Some(MeshGridMap::new(mesh, GridSpec::covering(mesh, arch.grid_spacing)?)?))
}

/// Reads a checkpoint written by [`cmd_train`], checking it against the
/// dataset's normalization bounds.
pub fn load_model(path: &Path, dataset: &Dataset) -> Result<Model> {
    let ckpt = Checkpoint::read(path)?;
    let header: CheckpointHeader = serde_json::from_value(ckpt.header.clone())
        .map_err(|e| Error::format(path, format!("bad checkpoint header: {e}")))?;
    if header.bounds_hash != dataset.bounds_hash() {
        return Err(Error::BoundsMismatch {
            checkpoint: header.bounds_hash,
            dataset: dataset.bounds_hash(),
        });
    }
    let map = grid_map(&dataset.mesh, &header.architecture)?;
    let mut model = Model::new(&header.architecture, 0, map.as_ref())?;
    ckpt.load_into(&mut model, path)?;
    Ok(model)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub kind: ModelKind,
    pub n_parameters: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub history: TrainHistory,
    pub checkpoint: PathBuf,
}

/// Trains `config.model` on the dataset written by [`cmd_generate`].
pub fn cmd_train(config: &RunConfig, mut progress: impl FnMut(&crate::pipeline::EpochRecord)) -> Result<TrainSummary> {
    let out = Artifacts::new(&config.out);
    let dataset = Dataset::read(&out.dataset())?;
    let split = split_dataset(&sample_params(&dataset), &config.split_spec())?;
    let arch = config.architecture(config.model)?;
    let map = grid_map(&dataset.mesh, &arch)?;
    let mut model = Model::new(&arch, config.seed, map.as_ref())?;
    let history = train(&mut model, &dataset, &split.train, &split.val, &config.train, &mut progress)?;
    let header = CheckpointHeader {
        architecture: arch,
        bounds_hash: dataset.bounds_hash(),
        seed: config.seed,
        train: config.train,
        best_epoch: history.best_epoch,
    };
    std::fs::create_dir_all(out.checkpoint(arch.kind).parent().expect("model dir"))?;
    Checkpoint::from_model(serde_json::to_value(&header)?, &model).write(&out.checkpoint(arch.kind))?;
    std::fs::write(out.history(arch.kind), serde_json::to_string_pretty(&history)?)?;
    Ok(TrainSummary {
        kind: arch.kind,
        n_parameters: model.num_parameters(),
        n_train: split.train.len(),
        n_val: split.val.len(),
        history,
        checkpoint: out.checkpoint(arch.kind),
    })
}

fn sample_params(dataset: &Dataset) -> Vec<f64> {
    dataset.samples.iter().map(|s| s.param).collect()
}

/// Models to evaluate or time: the one given on the command line, or every
/// trained model.
fn selected_models(out: &Artifacts, only: Option<ModelKind>) -> Vec<ModelKind> {
    match only {
        Some(k) => vec![k],
        None => out.trained_models(),
    }
}

/// Scores trained models on the test split and writes `metrics.csv` and
/// `mask_accuracy.json`.
pub fn cmd_evaluate(config: &RunConfig, only: Option<ModelKind>) -> Result<Vec<MetricsReport>> {
    let out = Artifacts::new(&config.out);
    let dataset = Dataset::read(&out.dataset())?;
    let split = split_dataset(&sample_params(&dataset), &config.split_spec())?;
    let kinds = selected_models(&out, only);
    if kinds.is_empty() {
        return Err(Error::MissingArtifact(out.checkpoint(config.model)));
    }
    let mut reports = Vec::new();
    for kind in kinds {
        let model = load_model(&out.checkpoint(kind), &dataset)?;
        reports.push(evaluate(&model, &dataset, &split.test, config.masked)?);
    }
    MetricsReport::write_csv_file(&reports, &out.metrics())?;
    let accuracy: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| {
            serde_json::json!({
                "model": r.rows.first().map(|row| row.model.clone()),
                "per_param": r.mask_accuracy,
                "mean": r.mask_accuracy_mean,
            })
        })
        .collect();
    std::fs::write(out.mask_accuracy(), serde_json::to_string_pretty(&accuracy)?)?;
    Ok(reports)
}

/// Times the oracle and the trained models over the parameter grid and
/// writes `timing.json`.
pub fn cmd_benchmark(config: &RunConfig, only: Option<ModelKind>) -> Result<TimingReport> {
    let out = Artifacts::new(&config.out);
    let cfg = config.sim_config()?;
    let mesh = if out.mesh().exists() {
        TriMesh::read_json(&out.mesh())?
    } else {
        crate::icesim::generate_mesh(&cfg, config.seed)?
    };
    let sim = Simulator::with_mesh(cfg.clone(), mesh, config.seed)?;
    let bounds = NominalBounds::from_config(&cfg);
    let kinds = selected_models(&out, only);
    let mut models = Vec::new();
    if !kinds.is_empty() {
        let dataset = Dataset::read(&out.dataset())?;
        if dataset.bounds_hash() != bounds.hash() {
            return Err(Error::BoundsMismatch {
                checkpoint: dataset.bounds_hash(),
                dataset: bounds.hash(),
            });
        }
        for k in kinds {
            models.push(load_model(&out.checkpoint(k), &dataset)?);
        }
    }
    let sweep: Vec<ScenarioParams> = config
        .param_grid()
        .into_iter()
        .map(|p| config.scenario.params(p))
        .collect::<Result<_>>()?;
    let report = benchmark(&sim, &sweep, &models, &bounds, config.repetitions)?;
    std::fs::create_dir_all(&out.root)?;
    std::fs::write(out.timing(), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Plain-text table of the averaged metrics.
pub fn metrics_table(reports: &[MetricsReport]) -> String {
    let mut s = format!("{:<6} {:<10} {:>12} {:>8}\n", "model", "variable", "rmse", "r");
    for r in reports {
        for v in TARGET_NAMES {
            if let Some(row) = r.mean(v) {
                s += &format!("{:<6} {:<10} {:>12.4} {:>8.4}\n", row.model, v, row.rmse, row.r);
            }
        }
        s += &format!(
            "{:<6} {:<10} {:>12.4}\n",
            r.rows.first().map_or("", |row| row.model.as_str()),
            "mask_acc",
            r.mask_accuracy_mean
        );
    }
    s
}

pub fn timing_table(report: &TimingReport) -> String {
    let mut s = format!("{:<8} {:>12} {:>10}\n", "engine", "seconds", "speedup");
    for e in &report.engines {
        s += &format!("{:<8} {:>12.4} {:>10.2}\n", e.engine, e.seconds, e.speedup);
    }
    s += &format!("hardware: {}\n", report.hardware);
    s
}
