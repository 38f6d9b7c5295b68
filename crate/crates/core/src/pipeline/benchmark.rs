use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bounds::NominalBounds;
use super::dataset::{frozen_edges, node_inputs, scaled_positions};
use crate::error::{Error, Result};
use crate::gnn::{Emulator, GraphInput, Model};
use crate::icesim::{ScenarioParams, Simulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineTiming {
    /// `oracle` or a model name.
    pub engine: String,
    /// Fastest of the repetitions, wall-clock seconds.
    pub seconds: f64,
    pub repetitions: usize,
    /// Oracle time divided by this engine's time.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub scenarios: Vec<String>,
    pub n_nodes: usize,
    pub n_saved_steps: usize,
    pub threads: usize,
    pub hardware: String,
    pub engines: Vec<EngineTiming>,
}

impl TimingReport {
    pub fn engine(&self, name: &str) -> Option<&EngineTiming> {
        self.engines.iter().find(|e| e.engine == name)
    }
}

/// Short description of the machine running the benchmark.
pub fn hardware_string() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_owned())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_owned());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{cpu}, {cores} logical cores, {}", std::env::consts::OS)
}

fn fastest(repetitions: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repetitions.max(1) {
        let start = Instant::now();
        f()?;
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Emulated trajectory: one prediction per saved time from the initial
/// state, including input assembly.
pub fn emulate_trajectory(
    model: &Model,
    sim: &Simulator,
    params: &ScenarioParams,
    bounds: &NominalBounds,
) -> Result<Vec<ndarray::Array2<f64>>> {
    let edges = frozen_edges(&sim.mesh, &sim.topology, &sim.initial, bounds)?;
    let positions = scaled_positions(&sim.mesh);
    let cfg = &sim.config;
    (0..cfg.n_saved())
        .map(|k| {
            let time = (k * cfg.save_every) as f64 * cfg.dt;
            let features = node_inputs(&sim.initial, params.value(), time, bounds)?;
            model.predict(&GraphInput {
                topology: &sim.topology,
                edge_attrs: &edges,
                features: &features,
                positions: &positions,
            })
        })
        .collect()
}

/// Times the oracle and each model over the same scenario sweep, keeping
/// the fastest of `repetitions` runs.
pub fn benchmark(
    sim: &Simulator,
    sweep: &[ScenarioParams],
    models: &[Model],
    bounds: &NominalBounds,
    repetitions: usize,
) -> Result<TimingReport> {
    if repetitions == 0 || sweep.is_empty() {
        return Err(Error::InvalidConfig(
            "benchmark needs a scenario and at least one repetition".into(),
        ));
    }
    let oracle = fastest(repetitions, || {
        for p in sweep {
            sim.run(p)?;
        }
        Ok(())
    })?;
    let mut engines = vec![EngineTiming {
        engine: "oracle".into(),
        seconds: oracle,
        repetitions,
        speedup: 1.0,
    }];
    for model in models {
        let t = fastest(repetitions, || {
            for p in sweep {
                emulate_trajectory(model, sim, p, bounds)?;
            }
            Ok(())
        })?;
        engines.push(EngineTiming {
            engine: model.kind().name().to_owned(),
            seconds: t,
            repetitions,
            speedup: oracle / t.max(f64::MIN_POSITIVE),
        });
    }
    Ok(TimingReport {
        scenarios: sweep.iter().map(ScenarioParams::id).collect(),
        n_nodes: sim.mesh.n_nodes(),
        n_saved_steps: sim.config.n_saved(),
        threads: rayon::current_num_threads(),
        hardware: hardware_string(),
        engines,
    })
}
