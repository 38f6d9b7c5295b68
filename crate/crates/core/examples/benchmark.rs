//! Wall-clock comparison of the oracle with untrained emulators of the
//! default size over the same scenario sweep.

use icegnn::gnn::{Architecture, Model, ModelKind};
use icegnn::icesim::{ScenarioKind, SimConfig, Simulator};
use icegnn::mesh::{GridSpec, MeshGridMap};
use icegnn::pipeline::{benchmark, NominalBounds};

fn main() -> icegnn::Result<()> {
    let cfg = SimConfig {
        fine_edge: 1000.0,
        coarse_edge: 2500.0,
        n_steps: 60,
        save_every: 10,
        ..SimConfig::helheim()
    };
    let sim = Simulator::new(cfg.clone(), 0)?;
    let bounds = NominalBounds::from_config(&cfg);
    let map = MeshGridMap::new(&sim.mesh, GridSpec::covering(&sim.mesh, 1000.0)?)?;
    let models = ModelKind::ALL
        .iter()
        .map(|&k| Model::new(&Architecture::new(k), 0, Some(&map)))
        .collect::<icegnn::Result<Vec<_>>>()?;
    let sweep = [0.7e6, 0.85e6, 1.0e6]
        .iter()
        .map(|&s| ScenarioKind::Helheim.params(s))
        .collect::<icegnn::Result<Vec<_>>>()?;
    let report = benchmark(&sim, &sweep, &models, &bounds, 2)?;
    print!("{}", icegnn::cli::timing_table(&report));
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
