//! Central finite differences against the hand-written backward passes of
//! all three models.

use icegnn::gnn::{Architecture, Emulator, GraphInput, Model, ModelKind, N_INPUTS, N_OUTPUTS};
use icegnn::icesim::{SimConfig, Simulator};
use icegnn::mesh::{GridSpec, MeshGridMap, N_EDGE_ATTRIBUTES};
use icegnn::ndnn::{grad_check, GradCheckConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
}

fn main() -> icegnn::Result<()> {
    let cfg = SimConfig {
        domain: [6000.0, 3000.0],
        fine_edge: 1500.0,
        coarse_edge: 1500.0,
        refine_band: 1000.0,
        refine_transition: 1000.0,
        ..SimConfig::helheim()
    };
    let sim = Simulator::new(cfg, 0)?;
    let n = sim.mesh.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let attrs = random(sim.topology.n_directed(), N_EDGE_ATTRIBUTES, &mut rng);
    let feats = random(n, N_INPUTS, &mut rng);
    let pos = random(n, 2, &mut rng);
    let targets = random(n, N_OUTPUTS, &mut rng);
    let input = GraphInput {
        topology: &sim.topology,
        edge_attrs: &attrs,
        features: &feats,
        positions: &pos,
    };
    let map = MeshGridMap::new(&sim.mesh, GridSpec::covering(&sim.mesh, 1000.0)?)?;
    println!("{n}-node graph");
    for kind in ModelKind::ALL {
        let mut model = Model::new(&Architecture::new(kind).with_width(6), 2, Some(&map))?;
        let report = grad_check(
            &mut model,
            |m| m.loss(&input, &targets).unwrap(),
            |m| {
                m.loss_and_backward(&input, &targets).unwrap();
            },
            &GradCheckConfig::default(),
        );
        let checked: usize = report.params.iter().map(|p| p.checked).sum();
        println!(
            "{kind:<5} {:>3} tensors {checked:>5} entries  max rel error {:.2e}  {}",
            report.params.len(),
            report.max_rel_error,
            if report.passed() { "ok" } else { "FAILED" }
        );
    }
    Ok(())
}
