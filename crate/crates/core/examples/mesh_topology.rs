//! Build the front-refined Helheim mesh, turn it into a graph and compute
//! edge attributes from the initial ice state.

use icegnn::icesim::{SimConfig, Simulator};
use icegnn::mesh::{compute_edge_attributes, EDGE_ATTRIBUTE_NAMES};

fn main() -> icegnn::Result<()> {
    let cfg = SimConfig {
        fine_edge: 1000.0,
        coarse_edge: 2500.0,
        ..SimConfig::helheim()
    };
    let sim = Simulator::new(cfg, 0)?;
    let (mesh, topo) = (&sim.mesh, &sim.topology);
    let degrees = topo.degrees();
    println!("nodes      {}", mesh.n_nodes());
    println!("triangles  {}", mesh.n_triangles());
    println!("edges      {} ({} directed)", topo.edges().len(), topo.n_directed());
    println!(
        "degree     min {} max {} mean {:.2}",
        degrees.iter().min().unwrap(),
        degrees.iter().max().unwrap(),
        degrees.iter().sum::<usize>() as f64 / degrees.len() as f64
    );
    println!("area       {:.3e} m^2", mesh.total_area());

    // With the same state twice the acceleration columns are zero.
    let attrs = compute_edge_attributes(mesh, topo, &sim.initial, &sim.initial, sim.config.dt)?;
    for (k, name) in EDGE_ATTRIBUTE_NAMES.iter().enumerate() {
        let col = attrs.values.column(k);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("{name:<14} [{lo:>10.4}, {hi:>10.4}]");
    }
    Ok(())
}
