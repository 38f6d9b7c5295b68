//! Basal melt sweep on the floating-shelf preset.

use icegnn::icesim::{is_floating, ScenarioKind, SimConfig, Simulator};

fn main() -> icegnn::Result<()> {
    let cfg = SimConfig {
        fine_edge: 1000.0,
        coarse_edge: 2500.0,
        n_steps: 60,
        save_every: 12,
        ..SimConfig::pig()
    };
    let sim = Simulator::new(cfg, 0)?;
    let floating = |s: &icegnn::icesim::SimState| {
        (0..s.n_nodes())
            .filter(|&k| s.mask[k] && is_floating(s.thickness[k], s.bed[k], &sim.config))
            .count()
    };
    println!("{} nodes, {} floating at t = 0", sim.mesh.n_nodes(), floating(&sim.initial));
    println!("{:>6} {:>12} {:>12} {:>9}", "melt", "volume km3", "melted km3", "floating");
    for melt in [0.0, 10.0, 30.0, 50.0, 70.0] {
        let traj = sim.run(&ScenarioKind::Pig.params(melt)?)?;
        let last = traj.states.last().unwrap();
        let volume: f64 = last.thickness.iter().zip(sim.fv.areas()).map(|(h, a)| h * a).sum();
        let melted: f64 = traj.budgets.iter().map(|b| b.melted).sum();
        println!("{melt:>6.0} {:>12.3} {:>12.4} {:>9}", volume / 1e9, melted / 1e9 + 0.0, floating(last));
    }
    Ok(())
}
