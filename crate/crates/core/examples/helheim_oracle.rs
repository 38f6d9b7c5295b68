//! Calving sweep with the oracle: a lower von Mises threshold calves more
//! ice and pulls the front back.

use icegnn::icesim::{ScenarioKind, SimConfig, Simulator};

fn main() -> icegnn::Result<()> {
    let cfg = SimConfig {
        fine_edge: 1000.0,
        coarse_edge: 2500.0,
        n_steps: 100,
        save_every: 25,
        ..SimConfig::helheim()
    };
    let sim = Simulator::new(cfg, 0)?;
    println!("{} nodes, {} years", sim.mesh.n_nodes(), sim.config.duration());
    println!("{:>10} {:>10} {:>10} {:>12} {:>12}", "sigma_max", "ice nodes", "area km2", "volume km3", "calved km3");
    for sigma in ScenarioKind::Helheim.default_grid() {
        let traj = sim.run(&ScenarioKind::Helheim.params(sigma)?)?;
        let last = traj.states.last().unwrap();
        let volume: f64 = last.thickness.iter().zip(sim.fv.areas()).map(|(h, a)| h * a).sum();
        let calved: f64 = traj.budgets.iter().map(|b| b.calved).sum();
        let area: f64 = (0..last.n_nodes())
            .filter(|&k| last.mask[k])
            .map(|k| sim.fv.areas()[k])
            .sum();
        println!(
            "{:>6.2} MPa {:>10} {:>10.1} {:>12.3} {:>12.4}",
            sigma / 1e6,
            last.mask.iter().filter(|&&m| m).count(),
            area / 1e6,
            volume / 1e9,
            calved / 1e9 + 0.0
        );
    }
    Ok(())
}
