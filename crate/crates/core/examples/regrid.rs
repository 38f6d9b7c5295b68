//! Interpolate a nodal field onto the regular grid the FCN works on and
//! back, and measure what the round trip loses.

use icegnn::icesim::{generate_mesh, SimConfig};
use icegnn::mesh::{grid_to_mesh, mesh_to_grid, GridSpec};

fn main() -> icegnn::Result<()> {
    let cfg = SimConfig {
        fine_edge: 800.0,
        coarse_edge: 2000.0,
        ..SimConfig::helheim()
    };
    let mesh = generate_mesh(&cfg, 0)?;
    let field: Vec<f64> = mesh
        .nodes
        .iter()
        .map(|p| (p[0] / 6000.0).sin() * (p[1] / 4000.0).cos())
        .collect();

    for spacing in [2000.0, 1000.0, 500.0] {
        let spec = GridSpec::covering(&mesh, spacing)?;
        let grid = mesh_to_grid(&mesh, &field, &spec)?;
        let back = grid_to_mesh(&grid, &mesh)?;
        let rms = (field.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            / field.len() as f64)
            .sqrt();
        let valid = grid.valid.iter().filter(|&&v| v).count();
        println!(
            "h = {spacing:>6} m  grid {:>3} x {:<3} valid {valid:>5}  round-trip rms {rms:.2e}",
            spec.nx, spec.ny
        );
    }
    Ok(())
}
