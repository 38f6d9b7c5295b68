//! Rotating and translating the coordinate embeddings rotates and
//! translates the EGCN layer's coordinate output and leaves h alone.

use icegnn::gnn::EgcnLayer;
use icegnn::icesim::{SimConfig, Simulator};
use icegnn::mesh::N_EDGE_ATTRIBUTES;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rigid(x: &Array2<f64>, theta: f64, t: [f64; 2]) -> Array2<f64> {
    let (s, c) = theta.sin_cos();
    let mut out = x.clone();
    for mut r in out.rows_mut() {
        let (a, b) = (r[0], r[1]);
        r[0] = c * a - s * b + t[0];
        r[1] = s * a + c * b + t[1];
    }
    out
}

fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn main() -> icegnn::Result<()> {
    let cfg = SimConfig {
        fine_edge: 2000.0,
        coarse_edge: 4000.0,
        ..SimConfig::helheim()
    };
    let sim = Simulator::new(cfg, 0)?;
    let n = sim.mesh.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut random = |r: usize, c: usize| Array2::from_shape_simple_fn((r, c), || rng.gen_range(-1.0..1.0));
    let h = random(n, 16);
    let x = random(n, 2);
    let a = random(sim.topology.n_directed(), N_EDGE_ATTRIBUTES);
    let layer = EgcnLayer::new("l", 16, 16, 32, 16, &mut ChaCha8Rng::seed_from_u64(3));
    let (h0, x0, _) = layer.forward(&h, &x, &sim.topology, &a)?;

    println!("{n} nodes");
    for (theta, t) in [(0.3, [0.0, 0.0]), (1.7, [2.0, -1.0]), (-2.9, [-5.0, 7.5])] {
        let (h1, x1, _) = layer.forward(&h, &rigid(&x, theta, t), &sim.topology, &a)?;
        println!(
            "theta {theta:>5.2} t {t:?}: |dh| {:.1e}  |R x' + t - x'(Rx + t)| {:.1e}  |x'(Rx + t) - x'| {:.2}",
            max_diff(&h0, &h1),
            max_diff(&rigid(&x0, theta, t), &x1),
            max_diff(&x0, &x1),
        );
    }
    Ok(())
}
