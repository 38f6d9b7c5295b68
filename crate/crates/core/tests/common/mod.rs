#![allow(dead_code)]

use icegnn::mesh::GraphTopology;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random graph on `n` nodes that always contains the path 0-1-...-(n-1).
pub fn random_graph(n: usize, p: f64, seed: u64) -> GraphTopology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    GraphTopology::from_edges(n, &edges).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
}

/// Node `i` is renamed `perm[i]`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

pub fn permute_rows(a: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros(a.raw_dim());
    for (i, &p) in perm.iter().enumerate() {
        out.row_mut(p).assign(&a.row(i));
    }
    out
}

/// Edge rows moved to their directed-edge slots in `permuted`.
pub fn permute_edges(attrs: &Array2<f64>, topo: &GraphTopology, permuted: &GraphTopology, perm: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros(attrs.raw_dim());
    for e in 0..topo.n_directed() {
        let (i, j) = (topo.sources()[e], topo.targets()[e]);
        out.row_mut(permuted.directed_index(perm[i], perm[j]).unwrap())
            .assign(&attrs.row(e));
    }
    out
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `x Rᵀ + t` for a rotation by `theta`.
pub fn rigid_motion(x: &Array2<f64>, theta: f64, t: [f64; 2]) -> Array2<f64> {
    let (s, c) = theta.sin_cos();
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let (a, b) = (row[0], row[1]);
        row[0] = c * a - s * b + t[0];
        row[1] = s * a + c * b + t[1];
    }
    out
}
