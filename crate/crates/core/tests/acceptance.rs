//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `ACCEPTANCE_ONLY=1,4` runs a subset.

mod common;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use icegnn::cli::{cmd_benchmark, cmd_evaluate, cmd_generate, cmd_train, Artifacts, RunConfig};
use icegnn::gnn::{
    conv2d_forward, Architecture, Conv2d, CoordMode, EgcnLayer, Emulator, GcnLayer, GraphInput, HeadMode,
    Model, ModelKind, N_INPUTS, N_OUTPUTS,
};
use icegnn::icesim::{compute_velocity, total_volume, ScenarioKind, SimConfig, Simulator};
use icegnn::mesh::{BoundaryFlag, GraphTopology, GridSpec, MeshGridMap, TriMesh, N_EDGE_ATTRIBUTES};
use icegnn::ndnn::{
    grad_check, leaky_relu, leaky_relu_backward, mse_loss, relative_error, GradCheckConfig, Linear,
    LEAKY_SLOPE,
};
use icegnn::pipeline::{pearson_r, rmse, split_dataset, SplitSpec};
use ndarray::{Array2, Array3, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

// ---------------------------------------------------------------- 1

fn split_counts() -> Outcome {
    let mut out = Vec::new();
    for (kind, per, expected) in [
        (ScenarioKind::Helheim, 261, (913, 392, 522)),
        (ScenarioKind::Pig, 240, (6720, 960, 960)),
    ] {
        let params: Vec<f64> = kind
            .default_grid()
            .iter()
            .flat_map(|&p| std::iter::repeat(p).take(per))
            .collect();
        let s = split_dataset(&params, &SplitSpec::preset(kind)).map_err(|e| e.to_string())?;
        let got = (s.train.len(), s.val.len(), s.test.len());
        if got != expected {
            return Err(format!("{kind:?}: {got:?}, expected {expected:?}"));
        }
        out.push(format!("{kind:?} {}/{}/{}", got.0, got.1, got.2));
    }
    Ok(out.join(", "))
}

// ---------------------------------------------------------------- 2

fn equivariance() -> Outcome {
    let mut rigid = 0.0f64;
    for t in 0..100u64 {
        let n = 3 + (t as usize % 10);
        let topo = random_graph(n, 0.4, t);
        let layer = EgcnLayer::new("l", 6, 6, 16, 8, &mut ChaCha8Rng::seed_from_u64(t + 1000));
        let h = random_matrix(n, 6, t + 1);
        // coordinates on the normalized input scale
        let x = random_matrix(n, 2, t + 2);
        let a = random_matrix(topo.n_directed(), N_EDGE_ATTRIBUTES, t + 3);
        let motion = random_matrix(1, 3, t + 4);
        let theta = std::f64::consts::PI * motion[[0, 0]];
        let shift = [10.0 * motion[[0, 1]], 10.0 * motion[[0, 2]]];
        let (h1, x1, _) = layer.forward(&h, &x, &topo, &a).map_err(|e| e.to_string())?;
        let (h2, x2, _) = layer
            .forward(&h, &rigid_motion(&x, theta, shift), &topo, &a)
            .map_err(|e| e.to_string())?;
        rigid = rigid
            .max(max_abs_diff(&h1, &h2))
            .max(max_abs_diff(&rigid_motion(&x1, theta, shift), &x2));
    }

    let mut layer_perm = 0.0f64;
    for t in 0..50u64 {
        let n = 2 + (t as usize % 11);
        let topo = random_graph(n, 0.4, t);
        let perm = random_permutation(n, t + 7);
        let ptopo = topo.permuted(&perm);
        let h = random_matrix(n, 5, t + 1);
        let x = random_matrix(n, 2, t + 2);
        let a = random_matrix(topo.n_directed(), N_EDGE_ATTRIBUTES, t + 3);
        let pa = permute_edges(&a, &topo, &ptopo, &perm);
        let e = EgcnLayer::new("l", 5, 5, 8, 6, &mut ChaCha8Rng::seed_from_u64(t));
        let (h1, x1, _) = e.forward(&h, &x, &topo, &a).unwrap();
        let (h2, x2, _) = e
            .forward(&permute_rows(&h, &perm), &permute_rows(&x, &perm), &ptopo, &pa)
            .unwrap();
        let g = GcnLayer::new("g", 5, 4, &mut ChaCha8Rng::seed_from_u64(t));
        let (y1, _) = g.forward(&h, &topo).unwrap();
        let (y2, _) = g.forward(&permute_rows(&h, &perm), &ptopo).unwrap();
        layer_perm = layer_perm
            .max(max_abs_diff(&permute_rows(&h1, &perm), &h2))
            .max(max_abs_diff(&permute_rows(&x1, &perm), &x2))
            .max(max_abs_diff(&permute_rows(&y1, &perm), &y2));
    }

    // Full models: the deviation is measured relative to the output scale,
    // since relabelling reorders the neighbour sums.
    let mut model_perm = 0.0f64;
    let mut archs = vec![Architecture::new(ModelKind::Gcn).with_width(8)];
    for head in [HeadMode::CoordVelocity, HeadMode::AllFromHidden] {
        for coord in [CoordMode::Velocity, CoordMode::Position] {
            archs.push(Architecture { head, coord, ..Architecture::new(ModelKind::Egcn).with_width(8) });
        }
    }
    for t in 0..10u64 {
        let n = 12;
        let topo = random_graph(n, 0.35, t);
        let perm = random_permutation(n, t + 1);
        let ptopo = topo.permuted(&perm);
        let feats = random_matrix(n, N_INPUTS, t + 2);
        let pos = random_matrix(n, 2, t + 3);
        let a = random_matrix(topo.n_directed(), N_EDGE_ATTRIBUTES, t + 4);
        let (pf, pp, pa) = (
            permute_rows(&feats, &perm),
            permute_rows(&pos, &perm),
            permute_edges(&a, &topo, &ptopo, &perm),
        );
        for arch in &archs {
            let model = Model::new(arch, t, None).unwrap();
            let y1 = model
                .predict(&GraphInput { topology: &topo, edge_attrs: &a, features: &feats, positions: &pos })
                .unwrap();
            let y2 = model
                .predict(&GraphInput { topology: &ptopo, edge_attrs: &pa, features: &pf, positions: &pp })
                .unwrap();
            let scale = y1.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            model_perm = model_perm.max(max_abs_diff(&permute_rows(&y1, &perm), &y2) / scale);
        }
    }
    check(
        rigid <= 1e-9 && layer_perm <= 1e-12 && model_perm <= 1e-12,
        format!(
            "rigid motion max dev {rigid:.2e} (<= 1e-9), layer permutation {layer_perm:.2e} (<= 1e-12), \
             model permutation {model_perm:.2e} relative (<= 1e-12)"
        ),
    )
}

// ---------------------------------------------------------------- 3

/// Structured lattice with the right edge as the calving front.
fn lattice(nx: usize, ny: usize, lx: f64, ly: f64) -> TriMesh {
    let mut nodes = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            nodes.push([lx * i as f64 / (nx - 1) as f64, ly * j as f64 / (ny - 1) as f64]);
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut triangles = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let boundary = (0..nodes.len())
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            if i == nx - 1 {
                BoundaryFlag::Front
            } else if i == 0 || j == 0 || j == ny - 1 {
                BoundaryFlag::Lateral
            } else {
                BoundaryFlag::Interior
            }
        })
        .collect();
    TriMesh::new(nodes, triangles, boundary).unwrap()
}

fn numeric_input_error(
    grad: &Array2<f64>,
    x: &Array2<f64>,
    f: impl Fn(&Array2<f64>) -> f64,
) -> f64 {
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for idx in ndarray::indices(x.dim()) {
        let (mut p, mut m) = (x.clone(), x.clone());
        p[idx] += eps;
        m[idx] -= eps;
        let num = (f(&p) - f(&m)) / (2.0 * eps);
        worst = worst.max(relative_error(grad[idx], num, 1e-6));
    }
    worst
}

fn gradients() -> Outcome {
    let cfg = GradCheckConfig::default();
    let mut results: Vec<(String, f64)> = Vec::new();

    // linear
    let x = random_matrix(6, 5, 1);
    let t = random_matrix(6, 3, 2);
    let mut lin = Linear::new("lin", 5, 3, &mut ChaCha8Rng::seed_from_u64(3));
    let r = grad_check(
        &mut lin,
        |l| mse_loss(&l.forward(&x).unwrap(), &t).unwrap().0,
        |l| {
            let dy = mse_loss(&l.forward(&x).unwrap(), &t).unwrap().1;
            l.backward(&x, &dy);
        },
        &cfg,
    );
    results.push(("linear".into(), r.max_rel_error));

    // LeakyReLU away from the kink
    let x = random_matrix(8, 4, 4).mapv(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    let w = random_matrix(8, 4, 5);
    let dy = w.clone();
    let g = leaky_relu_backward(&x, &dy, LEAKY_SLOPE);
    let e = numeric_input_error(&g, &x, |x| (leaky_relu(x, LEAKY_SLOPE) * &w).sum());
    results.push(("leaky_relu".into(), e));

    // MSE
    let p = random_matrix(7, 4, 6);
    let t = random_matrix(7, 4, 7);
    let g = mse_loss(&p, &t).unwrap().1;
    let e = numeric_input_error(&g, &p, |p| mse_loss(p, &t).unwrap().0);
    results.push(("mse".into(), e));

    // EGCN layer
    let topo = random_graph(10, 0.4, 8);
    let h = random_matrix(10, 4, 9);
    let xc = random_matrix(10, 2, 10);
    let a = random_matrix(topo.n_directed(), N_EDGE_ATTRIBUTES, 11);
    let (ht, xt) = (random_matrix(10, 4, 12), random_matrix(10, 2, 13));
    let mut layer = EgcnLayer::new("e", 4, 4, 8, 6, &mut ChaCha8Rng::seed_from_u64(14));
    let r = grad_check(
        &mut layer,
        |l| {
            let (h1, x1, _) = l.forward(&h, &xc, &topo, &a).unwrap();
            mse_loss(&h1, &ht).unwrap().0 + mse_loss(&x1, &xt).unwrap().0
        },
        |l| {
            let (h1, x1, c) = l.forward(&h, &xc, &topo, &a).unwrap();
            l.backward(&c, &topo, &mse_loss(&h1, &ht).unwrap().1, &mse_loss(&x1, &xt).unwrap().1);
        },
        &cfg,
    );
    results.push(("egcn_layer".into(), r.max_rel_error));

    // GCN layer
    let t = random_matrix(10, 3, 15);
    let mut gl = GcnLayer::new("g", 4, 3, &mut ChaCha8Rng::seed_from_u64(16));
    let r = grad_check(
        &mut gl,
        |l| mse_loss(&l.forward(&h, &topo).unwrap().0, &t).unwrap().0,
        |l| {
            let (y, c) = l.forward(&h, &topo).unwrap();
            l.backward(&c, &topo, &mse_loss(&y, &t).unwrap().1);
        },
        &cfg,
    );
    results.push(("gcn_layer".into(), r.max_rel_error));

    // 3x3 conv on an 8x8 grid
    let (nx, ny) = (8, 8);
    let x = random_matrix(nx * ny, 3, 17);
    let t = random_matrix(nx * ny, 2, 18);
    let mut conv = Conv2d::new("c", 3, 2, &mut ChaCha8Rng::seed_from_u64(19));
    let r = grad_check(
        &mut conv,
        |c| mse_loss(&c.forward(&x, nx, ny).unwrap().0, &t).unwrap().0,
        |c| {
            let (y, cache) = c.forward(&x, nx, ny).unwrap();
            c.backward(&cache, &mse_loss(&y, &t).unwrap().1, nx, ny);
        },
        &cfg,
    );
    results.push(("conv3x3".into(), r.max_rel_error));

    // full models: graph models on 16 nodes, the FCN on an 8x8 grid
    let n = 16;
    let topo = random_graph(n, 0.3, 20);
    let a = random_matrix(topo.n_directed(), N_EDGE_ATTRIBUTES, 21);
    let feats = random_matrix(n, N_INPUTS, 22);
    let pos = random_matrix(n, 2, 23);
    let targets = random_matrix(n, N_OUTPUTS, 24);
    let input = GraphInput { topology: &topo, edge_attrs: &a, features: &feats, positions: &pos };
    let mut archs = vec![("gcn".to_string(), Architecture::new(ModelKind::Gcn).with_width(6))];
    for head in [HeadMode::CoordVelocity, HeadMode::AllFromHidden] {
        for coord in [CoordMode::Velocity, CoordMode::Position] {
            archs.push((
                format!("egcn/{head:?}/{coord:?}"),
                Architecture { head, coord, ..Architecture::new(ModelKind::Egcn).with_width(6) },
            ));
        }
    }
    for (name, arch) in archs {
        let mut model = Model::new(&arch, 25, None).unwrap();
        let r = grad_check(
            &mut model,
            |m| m.loss(&input, &targets).unwrap(),
            |m| {
                m.loss_and_backward(&input, &targets).unwrap();
            },
            &cfg,
        );
        results.push((name, r.max_rel_error));
    }

    let mesh = lattice(4, 4, 7000.0, 7000.0);
    let spec = GridSpec::covering(&mesh, 1000.0).unwrap();
    if (spec.nx, spec.ny) != (8, 8) {
        return Err(format!("FCN grid is {}x{}, expected 8x8", spec.nx, spec.ny));
    }
    let map = MeshGridMap::new(&mesh, spec).unwrap();
    let n = mesh.n_nodes();
    let topo = GraphTopology::from_edges(n, &[]).unwrap();
    let a = Array2::zeros((0, N_EDGE_ATTRIBUTES));
    let feats = random_matrix(n, N_INPUTS, 26);
    let pos = Array2::zeros((n, 2));
    let targets = random_matrix(n, N_OUTPUTS, 27);
    let input = GraphInput { topology: &topo, edge_attrs: &a, features: &feats, positions: &pos };
    let mut fcn = Model::new(&Architecture::new(ModelKind::Fcn).with_width(5), 28, Some(&map)).unwrap();
    let r = grad_check(
        &mut fcn,
        |m| m.loss(&input, &targets).unwrap(),
        |m| {
            m.loss_and_backward(&input, &targets).unwrap();
        },
        &cfg,
    );
    results.push(("fcn".into(), r.max_rel_error));

    let worst = results.iter().fold(0.0f64, |m, (_, e)| m.max(*e));
    let failing: Vec<String> = results
        .iter()
        .filter(|(_, e)| *e >= 1e-5)
        .map(|(n, e)| format!("{n} {e:.2e}"))
        .collect();
    check(
        failing.is_empty(),
        if failing.is_empty() {
            format!("{} checks, worst relative error {worst:.2e} (< 1e-5)", results.len())
        } else {
            format!("failing: {}", failing.join(", "))
        },
    )
}

// ---------------------------------------------------------------- 4

fn dense_egcn(
    layer: &EgcnLayer,
    h: &Array2<f64>,
    x: &Array2<f64>,
    topo: &GraphTopology,
    attrs: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let n = h.nrows();
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in topo.edges() {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    let mut h_out = Array2::zeros((n, layer.out_width()));
    let mut x_out = x.clone();
    for i in 0..n {
        let deg = adj[i].iter().filter(|&&a| a).count();
        let c = if deg == 0 { 0.0 } else { 1.0 / deg as f64 };
        let mut m_i = vec![0.0; layer.message_width()];
        let mut shift = [0.0; 2];
        for j in 0..n {
            if !adj[i][j] {
                continue;
            }
            let e = topo.directed_index(i, j).unwrap();
            let mut row: Vec<f64> = h.row(i).to_vec();
            row.extend(h.row(j).iter());
            let d = [x[[i, 0]] - x[[j, 0]], x[[i, 1]] - x[[j, 1]]];
            row.push(d[0] * d[0] + d[1] * d[1]);
            row.extend(attrs.row(e).iter());
            let m = layer.phi_e.infer(&Array2::from_shape_vec((1, row.len()), row).unwrap()).unwrap();
            let w = layer.phi_x.infer(&m).unwrap()[[0, 0]];
            for k in 0..m_i.len() {
                m_i[k] += m[[0, k]];
            }
            shift[0] += d[0] * w;
            shift[1] += d[1] * w;
        }
        x_out[[i, 0]] += c * shift[0];
        x_out[[i, 1]] += c * shift[1];
        let mut row: Vec<f64> = h.row(i).to_vec();
        row.extend(m_i.iter().map(|v| c * v));
        let len = row.len();
        let out = layer.phi_h.infer(&Array2::from_shape_vec((1, len), row).unwrap()).unwrap();
        h_out.row_mut(i).assign(&out.row(0));
    }
    (h_out, x_out)
}

fn dense_gcn(h: &Array2<f64>, w: &Array2<f64>, topo: &GraphTopology) -> Array2<f64> {
    let n = h.nrows();
    let mut a = Array2::<f64>::eye(n);
    for &(i, j) in topo.edges() {
        a[[i, j]] = 1.0;
        a[[j, i]] = 1.0;
    }
    let d: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] /= (d[i] * d[j]).sqrt();
        }
    }
    leaky_relu(&a.dot(h).dot(w), LEAKY_SLOPE)
}

fn naive_conv(grid: &Array3<f64>, kernel: &Array4<f64>) -> Array3<f64> {
    let (c_in, nx, ny) = grid.dim();
    let c_out = kernel.dim().0;
    let mut out = Array3::zeros((c_out, nx, ny));
    for o in 0..c_out {
        for ix in 0..nx as i64 {
            for iy in 0..ny as i64 {
                let mut acc = 0.0;
                for c in 0..c_in {
                    for kx in 0..3i64 {
                        for ky in 0..3i64 {
                            let (sx, sy) = (ix + kx - 1, iy + ky - 1);
                            if sx >= 0 && sy >= 0 && sx < nx as i64 && sy < ny as i64 {
                                acc += kernel[[o, c, kx as usize, ky as usize]] * grid[[c, sx as usize, sy as usize]];
                            }
                        }
                    }
                }
                out[[o, ix as usize, iy as usize]] = acc;
            }
        }
    }
    out
}

fn scalar_rmse(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    (s / a.len() as f64).sqrt()
}

fn scalar_r(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (mut ma, mut mb) = (0.0, 0.0);
    for i in 0..a.len() {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    sab / (saa * sbb).sqrt()
}

fn oracle_equivalence() -> Outcome {
    let mut sparse = 0.0f64;
    for g in 0..50u64 {
        let n = 1 + (g as usize % 10);
        let topo = random_graph(n, 0.4, g);
        let h = random_matrix(n, 4, g + 1);
        let x = random_matrix(n, 2, g + 2);
        let a = random_matrix(topo.n_directed(), N_EDGE_ATTRIBUTES, g + 3);
        let e = EgcnLayer::new("e", 4, 4, 8, 6, &mut ChaCha8Rng::seed_from_u64(g + 100));
        let (h1, x1, _) = e.forward(&h, &x, &topo, &a).unwrap();
        let (h2, x2) = dense_egcn(&e, &h, &x, &topo, &a);
        let gl = GcnLayer::new("g", 4, 3, &mut ChaCha8Rng::seed_from_u64(g + 200));
        let (y1, _) = gl.forward(&h, &topo).unwrap();
        let y2 = dense_gcn(&h, &gl.weight.value, &topo);
        sparse = sparse
            .max(max_abs_diff(&h1, &h2))
            .max(max_abs_diff(&x1, &x2))
            .max(max_abs_diff(&y1, &y2));
    }

    let mut conv = 0.0f64;
    for seed in 0..20u64 {
        let grid = random_matrix(3, 9 * 7, seed).into_shape_with_order((3, 9, 7)).unwrap();
        let k = random_matrix(4, 27, seed + 50).into_shape_with_order((4, 3, 3, 3)).unwrap();
        let d = (&conv2d_forward(&grid, &k).unwrap() - &naive_conv(&grid, &k))
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        conv = conv.max(d);
    }

    let mut stats = 0.0f64;
    for seed in 0..20u64 {
        let n = 10 + 37 * seed as usize;
        let t: Vec<f64> = random_matrix(n, 1, seed).iter().map(|v| 1000.0 * v).collect();
        let noise = random_matrix(n, 1, seed + 1);
        let p: Vec<f64> = t.iter().zip(noise.iter()).map(|(a, b)| a + 50.0 * b).collect();
        let dr = (rmse(&p, &t) - scalar_rmse(&p, &t)).abs() / scalar_rmse(&p, &t).max(1.0);
        let dc = (pearson_r(&p, &t) - scalar_r(&p, &t)).abs();
        stats = stats.max(dr).max(dc);
    }
    check(
        sparse <= 1e-12 && conv <= 1e-12 && stats <= 1e-12,
        format!("sparse vs dense {sparse:.2e}, conv vs naive {conv:.2e}, metrics vs scalar loops {stats:.2e} (all <= 1e-12)"),
    )
}

// ---------------------------------------------------------------- 5

fn conservation() -> Outcome {
    // Closed domain: no outflow at the front, no SMB, no calving or melt,
    // velocity from the sliding law at every step.
    let cfg = SimConfig {
        fine_edge: 1000.0,
        coarse_edge: 2500.0,
        front_outflow: false,
        ..SimConfig::helheim()
    };
    let sim = Simulator::new(cfg.clone(), 0).map_err(|e| e.to_string())?;
    let mut state = sim.initial.clone();
    state.smb.fill(0.0);
    let v0 = total_volume(&state, &sim.fv);
    let mut deficit = 0.0;
    for _ in 0..100 {
        let (vx, vy) = compute_velocity(&state, &sim.mesh, &cfg);
        state.vx = vx;
        state.vy = vy;
        let vmax = state.vx.iter().zip(&state.vy).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
        let dt = (0.4 * sim.fv.min_edge() / vmax.max(1.0)).min(0.01);
        let (next, b) = sim.fv.advance(&state, dt, &cfg).map_err(|e| e.to_string())?;
        deficit += b.deficit;
        state = next;
    }
    let drift = (total_volume(&state, &sim.fv) - v0).abs() / v0;

    // Sources active: SMB, balance source, calving or melt and front outflow.
    let mut worst = 0.0f64;
    let mut steps = 0;
    for (kind, value) in [(ScenarioKind::Helheim, 0.7e6), (ScenarioKind::Pig, 70.0)] {
        let cfg = SimConfig {
            fine_edge: 1000.0,
            coarse_edge: 2500.0,
            n_steps: 100,
            ..SimConfig::preset(kind)
        };
        let sim = Simulator::new(cfg, 1).map_err(|e| e.to_string())?;
        let traj = sim.run(&kind.params(value).unwrap()).map_err(|e| e.to_string())?;
        for b in &traj.budgets {
            worst = worst.max(b.residual_relative());
            steps += 1;
        }
    }
    check(
        drift <= 1e-8 && deficit == 0.0 && worst <= 1e-6,
        format!(
            "closed-domain drift {drift:.2e} over 100 steps (<= 1e-8, clamped volume {deficit:.1e}); \
             worst budget residual {worst:.2e} over {steps} forced steps (<= 1e-6)"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn scaled_analogue(dir: &Path) -> Outcome {
    let mut config = RunConfig::load(&configs_dir().join("helheim_small.toml")).map_err(|e| e.to_string())?;
    config.out = dir.to_owned();
    let g = cmd_generate(&config).map_err(|e| e.to_string())?;
    let mut detail = vec![format!("{} nodes, {} samples", g.n_nodes, g.n_samples)];
    for kind in ModelKind::ALL {
        let mut c = config.clone();
        c.model = kind;
        let start = Instant::now();
        let s = cmd_train(&c, |_| {}).map_err(|e| format!("{kind}: {e}"))?;
        eprintln!(
            "  trained {kind}: {} train / {} val, best epoch {}, {:.0} s",
            s.n_train,
            s.n_val,
            s.history.best_epoch,
            start.elapsed().as_secs_f64()
        );
    }
    let reports = cmd_evaluate(&config, None).map_err(|e| e.to_string())?;
    let csv = std::fs::read_to_string(Artifacts::new(dir).metrics()).map_err(|e| e.to_string())?;
    let models: std::collections::BTreeSet<&str> =
        csv.lines().skip(1).filter_map(|l| l.split(',').next()).collect();
    if models.len() != 3 {
        return Err(format!("metrics.csv has models {models:?}"));
    }
    for r in &reports {
        let get = |v: &str| r.mean(v).map_or(f64::NAN, |row| row.r);
        detail.push(format!(
            "{} R thickness {:.4} vx {:.4} vy {:.4}",
            r.rows[0].model,
            get("thickness"),
            get("vx"),
            get("vy")
        ));
    }
    let egcn = reports
        .iter()
        .find(|r| r.rows[0].model == "egcn")
        .ok_or("no egcn report")?;
    let r = |v: &str| egcn.mean(v).map_or(f64::NAN, |row| row.r);
    check(
        r("thickness") >= 0.95 && r("vx") >= 0.90 && r("vy") >= 0.90,
        format!("{} (EGCN needs thickness >= 0.95, vx and vy >= 0.90)", detail.join("; ")),
    )
}

// ---------------------------------------------------------------- 7

fn benchmark_protocol(trained: Option<&Path>) -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = RunConfig::load(&configs_dir().join("helheim_small.toml")).map_err(|e| e.to_string())?;
    match trained.filter(|d| Artifacts::new(d).trained_models().len() == 3) {
        Some(dir) => config.out = dir.to_owned(),
        None => {
            // stand-alone: briefly trained models on the same sweep
            config.out = tmp.path().to_owned();
            config.train.epochs = 1;
            cmd_generate(&config).map_err(|e| e.to_string())?;
            for kind in ModelKind::ALL {
                let mut c = config.clone();
                c.model = kind;
                cmd_train(&c, |_| {}).map_err(|e| e.to_string())?;
            }
        }
    }
    let report = cmd_benchmark(&config, None).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(Artifacts::new(&config.out).timing()).map_err(|e| e.to_string())?;
    let json: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let engines = json["engines"].as_array().cloned().unwrap_or_default();
    let ok = ["oracle", "egcn", "gcn", "fcn"].iter().all(|name| {
        engines.iter().any(|e| {
            e["engine"] == *name
                && e["seconds"].as_f64().is_some_and(|s| s > 0.0)
                && e["speedup"].as_f64().is_some_and(|s| s.is_finite() && s > 0.0)
        })
    });
    let summary: Vec<String> = report
        .engines
        .iter()
        .map(|e| format!("{} {:.3} s ({:.2}x)", e.engine, e.seconds, e.speedup))
        .collect();
    check(
        ok && report.scenarios.len() == 7,
        format!("{} scenarios: {}", report.scenarios.len(), summary.join(", ")),
    )
}

// ---------------------------------------------------------------- 8

fn determinism() -> Outcome {
    let text = r#"
scenario = "helheim"
seed = 5

[sim]
fine_edge = 1500.0
coarse_edge = 4000.0
n_steps = 20
save_every = 5

[arch]
width = 8
mlp_hidden = 8
message = 8
grid_spacing = 2000.0

[train]
epochs = 3
"#;
    let mut hashes = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut config = RunConfig::from_toml(text).map_err(|e| e.to_string())?;
        config.out = dir.path().to_owned();
        cmd_generate(&config).map_err(|e| e.to_string())?;
        let out = Artifacts::new(dir.path());
        let mut h = vec![icegnn::file_sha256(&out.dataset()).map_err(|e| e.to_string())?];
        for kind in ModelKind::ALL {
            let mut c = config.clone();
            c.model = kind;
            cmd_train(&c, |_| {}).map_err(|e| e.to_string())?;
            h.push(icegnn::file_sha256(&out.checkpoint(kind)).map_err(|e| e.to_string())?);
        }
        hashes.push(h);
    }
    check(
        hashes[0] == hashes[1],
        format!("dataset and 3 checkpoints: {} identical of 4", hashes[0].iter().zip(&hashes[1]).filter(|(a, b)| a == b).count()),
    )
}

// ----------------------------------------------------------------

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().map_or(true, |o| o.contains(&k));

    let trained = tempfile::tempdir().expect("tempdir");
    let mut failed = 0;
    let mut report = |k: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(k) {
            return;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {k} ({name}, {secs:.1} s): {detail}");
        std::io::stdout().flush().ok();
    };

    report(1, "split arithmetic", &mut split_counts);
    report(2, "equivariance", &mut equivariance);
    report(3, "gradient correctness", &mut gradients);
    report(4, "oracle equivalence", &mut oracle_equivalence);
    report(5, "simulator conservation", &mut conservation);
    report(6, "scaled analogue", &mut || scaled_analogue(trained.path()));
    report(7, "benchmark protocol", &mut || benchmark_protocol(Some(trained.path())));
    report(8, "determinism", &mut determinism);

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
