use ndarray::{Array2, Array3, Array4};
use rand::Rng;

use super::{check_targets, Architecture, Emulator, GraphInput, N_INPUTS, N_OUTPUTS};
use crate::error::{Error, Result};
use crate::mesh::MeshGridMap;
use crate::ndnn::{
    leaky_relu, leaky_relu_backward, Param, Parameterized, LEAKY_SLOPE,
};

const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// Zero-padded 3×3 cross-correlation of a `C × nx × ny` grid with a
/// `C_out × C × 3 × 3` kernel (indexed `[o, c, kx, ky]`).
pub fn conv2d_forward(grid: &Array3<f64>, kernel: &Array4<f64>) -> Result<Array3<f64>> {
    let (c_in, nx, ny) = grid.dim();
    let (c_out, kc, kx, ky) = kernel.dim();
    if kx != KERNEL || ky != KERNEL {
        return Err(Error::ShapeMismatch {
            op: "conv2d_forward (kernel must be 3x3)",
            left: vec![KERNEL, KERNEL],
            right: vec![kx, ky],
        });
    }
    if kc != c_in {
        return Err(Error::ShapeMismatch {
            op: "conv2d_forward",
            left: vec![c_in],
            right: vec![kc],
        });
    }
    let mut input = Array2::zeros((nx * ny, c_in));
    for c in 0..c_in {
        for iy in 0..ny {
            for ix in 0..nx {
                input[[iy * nx + ix, c]] = grid[[c, ix, iy]];
            }
        }
    }
    let mut weight = Array2::zeros((c_in * TAPS, c_out));
    for o in 0..c_out {
        for c in 0..c_in {
            for kx in 0..KERNEL {
                for ky in 0..KERNEL {
                    weight[[c * TAPS + ky * KERNEL + kx, o]] = kernel[[o, c, kx, ky]];
                }
            }
        }
    }
    let out = im2col(&input, nx, ny).dot(&weight);
    let mut result = Array3::zeros((c_out, nx, ny));
    for o in 0..c_out {
        for iy in 0..ny {
            for ix in 0..nx {
                result[[o, ix, iy]] = out[[iy * nx + ix, o]];
            }
        }
    }
    Ok(result)
}

/// Patch matrix: row `iy * nx + ix`, column `c * 9 + ky * 3 + kx` holds
/// `input[(iy + ky - 1) * nx + ix + kx - 1, c]`, or 0 outside the grid.
fn im2col(input: &Array2<f64>, nx: usize, ny: usize) -> Array2<f64> {
    let c_in = input.ncols();
    let mut cols = Array2::zeros((nx * ny, c_in * TAPS));
    for iy in 0..ny {
        for ix in 0..nx {
            let mut row = cols.row_mut(iy * nx + ix);
            for ky in 0..KERNEL {
                let Some(sy) = (iy + ky).checked_sub(1).filter(|&y| y < ny) else {
                    continue;
                };
                for kx in 0..KERNEL {
                    let Some(sx) = (ix + kx).checked_sub(1).filter(|&x| x < nx) else {
                        continue;
                    };
                    let src = input.row(sy * nx + sx);
                    let tap = ky * KERNEL + kx;
                    for c in 0..c_in {
                        row[c * TAPS + tap] = src[c];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
fn col2im(cols: &Array2<f64>, c_in: usize, nx: usize, ny: usize) -> Array2<f64> {
    let mut out = Array2::zeros((nx * ny, c_in));
    for iy in 0..ny {
        for ix in 0..nx {
            let row = cols.row(iy * nx + ix);
            for ky in 0..KERNEL {
                let Some(sy) = (iy + ky).checked_sub(1).filter(|&y| y < ny) else {
                    continue;
                };
                for kx in 0..KERNEL {
                    let Some(sx) = (ix + kx).checked_sub(1).filter(|&x| x < nx) else {
                        continue;
                    };
                    let mut dst = out.row_mut(sy * nx + sx);
                    let tap = ky * KERNEL + kx;
                    for c in 0..c_in {
                        dst[c] += row[c * TAPS + tap];
                    }
                }
            }
        }
    }
    out
}

/// 3×3 convolution with bias on grids stored as `(nx·ny) × C` matrices,
/// rows indexed `iy * nx + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    /// `(C_in · 9) × C_out`.
    pub weight: Param,
    pub bias: Param,
}

#[derive(Debug, Clone)]
pub struct Conv2dCache {
    cols: Array2<f64>,
    c_in: usize,
}

impl Conv2d {
    pub fn new<R: Rng>(name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Conv2d {
            weight: Param::glorot(
                format!("{name}.weight"),
                inputs * TAPS,
                outputs,
                inputs * TAPS,
                outputs * TAPS,
                rng,
            ),
            bias: Param::zeros(format!("{name}.bias"), 1, outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.nrows() / TAPS
    }

    pub fn forward(&self, x: &Array2<f64>, nx: usize, ny: usize) -> Result<(Array2<f64>, Conv2dCache)> {
        if x.dim() != (nx * ny, self.inputs()) {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                left: vec![nx * ny, self.inputs()],
                right: x.shape().to_vec(),
            });
        }
        let cols = im2col(x, nx, ny);
        let y = cols.dot(&self.weight.value) + &self.bias.value;
        Ok((
            y,
            Conv2dCache {
                cols,
                c_in: x.ncols(),
            },
        ))
    }

    pub fn backward(&mut self, cache: &Conv2dCache, dy: &Array2<f64>, nx: usize, ny: usize) -> Array2<f64> {
        self.weight.grad += &cache.cols.t().dot(dy);
        self.bias.grad += &dy.sum_axis(ndarray::Axis(0)).insert_axis(ndarray::Axis(0));
        col2im(&dy.dot(&self.weight.value.t()), cache.c_in, nx, ny)
    }
}

impl Parameterized for Conv2d {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Fully convolutional baseline on a regular grid.
///
/// Node inputs are interpolated onto the grid, passed through an input
/// convolution, the hidden convolutions (each followed by leaky ReLU) and a
/// linear output convolution. Training compares against targets
/// interpolated onto the grid; predictions are interpolated back to the
/// mesh nodes.
#[derive(Debug, Clone)]
pub struct FcnModel {
    pub arch: Architecture,
    pub map: MeshGridMap,
    pub input: Conv2d,
    pub layers: Vec<Conv2d>,
    pub output: Conv2d,
    valid: Vec<bool>,
}

struct Forward {
    pred: Array2<f64>,
    caches: Vec<Conv2dCache>,
    pre_activations: Vec<Array2<f64>>,
}

impl FcnModel {
    pub fn new<R: Rng>(arch: &Architecture, map: MeshGridMap, rng: &mut R) -> Self {
        let w = arch.width;
        FcnModel {
            arch: *arch,
            input: Conv2d::new("fcn.input", N_INPUTS, w, rng),
            layers: (0..arch.layers)
                .map(|k| Conv2d::new(&format!("fcn.layer{k}"), w, w, rng))
                .collect(),
            output: Conv2d::new("fcn.output", w, N_OUTPUTS, rng),
            valid: map.valid_mask(),
            map,
        }
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (self.map.spec.nx, self.map.spec.ny)
    }

    /// Interpolates each column of a nodal matrix onto the grid.
    pub fn nodes_to_grid(&self, nodal: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.map.spec.len(), nodal.ncols()));
        for (c, col) in nodal.columns().into_iter().enumerate() {
            let grid = self.map.to_grid(&col.to_vec())?;
            out.column_mut(c).assign(&ndarray::ArrayView1::from(&grid.values));
        }
        Ok(out)
    }

    /// Interpolates each column of a grid matrix back to the mesh nodes.
    pub fn grid_to_nodes(&self, grid: &Array2<f64>) -> Array2<f64> {
        let n = self.map.n_nodes();
        let mut out = Array2::zeros((n, grid.ncols()));
        let mut buf = vec![0.0; n];
        for (c, col) in grid.columns().into_iter().enumerate() {
            self.map.to_mesh_into(&col.to_vec(), &self.valid, &mut buf);
            out.column_mut(c).assign(&ndarray::ArrayView1::from(&buf));
        }
        out
    }

    fn forward_cached(&self, x: &Array2<f64>) -> Result<Forward> {
        let (nx, ny) = self.grid_dims();
        if x.ncols() != N_INPUTS {
            return Err(Error::FeatureCount {
                expected: N_INPUTS,
                found: x.ncols(),
            });
        }
        let mut caches = Vec::with_capacity(self.layers.len() + 2);
        let mut pre_activations = Vec::with_capacity(self.layers.len() + 1);
        let (z, cache) = self.input.forward(x, nx, ny)?;
        let mut h = leaky_relu(&z, LEAKY_SLOPE);
        caches.push(cache);
        pre_activations.push(z);
        for layer in &self.layers {
            let (z, cache) = layer.forward(&h, nx, ny)?;
            h = leaky_relu(&z, LEAKY_SLOPE);
            caches.push(cache);
            pre_activations.push(z);
        }
        let (pred, cache) = self.output.forward(&h, nx, ny)?;
        caches.push(cache);
        Ok(Forward {
            pred,
            caches,
            pre_activations,
        })
    }

    /// Grid-to-grid forward: `(nx·ny) × 10` in, `(nx·ny) × 4` out.
    pub fn forward_grid(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.pred)
    }

    /// MSE over valid grid cells and its gradient.
    fn grid_loss(&self, pred: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
        let count = self.valid.iter().filter(|&&v| v).count().max(1) as f64 * N_OUTPUTS as f64;
        let mut grad = pred - target;
        let mut loss = 0.0;
        for (k, mut row) in grad.rows_mut().into_iter().enumerate() {
            if self.valid[k] {
                loss += row.iter().map(|d| d * d).sum::<f64>();
                row *= 2.0 / count;
            } else {
                row.fill(0.0);
            }
        }
        (loss / count, grad)
    }

    fn check_input(&self, input: &GraphInput) -> Result<()> {
        if input.n_nodes() != self.map.n_nodes() {
            return Err(Error::ShapeMismatch {
                op: "fcn input",
                left: vec![self.map.n_nodes()],
                right: vec![input.n_nodes()],
            });
        }
        if input.features.ncols() != N_INPUTS {
            return Err(Error::FeatureCount {
                expected: N_INPUTS,
                found: input.features.ncols(),
            });
        }
        Ok(())
    }
}

impl Parameterized for FcnModel {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.input.params();
        for l in &self.layers {
            p.extend(l.params());
        }
        p.extend(self.output.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.input.params_mut();
        for l in &mut self.layers {
            p.extend(l.params_mut());
        }
        p.extend(self.output.params_mut());
        p
    }
}

impl Emulator for FcnModel {
    fn architecture(&self) -> Architecture {
        self.arch
    }

    fn predict(&self, input: &GraphInput) -> Result<Array2<f64>> {
        self.check_input(input)?;
        let grid = self.forward_grid(&self.nodes_to_grid(input.features)?)?;
        Ok(self.grid_to_nodes(&grid))
    }

    fn loss(&self, input: &GraphInput, targets: &Array2<f64>) -> Result<f64> {
        self.check_input(input)?;
        check_targets(targets, input.n_nodes())?;
        let pred = self.forward_grid(&self.nodes_to_grid(input.features)?)?;
        Ok(self.grid_loss(&pred, &self.nodes_to_grid(targets)?).0)
    }

    fn loss_and_backward(&mut self, input: &GraphInput, targets: &Array2<f64>) -> Result<f64> {
        self.check_input(input)?;
        check_targets(targets, input.n_nodes())?;
        let (nx, ny) = self.grid_dims();
        let fwd = self.forward_cached(&self.nodes_to_grid(input.features)?)?;
        let (loss, dpred) = self.grid_loss(&fwd.pred, &self.nodes_to_grid(targets)?);
        let n_hidden = self.layers.len();
        let mut dh = self.output.backward(&fwd.caches[n_hidden + 1], &dpred, nx, ny);
        for k in (0..n_hidden).rev() {
            let dz = leaky_relu_backward(&fwd.pre_activations[k + 1], &dh, LEAKY_SLOPE);
            dh = self.layers[k].backward(&fwd.caches[k + 1], &dz, nx, ny);
        }
        let dz = leaky_relu_backward(&fwd.pre_activations[0], &dh, LEAKY_SLOPE);
        self.input.backward(&fwd.caches[0], &dz, nx, ny);
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::testutil::random_matrix;
    use crate::gnn::ModelKind;
    use crate::mesh::{fixtures::lattice, GridSpec, N_EDGE_ATTRIBUTES};
    use crate::ndnn::{grad_check, GradCheckConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive(grid: &Array3<f64>, kernel: &Array4<f64>) -> Array3<f64> {
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
                                    acc += kernel[[o, c, kx as usize, ky as usize]]
                                        * grid[[c, sx as usize, sy as usize]];
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

    fn random3(shape: (usize, usize, usize), seed: u64) -> Array3<f64> {
        let m = random_matrix(shape.0, shape.1 * shape.2, seed);
        m.into_shape_with_order(shape).unwrap()
    }

    #[test]
    fn identity_kernel_is_identity() {
        let grid = random3((2, 5, 4), 1);
        let mut k = Array4::zeros((2, 2, 3, 3));
        k[[0, 0, 1, 1]] = 1.0;
        k[[1, 1, 1, 1]] = 1.0;
        assert_eq!(conv2d_forward(&grid, &k).unwrap(), grid);
    }

    #[test]
    fn ones_kernel_sums_neighborhood() {
        let grid = Array3::ones((1, 5, 5));
        let k = Array4::ones((1, 1, 3, 3));
        let out = conv2d_forward(&grid, &k).unwrap();
        assert_eq!(out[[0, 2, 2]], 9.0);
        assert_eq!(out[[0, 0, 0]], 4.0);
        assert_eq!(out[[0, 0, 2]], 6.0);
    }

    #[test]
    fn non_3x3_kernel_is_rejected() {
        let grid = Array3::ones((1, 5, 5));
        assert!(conv2d_forward(&grid, &Array4::ones((1, 1, 5, 5))).is_err());
        assert!(conv2d_forward(&grid, &Array4::ones((1, 2, 3, 3))).is_err());
    }

    #[test]
    fn matches_naive_loops() {
        for seed in 0..10 {
            let grid = random3((3, 7, 5), seed);
            let k = random_matrix(4, 27, seed + 50).into_shape_with_order((4, 3, 3, 3)).unwrap();
            let diff = (&conv2d_forward(&grid, &k).unwrap() - &naive(&grid, &k))
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(diff <= 1e-12, "{diff}");
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let (nx, ny) = (6, 5);
        let x = random_matrix(nx * ny, 3, 1);
        let t = random_matrix(nx * ny, 2, 2);
        let mut conv = Conv2d::new("c", 3, 2, &mut ChaCha8Rng::seed_from_u64(3));
        let loss = |c: &Conv2d| crate::ndnn::mse_loss(&c.forward(&x, nx, ny).unwrap().0, &t).unwrap().0;
        let report = grad_check(
            &mut conv,
            loss,
            |c| {
                let (y, cache) = c.forward(&x, nx, ny).unwrap();
                let dy = crate::ndnn::mse_loss(&y, &t).unwrap().1;
                c.backward(&cache, &dy, nx, ny);
            },
            &GradCheckConfig::default(),
        );
        assert!(report.passed(), "{report:?}");

        // input gradient through col2im
        let (y, cache) = conv.forward(&x, nx, ny).unwrap();
        let dx = conv.clone().backward(&cache, &crate::ndnn::mse_loss(&y, &t).unwrap().1, nx, ny);
        let f = |x: &Array2<f64>| crate::ndnn::mse_loss(&conv.forward(x, nx, ny).unwrap().0, &t).unwrap().0;
        for idx in [(0, 0), (7, 2), (29, 1)] {
            let (mut p, mut m) = (x.clone(), x.clone());
            p[idx] += 1e-6;
            m[idx] -= 1e-6;
            let num = (f(&p) - f(&m)) / 2e-6;
            assert!(crate::ndnn::relative_error(dx[idx], num, 1e-6) < 1e-5);
        }
    }

    fn small_model(width: usize, seed: u64) -> FcnModel {
        // 4 x 4 lattice over 7 km with 1 km cells: an 8 x 8 grid
        let mesh = lattice(4, 4, 7000.0, 7000.0);
        let spec = GridSpec::covering(&mesh, 1000.0).unwrap();
        assert_eq!((spec.nx, spec.ny), (8, 8));
        let map = MeshGridMap::new(&mesh, spec).unwrap();
        let arch = Architecture::new(ModelKind::Fcn).with_width(width);
        FcnModel::new(&arch, map, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn model_gradients_match_finite_differences() {
        let mut model = small_model(5, 4);
        let n = model.map.n_nodes();
        let topo = crate::mesh::GraphTopology::from_edges(n, &[]).unwrap();
        let a = Array2::zeros((0, N_EDGE_ATTRIBUTES));
        let feats = random_matrix(n, N_INPUTS, 5);
        let pos = Array2::zeros((n, 2));
        let targets = random_matrix(n, N_OUTPUTS, 6);
        let input = GraphInput {
            topology: &topo,
            edge_attrs: &a,
            features: &feats,
            positions: &pos,
        };
        let report = grad_check(
            &mut model,
            |m| m.loss(&input, &targets).unwrap(),
            |m| {
                m.loss_and_backward(&input, &targets).unwrap();
            },
            &GradCheckConfig::default(),
        );
        assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
        assert_eq!(model.predict(&input).unwrap().dim(), (n, N_OUTPUTS));
    }

    #[test]
    fn constant_input_gives_constant_interior() {
        let mesh = lattice(6, 6, 15000.0, 15000.0);
        let spec = GridSpec::covering(&mesh, 1000.0).unwrap();
        let map = MeshGridMap::new(&mesh, spec).unwrap();
        let model = FcnModel::new(
            &Architecture::new(ModelKind::Fcn).with_width(4),
            map,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        let (nx, ny) = model.grid_dims();
        let x = Array2::from_elem((nx * ny, N_INPUTS), 0.3);
        let y = model.forward_grid(&x).unwrap();
        // seven convolutions: boundary effects reach 7 cells in
        let reference = y.row(8 * nx + 8).to_owned();
        for iy in 7..ny - 7 {
            for ix in 7..nx - 7 {
                let d = (&y.row(iy * nx + ix) - &reference).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(d < 1e-12);
            }
        }
    }
}
