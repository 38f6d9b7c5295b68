use ndarray::{s, Array2, Axis};
use rand::Rng;

use super::{
    check_targets, Architecture, CoordMode, Emulator, GraphInput, HeadMode, N_INPUTS, N_OUTPUTS,
    VX0_COLUMN, VY0_COLUMN,
};
use crate::error::{Error, Result};
use crate::mesh::{GraphTopology, N_EDGE_ATTRIBUTES};
use crate::ndnn::{
    leaky_relu, leaky_relu_backward, mse_loss, Linear, Mlp, MlpCache, Param, Parameterized,
    LEAKY_SLOPE,
};

/// One equivariant graph convolution.
///
/// For every directed edge `i -> j` (`j` a neighbor of `i`):
///
/// ```text
/// m_ij = φ_e(h_i, h_j, |x_i - x_j|², a_ij)
/// x'_i = x_i + C_i Σ_j (x_i - x_j) φ_x(m_ij)
/// m_i  = C_i Σ_j m_ij
/// h'_i = φ_h(h_i, m_i)
/// ```
///
/// with `C_i = 1 / |𝒩(i)|`, and 0 for isolated nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EgcnLayer {
    pub phi_e: Mlp,
    pub phi_x: Mlp,
    pub phi_h: Mlp,
}

#[derive(Debug, Clone)]
pub struct EgcnCache {
    phi_e: MlpCache,
    phi_x: MlpCache,
    phi_h: MlpCache,
    /// `x_i - x_j` per directed edge.
    diff: Array2<f64>,
    /// `φ_x(m_ij)` per directed edge.
    weight: Array2<f64>,
    norm: Vec<f64>,
    in_width: usize,
}

impl EgcnLayer {
    pub fn new<R: Rng>(
        name: &str,
        in_width: usize,
        out_width: usize,
        mlp_hidden: usize,
        message: usize,
        rng: &mut R,
    ) -> Self {
        EgcnLayer {
            phi_e: Mlp::new(
                &format!("{name}.phi_e"),
                2 * in_width + 1 + N_EDGE_ATTRIBUTES,
                mlp_hidden,
                message,
                rng,
            ),
            phi_x: Mlp::new(&format!("{name}.phi_x"), message, mlp_hidden, 1, rng),
            phi_h: Mlp::new(&format!("{name}.phi_h"), in_width + message, mlp_hidden, out_width, rng),
        }
    }

    /// Builds a layer from given MLPs, checking that their widths chain.
    pub fn from_mlps(phi_e: Mlp, phi_x: Mlp, phi_h: Mlp) -> Result<Self> {
        let f = phi_h.inputs().checked_sub(phi_e.outputs());
        let ok = phi_x.outputs() == 1
            && phi_x.inputs() == phi_e.outputs()
            && f.is_some_and(|f| phi_e.inputs() == 2 * f + 1 + N_EDGE_ATTRIBUTES);
        if !ok {
            return Err(Error::ShapeMismatch {
                op: "EgcnLayer::from_mlps",
                left: vec![phi_e.inputs(), phi_e.outputs(), phi_x.inputs(), phi_x.outputs()],
                right: vec![phi_h.inputs(), phi_h.outputs()],
            });
        }
        Ok(EgcnLayer { phi_e, phi_x, phi_h })
    }

    pub fn in_width(&self) -> usize {
        self.phi_h.inputs() - self.phi_e.outputs()
    }

    pub fn out_width(&self) -> usize {
        self.phi_h.outputs()
    }

    pub fn message_width(&self) -> usize {
        self.phi_e.outputs()
    }

    pub fn forward(
        &self,
        h: &Array2<f64>,
        x: &Array2<f64>,
        topology: &GraphTopology,
        edge_attrs: &Array2<f64>,
    ) -> Result<(Array2<f64>, Array2<f64>, EgcnCache)> {
        let f = self.in_width();
        let n = topology.n_nodes();
        let ne = topology.n_directed();
        if h.dim() != (n, f) || x.dim() != (n, 2) {
            return Err(Error::ShapeMismatch {
                op: "egcn_layer_forward",
                left: vec![n, f, 2],
                right: [h.shape(), x.shape()].concat(),
            });
        }
        if edge_attrs.dim() != (ne, N_EDGE_ATTRIBUTES) {
            return Err(Error::ShapeMismatch {
                op: "egcn_layer_forward (edge attributes)",
                left: vec![ne, N_EDGE_ATTRIBUTES],
                right: edge_attrs.shape().to_vec(),
            });
        }
        let (src, dst) = (topology.sources(), topology.targets());
        let mut edge_in = Array2::zeros((ne, 2 * f + 1 + N_EDGE_ATTRIBUTES));
        let mut diff = Array2::zeros((ne, 2));
        for e in 0..ne {
            let (i, j) = (src[e], dst[e]);
            let dx = x[[i, 0]] - x[[j, 0]];
            let dy = x[[i, 1]] - x[[j, 1]];
            diff[[e, 0]] = dx;
            diff[[e, 1]] = dy;
            let mut row = edge_in.row_mut(e);
            row.slice_mut(s![..f]).assign(&h.row(i));
            row.slice_mut(s![f..2 * f]).assign(&h.row(j));
            row[2 * f] = dx * dx + dy * dy;
            row.slice_mut(s![2 * f + 1..]).assign(&edge_attrs.row(e));
        }
        let (messages, phi_e) = self.phi_e.forward(&edge_in)?;
        let (weight, phi_x) = self.phi_x.forward(&messages)?;

        let norm = topology.norm().to_vec();
        let offsets = topology.offsets();
        let mut aggregate = Array2::zeros((n, self.message_width()));
        let mut x_new = x.clone();
        for i in 0..n {
            let range = offsets[i]..offsets[i + 1];
            if range.is_empty() {
                continue;
            }
            let c = norm[i];
            let mut acc = aggregate.row_mut(i);
            let (mut sx, mut sy) = (0.0, 0.0);
            for e in range {
                acc += &messages.row(e);
                sx += diff[[e, 0]] * weight[[e, 0]];
                sy += diff[[e, 1]] * weight[[e, 0]];
            }
            acc *= c;
            x_new[[i, 0]] += c * sx;
            x_new[[i, 1]] += c * sy;
        }
        let mut node_in = Array2::zeros((n, f + self.message_width()));
        node_in.slice_mut(s![.., ..f]).assign(h);
        node_in.slice_mut(s![.., f..]).assign(&aggregate);
        let (h_new, phi_h) = self.phi_h.forward(&node_in)?;
        Ok((
            h_new,
            x_new,
            EgcnCache {
                phi_e,
                phi_x,
                phi_h,
                diff,
                weight,
                norm,
                in_width: f,
            },
        ))
    }

    /// Accumulates parameter gradients and returns `(dL/dh, dL/dx)`.
    pub fn backward(
        &mut self,
        cache: &EgcnCache,
        topology: &GraphTopology,
        dh_out: &Array2<f64>,
        dx_out: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let f = cache.in_width;
        let n = topology.n_nodes();
        let ne = topology.n_directed();
        let (src, dst) = (topology.sources(), topology.targets());

        let d_node_in = self.phi_h.backward(&cache.phi_h, dh_out);
        let mut dh = d_node_in.slice(s![.., ..f]).to_owned();
        let d_aggregate = d_node_in.slice(s![.., f..]);

        let mut dx = dx_out.clone();
        let mut d_messages = Array2::zeros((ne, self.message_width()));
        let mut d_weight = Array2::zeros((ne, 1));
        for e in 0..ne {
            let (i, j) = (src[e], dst[e]);
            let c = cache.norm[i];
            d_messages
                .row_mut(e)
                .scaled_add(c, &d_aggregate.row(i));
            let (gx, gy) = (c * dx_out[[i, 0]], c * dx_out[[i, 1]]);
            d_weight[[e, 0]] = gx * cache.diff[[e, 0]] + gy * cache.diff[[e, 1]];
            let w = cache.weight[[e, 0]];
            dx[[i, 0]] += w * gx;
            dx[[i, 1]] += w * gy;
            dx[[j, 0]] -= w * gx;
            dx[[j, 1]] -= w * gy;
        }
        d_messages += &self.phi_x.backward(&cache.phi_x, &d_weight);
        let d_edge_in = self.phi_e.backward(&cache.phi_e, &d_messages);
        for e in 0..ne {
            let (i, j) = (src[e], dst[e]);
            let row = d_edge_in.row(e);
            dh.row_mut(i).scaled_add(1.0, &row.slice(s![..f]));
            dh.row_mut(j).scaled_add(1.0, &row.slice(s![f..2 * f]));
            let dd = 2.0 * row[2 * f];
            let (ex, ey) = (cache.diff[[e, 0]], cache.diff[[e, 1]]);
            dx[[i, 0]] += dd * ex;
            dx[[i, 1]] += dd * ey;
            dx[[j, 0]] -= dd * ex;
            dx[[j, 1]] -= dd * ey;
        }
        debug_assert_eq!(dh.nrows(), n);
        (dh, dx)
    }
}

impl Parameterized for EgcnLayer {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.phi_e.params();
        p.extend(self.phi_x.params());
        p.extend(self.phi_h.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.phi_e.params_mut();
        p.extend(self.phi_x.params_mut());
        p.extend(self.phi_h.params_mut());
        p
    }
}

/// Input layer, hidden EGCN layers, output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EgcnModel {
    pub arch: Architecture,
    pub input: Linear,
    pub layers: Vec<EgcnLayer>,
    pub output: Linear,
}

struct Forward {
    pred: Array2<f64>,
    pre_input: Array2<f64>,
    hidden: Array2<f64>,
    caches: Vec<EgcnCache>,
}

impl EgcnModel {
    pub fn new<R: Rng>(arch: &Architecture, rng: &mut R) -> Self {
        let w = arch.width;
        let input = Linear::new("egcn.input", N_INPUTS, w, rng);
        let layers = (0..arch.layers)
            .map(|k| EgcnLayer::new(&format!("egcn.layer{k}"), w, w, arch.mlp_hidden, arch.message, rng))
            .collect();
        let head_width = match arch.head {
            HeadMode::CoordVelocity => 2,
            HeadMode::AllFromHidden => N_OUTPUTS,
        };
        let output = Linear::new("egcn.output", w, head_width, rng);
        EgcnModel {
            arch: *arch,
            input,
            layers,
            output,
        }
    }

    fn initial_coords(&self, input: &GraphInput) -> Array2<f64> {
        match self.arch.coord {
            CoordMode::Velocity => input.features.slice(s![.., VX0_COLUMN..=VY0_COLUMN]).to_owned(),
            CoordMode::Position => input.positions.clone(),
        }
    }

    fn forward(&self, input: &GraphInput) -> Result<Forward> {
        input.validate()?;
        let pre_input = self.input.forward(input.features)?;
        let mut h = leaky_relu(&pre_input, LEAKY_SLOPE);
        let x0 = self.initial_coords(input);
        let mut x = x0.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (h2, x2, cache) = layer.forward(&h, &x, input.topology, input.edge_attrs)?;
            h = h2;
            x = x2;
            caches.push(cache);
        }
        let head = self.output.forward(&h)?;
        let pred = match self.arch.head {
            HeadMode::AllFromHidden => head,
            HeadMode::CoordVelocity => {
                let vel = match self.arch.coord {
                    CoordMode::Velocity => x,
                    CoordMode::Position => x - &x0,
                };
                ndarray::concatenate(Axis(1), &[vel.view(), head.view()]).expect("equal rows")
            }
        };
        Ok(Forward {
            pred,
            pre_input,
            hidden: h,
            caches,
        })
    }
}

impl Parameterized for EgcnModel {
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

impl Emulator for EgcnModel {
    fn architecture(&self) -> Architecture {
        self.arch
    }

    fn predict(&self, input: &GraphInput) -> Result<Array2<f64>> {
        Ok(self.forward(input)?.pred)
    }

    fn loss(&self, input: &GraphInput, targets: &Array2<f64>) -> Result<f64> {
        check_targets(targets, input.n_nodes())?;
        Ok(mse_loss(&self.predict(input)?, targets)?.0)
    }

    fn loss_and_backward(&mut self, input: &GraphInput, targets: &Array2<f64>) -> Result<f64> {
        check_targets(targets, input.n_nodes())?;
        let fwd = self.forward(input)?;
        let (loss, dpred) = mse_loss(&fwd.pred, targets)?;
        let n = input.n_nodes();
        let (mut dx, d_head) = match self.arch.head {
            HeadMode::AllFromHidden => (Array2::zeros((n, 2)), dpred),
            HeadMode::CoordVelocity => (
                dpred.slice(s![.., ..2]).to_owned(),
                dpred.slice(s![.., 2..]).to_owned(),
            ),
        };
        let mut dh = self.output.backward(&fwd.hidden, &d_head);
        for (layer, cache) in self.layers.iter_mut().zip(&fwd.caches).rev() {
            let (a, b) = layer.backward(cache, input.topology, &dh, &dx);
            dh = a;
            dx = b;
        }
        let dz = leaky_relu_backward(&fwd.pre_input, &dh, LEAKY_SLOPE);
        self.input.backward(input.features, &dz);
        Ok(loss)
    }
}
