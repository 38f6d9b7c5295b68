use ndarray::Array2;
use rand::Rng;

use super::{check_targets, Architecture, Emulator, GraphInput, N_INPUTS, N_OUTPUTS};
use crate::error::{Error, Result};
use crate::mesh::GraphTopology;
use crate::ndnn::{
    leaky_relu, leaky_relu_backward, mse_loss, Linear, Param, Parameterized, LEAKY_SLOPE,
};

/// `D̃^{-1/2} (A + I) D̃^{-1/2} h`, where `D̃` counts the self-loop.
pub fn gcn_propagate(h: &Array2<f64>, topology: &GraphTopology) -> Array2<f64> {
    let scale: Vec<f64> = topology
        .degrees()
        .iter()
        .map(|&d| 1.0 / ((d + 1) as f64).sqrt())
        .collect();
    let mut out = Array2::zeros(h.raw_dim());
    let offsets = topology.offsets();
    let targets = topology.targets();
    for i in 0..topology.n_nodes() {
        let mut row = out.row_mut(i);
        row.scaled_add(scale[i] * scale[i], &h.row(i));
        for &j in &targets[offsets[i]..offsets[i + 1]] {
            row.scaled_add(scale[i] * scale[j], &h.row(j));
        }
    }
    out
}

/// `h' = LeakyReLU(Â h W)`, no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub weight: Param,
}

#[derive(Debug, Clone)]
pub struct GcnCache {
    propagated: Array2<f64>,
    pre_activation: Array2<f64>,
}

impl GcnLayer {
    pub fn new<R: Rng>(name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        GcnLayer {
            weight: Param::glorot(format!("{name}.weight"), inputs, outputs, inputs, outputs, rng),
        }
    }

    pub fn forward(&self, h: &Array2<f64>, topology: &GraphTopology) -> Result<(Array2<f64>, GcnCache)> {
        if h.nrows() != topology.n_nodes() || h.ncols() != self.weight.value.nrows() {
            return Err(Error::ShapeMismatch {
                op: "gcn_layer_forward",
                left: h.shape().to_vec(),
                right: vec![topology.n_nodes(), self.weight.value.nrows()],
            });
        }
        let propagated = gcn_propagate(h, topology);
        let pre_activation = propagated.dot(&self.weight.value);
        let out = leaky_relu(&pre_activation, LEAKY_SLOPE);
        Ok((
            out,
            GcnCache {
                propagated,
                pre_activation,
            },
        ))
    }

    pub fn backward(&mut self, cache: &GcnCache, topology: &GraphTopology, dout: &Array2<f64>) -> Array2<f64> {
        let dz = leaky_relu_backward(&cache.pre_activation, dout, LEAKY_SLOPE);
        self.weight.grad += &cache.propagated.t().dot(&dz);
        // Â is symmetric
        gcn_propagate(&dz.dot(&self.weight.value.t()), topology)
    }
}

impl Parameterized for GcnLayer {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight]
    }
}

/// Input layer, hidden graph convolutions, linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub arch: Architecture,
    pub input: Linear,
    pub layers: Vec<GcnLayer>,
    pub output: Linear,
}

impl GcnModel {
    pub fn new<R: Rng>(arch: &Architecture, rng: &mut R) -> Self {
        let w = arch.width;
        GcnModel {
            arch: *arch,
            input: Linear::new("gcn.input", N_INPUTS, w, rng),
            layers: (0..arch.layers)
                .map(|k| GcnLayer::new(&format!("gcn.layer{k}"), w, w, rng))
                .collect(),
            output: Linear::new("gcn.output", w, N_OUTPUTS, rng),
        }
    }

    fn forward(&self, input: &GraphInput) -> Result<(Array2<f64>, Array2<f64>, Vec<Array2<f64>>, Vec<GcnCache>)> {
        input.validate()?;
        let pre_input = self.input.forward(input.features)?;
        let mut h = leaky_relu(&pre_input, LEAKY_SLOPE);
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = layer.forward(&h, input.topology)?;
            inputs.push(h);
            caches.push(cache);
            h = next;
        }
        let pred = self.output.forward(&h)?;
        inputs.push(h);
        Ok((pred, pre_input, inputs, caches))
    }
}

impl Parameterized for GcnModel {
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

impl Emulator for GcnModel {
    fn architecture(&self) -> Architecture {
        self.arch
    }

    fn predict(&self, input: &GraphInput) -> Result<Array2<f64>> {
        Ok(self.forward(input)?.0)
    }

    fn loss(&self, input: &GraphInput, targets: &Array2<f64>) -> Result<f64> {
        check_targets(targets, input.n_nodes())?;
        Ok(mse_loss(&self.predict(input)?, targets)?.0)
    }

    fn loss_and_backward(&mut self, input: &GraphInput, targets: &Array2<f64>) -> Result<f64> {
        check_targets(targets, input.n_nodes())?;
        let (pred, pre_input, inputs, caches) = self.forward(input)?;
        let (loss, dpred) = mse_loss(&pred, targets)?;
        let mut dh = self.output.backward(inputs.last().expect("output input"), &dpred);
        for (layer, cache) in self.layers.iter_mut().zip(&caches).rev() {
            dh = layer.backward(cache, input.topology, &dh);
        }
        let dz = leaky_relu_backward(&pre_input, &dh, LEAKY_SLOPE);
        self.input.backward(input.features, &dz);
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::testutil::*;
    use crate::gnn::ModelKind;
    use crate::mesh::N_EDGE_ATTRIBUTES;
    use crate::ndnn::{grad_check, GradCheckConfig};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense_reference(h: &Array2<f64>, w: &Array2<f64>, topo: &GraphTopology) -> Array2<f64> {
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

    #[test]
    fn self_loop_only_is_activation() {
        let topo = GraphTopology::from_edges(1, &[]).unwrap();
        let layer = GcnLayer {
            weight: Param::new("w", Array2::eye(3)),
        };
        let h = array![[1.0, -2.0, 0.5]];
        let (out, _) = layer.forward(&h, &topo).unwrap();
        assert_eq!(out, leaky_relu(&h, LEAKY_SLOPE));
    }

    #[test]
    fn two_nodes_by_hand() {
        let topo = GraphTopology::from_edges(2, &[(0, 1)]).unwrap();
        let layer = GcnLayer {
            weight: Param::new("w", Array2::eye(2)),
        };
        let h = array![[1.0, 0.0], [0.0, 1.0]];
        let (out, _) = layer.forward(&h, &topo).unwrap();
        // every c_ij = 2
        assert!(out.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn sparse_matches_dense_reference() {
        for g in 0..50u64 {
            let n = 1 + (g as usize % 10);
            let topo = random_graph(n, 0.3, g);
            let h = random_matrix(n, 4, g + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(g);
            let layer = GcnLayer::new("l", 4, 3, &mut rng);
            let (out, _) = layer.forward(&h, &topo).unwrap();
            let reference = dense_reference(&h, &layer.weight.value, &topo);
            let diff = (&out - &reference).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(diff <= 1e-12, "graph {g}: {diff}");
        }
    }

    #[test]
    fn edgeless_model_is_per_node_mlp() {
        let n = 5;
        let topo = GraphTopology::from_edges(n, &[]).unwrap();
        let a = Array2::zeros((0, N_EDGE_ATTRIBUTES));
        let feats = random_matrix(n, N_INPUTS, 1);
        let pos = Array2::zeros((n, 2));
        let input = GraphInput {
            topology: &topo,
            edge_attrs: &a,
            features: &feats,
            positions: &pos,
        };
        let model = GcnModel::new(
            &Architecture::new(ModelKind::Gcn).with_width(8),
            &mut ChaCha8Rng::seed_from_u64(3),
        );
        let pred = model.predict(&input).unwrap();
        for i in 0..n {
            let row = feats.row(i).insert_axis(ndarray::Axis(0)).to_owned();
            let mut h = leaky_relu(&model.input.forward(&row).unwrap(), LEAKY_SLOPE);
            for l in &model.layers {
                h = leaky_relu(&h.dot(&l.weight.value), LEAKY_SLOPE);
            }
            let y = model.output.forward(&h).unwrap();
            for k in 0..N_OUTPUTS {
                assert!((pred[[i, k]] - y[[0, k]]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn model_gradients_match_finite_differences() {
        let topo = random_graph(12, 0.3, 4);
        let a = random_matrix(topo.n_directed(), N_EDGE_ATTRIBUTES, 5);
        let feats = random_matrix(12, N_INPUTS, 6);
        let pos = random_matrix(12, 2, 7);
        let targets = random_matrix(12, N_OUTPUTS, 8);
        let input = GraphInput {
            topology: &topo,
            edge_attrs: &a,
            features: &feats,
            positions: &pos,
        };
        let mut model = GcnModel::new(
            &Architecture::new(ModelKind::Gcn).with_width(6),
            &mut ChaCha8Rng::seed_from_u64(9),
        );
        let report = grad_check(
            &mut model,
            |m| m.loss(&input, &targets).unwrap(),
            |m| {
                m.loss_and_backward(&input, &targets).unwrap();
            },
            &GradCheckConfig::default(),
        );
        assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
    }
}
