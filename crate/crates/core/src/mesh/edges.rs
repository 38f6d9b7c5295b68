use ndarray::Array2;

use super::{distance, GraphTopology, TriMesh};
use crate::error::{Error, Result};
use crate::icesim::SimState;

pub const N_EDGE_ATTRIBUTES: usize = 5;

pub const EDGE_ATTRIBUTE_NAMES: [&str; N_EDGE_ATTRIBUTES] =
    ["distance", "surface_slope", "base_slope", "accel_x", "accel_y"];

/// Five attributes per directed edge `i -> j`, rows in the topology's CSR
/// order.
///
/// * `distance`: `|p_j - p_i|` (m)
/// * `surface_slope`, `base_slope`: `(f_j - f_i) / distance`
/// * `accel_x`, `accel_y`: change over one step of the cross-edge velocity
///   difference, divided by `dt` (m/yr per yr)
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAttributes {
    pub values: Array2<f64>,
}

impl EdgeAttributes {
    pub fn n_edges(&self) -> usize {
        self.values.nrows()
    }

    pub fn row(&self, e: usize) -> [f64; N_EDGE_ATTRIBUTES] {
        let r = self.values.row(e);
        [r[0], r[1], r[2], r[3], r[4]]
    }
}

pub fn compute_edge_attributes(
    mesh: &TriMesh,
    topology: &GraphTopology,
    state: &SimState,
    prev_state: &SimState,
    dt: f64,
) -> Result<EdgeAttributes> {
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    let n = mesh.n_nodes();
    if topology.n_nodes() != n || state.n_nodes() != n || prev_state.n_nodes() != n {
        return Err(Error::ShapeMismatch {
            op: "compute_edge_attributes",
            left: vec![n, topology.n_nodes()],
            right: vec![state.n_nodes(), prev_state.n_nodes()],
        });
    }
    let mut values = Array2::zeros((topology.n_directed(), N_EDGE_ATTRIBUTES));
    for (e, mut row) in values.rows_mut().into_iter().enumerate() {
        let (i, j) = (topology.sources()[e], topology.targets()[e]);
        let d = distance(mesh.nodes[i], mesh.nodes[j]);
        if d == 0.0 {
            return Err(Error::CoincidentNodes {
                a: i.min(j),
                b: i.max(j),
            });
        }
        let dvx = (state.vx[j] - state.vx[i]) - (prev_state.vx[j] - prev_state.vx[i]);
        let dvy = (state.vy[j] - state.vy[i]) - (prev_state.vy[j] - prev_state.vy[i]);
        row[0] = d;
        row[1] = (state.surface[j] - state.surface[i]) / d;
        row[2] = (state.bed[j] - state.bed[i]) / d;
        row[3] = dvx / dt;
        row[4] = dvy / dt;
    }
    Ok(EdgeAttributes { values })
}
