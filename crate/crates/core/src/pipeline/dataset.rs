//! Graph samples built from oracle trajectories, and the dataset file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::bounds::{checked_normalize, NominalBounds, INPUT_NAMES, TARGET_NAMES};
use crate::error::{Error, Result};
use crate::gnn::{GraphInput, N_INPUTS, N_OUTPUTS};
use crate::icesim::{ScenarioKind, SimState, Trajectory};
use crate::io::{read_f64s, read_preamble, write_f64s, write_preamble};
use crate::mesh::{
    build_topology, compute_edge_attributes, GraphTopology, TriMesh, EDGE_ATTRIBUTE_NAMES,
    N_EDGE_ATTRIBUTES,
};

pub const DATASET_MAGIC: &[u8; 8] = b"ICEGNNDS";
pub const DATASET_VERSION: u32 = 1;

/// Which oracle states the edge attributes are computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// From the initial state of each scenario (acceleration 0). These are
    /// available at inference time.
    #[default]
    Frozen,
    /// From the target step and the step before it.
    PerStep,
}

/// One training instance: a scenario parameter and a saved step.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    pub param: f64,
    pub step: usize,
    pub time: f64,
    /// N × 10, normalized.
    pub inputs: Array2<f64>,
    /// N × 4 `(vx, vy, thickness, mask)`, normalized.
    pub targets: Array2<f64>,
    /// Index into [`Dataset::edge_blocks`].
    pub edge_block: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: ScenarioKind,
    pub bounds: NominalBounds,
    pub edge_mode: EdgeMode,
    pub mesh: TriMesh,
    pub topology: GraphTopology,
    /// Node coordinates centred on the mesh and scaled by half its largest
    /// extent.
    pub positions: Array2<f64>,
    /// Scenario parameters in generation order.
    pub params: Vec<f64>,
    /// Normalized edge attributes, shared between samples where possible.
    pub edge_blocks: Vec<Array2<f64>>,
    pub samples: Vec<GraphSample>,
}

/// Normalized node inputs for `param` at `time`, from a scenario's initial
/// state. Column order follows [`INPUT_NAMES`].
pub fn node_inputs(initial: &SimState, param: f64, time: f64, bounds: &NominalBounds) -> Result<Array2<f64>> {
    let n = initial.n_nodes();
    let mut x = Array2::zeros((n, N_INPUTS));
    let b = &bounds.inputs;
    let p = checked_normalize(&b[0], param, INPUT_NAMES[0])?;
    let t = checked_normalize(&b[1], time, INPUT_NAMES[1])?;
    for k in 0..n {
        let raw = [
            initial.smb[k],
            initial.vx[k],
            initial.vy[k],
            initial.surface[k],
            initial.bed[k],
            initial.thickness[k],
            f64::from(u8::from(initial.mask[k])),
        ];
        let mut row = x.row_mut(k);
        row[0] = p;
        row[1] = t;
        for (c, v) in raw.into_iter().enumerate() {
            row[c + 2] = checked_normalize(&b[c + 2], v, INPUT_NAMES[c + 2])
                .map_err(|e| at_node(e, k))?;
        }
        row[9] = 1.0;
    }
    Ok(x)
}

/// Normalized `(vx, vy, thickness, mask)` of a state.
pub fn node_targets(state: &SimState, bounds: &NominalBounds) -> Result<Array2<f64>> {
    let n = state.n_nodes();
    let mut y = Array2::zeros((n, N_OUTPUTS));
    for k in 0..n {
        let raw = [
            state.vx[k],
            state.vy[k],
            state.thickness[k],
            f64::from(u8::from(state.mask[k])),
        ];
        for (c, v) in raw.into_iter().enumerate() {
            y[[k, c]] = checked_normalize(&bounds.targets[c], v, TARGET_NAMES[c])
                .map_err(|e| at_node(e, k))?;
        }
    }
    Ok(y)
}

fn at_node(e: Error, node: usize) -> Error {
    match e {
        Error::OutOfBounds {
            variable,
            value,
            lo,
            hi,
        } => Error::OutOfBounds {
            variable: format!("{variable} at node {node}"),
            value,
            lo,
            hi,
        },
        Error::NonFinite(m) => Error::NonFinite(format!("{m} at node {node}")),
        other => other,
    }
}

fn in_context(e: Error, scenario: &str, step: usize) -> Error {
    match e {
        Error::OutOfBounds {
            variable,
            value,
            lo,
            hi,
        } => Error::OutOfBounds {
            variable: format!("{variable} (scenario {scenario}, step {step})"),
            value,
            lo,
            hi,
        },
        Error::NonFinite(m) => Error::NonFinite(format!("{m} (scenario {scenario}, step {step})")),
        other => other,
    }
}

fn normalized_edges(
    mesh: &TriMesh,
    topology: &GraphTopology,
    state: &SimState,
    prev: &SimState,
    dt: f64,
    bounds: &NominalBounds,
) -> Result<Array2<f64>> {
    let mut attrs = compute_edge_attributes(mesh, topology, state, prev, dt)?.values;
    for (e, mut row) in attrs.rows_mut().into_iter().enumerate() {
        for c in 0..N_EDGE_ATTRIBUTES {
            row[c] = checked_normalize(&bounds.edges[c], row[c], EDGE_ATTRIBUTE_NAMES[c]).map_err(|err| {
                match err {
                    Error::OutOfBounds { variable, value, lo, hi } => Error::OutOfBounds {
                        variable: format!("{variable} on directed edge {e}"),
                        value,
                        lo,
                        hi,
                    },
                    other => other,
                }
            })?;
        }
    }
    Ok(attrs)
}

/// Normalized edge attributes of a scenario's initial state, as used in
/// [`EdgeMode::Frozen`].
pub fn frozen_edges(
    mesh: &TriMesh,
    topology: &GraphTopology,
    initial: &SimState,
    bounds: &NominalBounds,
) -> Result<Array2<f64>> {
    normalized_edges(mesh, topology, initial, initial, 1.0, bounds)
}

/// Scaled node coordinates used by the position-embedding EGCN variant.
pub fn scaled_positions(mesh: &TriMesh) -> Array2<f64> {
    let (lo, hi) = mesh.bounding_box();
    let centre = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let half = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let mut p = Array2::zeros((mesh.n_nodes(), 2));
    for (k, node) in mesh.nodes.iter().enumerate() {
        p[[k, 0]] = (node[0] - centre[0]) / half;
        p[[k, 1]] = (node[1] - centre[1]) / half;
    }
    p
}

/// One sample per saved state of every trajectory. Inputs come from the
/// scenario's initial state plus its parameter and the sample time;
/// targets are the state at that step.
pub fn build_dataset(
    trajectories: &[Trajectory],
    mesh: &TriMesh,
    bounds: &NominalBounds,
    edge_mode: EdgeMode,
) -> Result<Dataset> {
    bounds.validate()?;
    let first = trajectories
        .first()
        .ok_or_else(|| Error::InvalidConfig("no trajectories to build a dataset from".into()))?;
    let kind = first.params.kind();
    let topology = build_topology(mesh)?;
    let n = mesh.n_nodes();
    let mut edge_blocks = Vec::new();
    let mut samples = Vec::new();
    let mut params = Vec::with_capacity(trajectories.len());
    for traj in trajectories {
        let id = traj.params.id();
        if traj.params.kind() != kind {
            return Err(Error::InvalidConfig(format!(
                "scenario {id} is not a {kind:?} scenario"
            )));
        }
        let initial = traj
            .states
            .first()
            .ok_or_else(|| Error::InvalidConfig(format!("scenario {id} has no states")))?;
        for s in &traj.states {
            if s.n_nodes() != n {
                return Err(Error::ShapeMismatch {
                    op: "build_dataset (trajectory vs mesh)",
                    left: vec![s.n_nodes()],
                    right: vec![n],
                });
            }
        }
        let param = traj.params.value();
        params.push(param);
        if edge_mode == EdgeMode::Frozen {
            edge_blocks.push(
                frozen_edges(mesh, &topology, initial, bounds)
                    .map_err(|e| in_context(e, &id, 0))?,
            );
        }
        for (step, state) in traj.states.iter().enumerate() {
            let ctx = |e| in_context(e, &id, step);
            let inputs = node_inputs(initial, param, state.time, bounds).map_err(ctx)?;
            let targets = node_targets(state, bounds).map_err(ctx)?;
            if edge_mode == EdgeMode::PerStep {
                let prev = &traj.states[step.saturating_sub(1)];
                let dt = if step == 0 { 1.0 } else { state.time - prev.time };
                edge_blocks.push(
                    normalized_edges(mesh, &topology, state, prev, dt, bounds).map_err(ctx)?,
                );
            }
            samples.push(GraphSample {
                param,
                step,
                time: state.time,
                inputs,
                targets,
                edge_block: edge_blocks.len() - 1,
            });
        }
    }
    Ok(Dataset {
        kind,
        bounds: bounds.clone(),
        edge_mode,
        positions: scaled_positions(mesh),
        mesh: mesh.clone(),
        topology,
        params,
        edge_blocks,
        samples,
    })
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: ScenarioKind,
    bounds: NominalBounds,
    bounds_hash: String,
    edge_mode: EdgeMode,
    n_nodes: usize,
    n_directed_edges: usize,
    n_edge_blocks: usize,
    params: Vec<f64>,
    samples: Vec<SampleMeta>,
    mesh: TriMesh,
}

#[derive(Serialize, Deserialize)]
struct SampleMeta {
    param: f64,
    step: usize,
    time: f64,
    edge_block: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn bounds_hash(&self) -> String {
        self.bounds.hash()
    }

    /// Model input view of sample `k`.
    pub fn input(&self, k: usize) -> GraphInput<'_> {
        let s = &self.samples[k];
        GraphInput {
            topology: &self.topology,
            edge_attrs: &self.edge_blocks[s.edge_block],
            features: &s.inputs,
            positions: &self.positions,
        }
    }

    /// Physical units from normalized `(vx, vy, thickness, mask)` columns.
    pub fn denormalize_targets(&self, y: &Array2<f64>) -> Array2<f64> {
        let mut out = y.clone();
        for (c, mut col) in out.columns_mut().into_iter().enumerate() {
            let r = self.bounds.targets[c];
            col.mapv_inplace(|u| r.denormalize(u));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header = Header {
            kind: self.kind,
            bounds: self.bounds.clone(),
            bounds_hash: self.bounds_hash(),
            edge_mode: self.edge_mode,
            n_nodes: self.n_nodes(),
            n_directed_edges: self.topology.n_directed(),
            n_edge_blocks: self.edge_blocks.len(),
            params: self.params.clone(),
            samples: self
                .samples
                .iter()
                .map(|s| SampleMeta {
                    param: s.param,
                    step: s.step,
                    time: s.time,
                    edge_block: s.edge_block,
                })
                .collect(),
            mesh: self.mesh.clone(),
        };
        let mut w = BufWriter::new(File::create(path)?);
        write_preamble(&mut w, DATASET_MAGIC, DATASET_VERSION, &header)?;
        for block in &self.edge_blocks {
            write_f64s(&mut w, block.iter().copied())?;
        }
        for s in &self.samples {
            write_f64s(&mut w, s.inputs.iter().copied())?;
            write_f64s(&mut w, s.targets.iter().copied())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|_| Error::MissingArtifact(path.to_owned()))?;
        let mut r = BufReader::new(file);
        let h: Header = read_preamble(&mut r, DATASET_MAGIC, DATASET_VERSION, path)?;
        if h.bounds.hash() != h.bounds_hash {
            return Err(Error::format(path, "stored bounds hash does not match the bounds"));
        }
        h.mesh
            .validate()
            .map_err(|e| Error::format(path, format!("embedded mesh: {e}")))?;
        let topology = build_topology(&h.mesh)?;
        if topology.n_directed() != h.n_directed_edges || h.mesh.n_nodes() != h.n_nodes {
            return Err(Error::format(path, "mesh does not match the recorded graph size"));
        }
        let truncated = |_| Error::format(path, "truncated dataset body");
        let (n, ne) = (h.n_nodes, h.n_directed_edges);
        let mut edge_blocks = Vec::with_capacity(h.n_edge_blocks);
        for _ in 0..h.n_edge_blocks {
            let v = read_f64s(&mut r, ne * N_EDGE_ATTRIBUTES).map_err(truncated)?;
            edge_blocks.push(Array2::from_shape_vec((ne, N_EDGE_ATTRIBUTES), v).expect("sized"));
        }
        let mut samples = Vec::with_capacity(h.samples.len());
        for m in h.samples {
            if m.edge_block >= edge_blocks.len() {
                return Err(Error::format(path, format!("edge block {} out of range", m.edge_block)));
            }
            let inputs = read_f64s(&mut r, n * N_INPUTS).map_err(truncated)?;
            let targets = read_f64s(&mut r, n * N_OUTPUTS).map_err(truncated)?;
            samples.push(GraphSample {
                param: m.param,
                step: m.step,
                time: m.time,
                inputs: Array2::from_shape_vec((n, N_INPUTS), inputs).expect("sized"),
                targets: Array2::from_shape_vec((n, N_OUTPUTS), targets).expect("sized"),
                edge_block: m.edge_block,
            });
        }
        Ok(Dataset {
            kind: h.kind,
            bounds: h.bounds,
            edge_mode: h.edge_mode,
            positions: scaled_positions(&h.mesh),
            mesh: h.mesh,
            topology,
            params: h.params,
            edge_blocks,
            samples,
        })
    }
}
