//! The three emulators: EGCN, GCN and the grid FCN.
//!
//! Each maps the 10 normalized node inputs of a sample to the 4 normalized
//! node outputs `(vx, vy, thickness, mask)` with an input layer, five hidden
//! layers and an output layer. Graph models run on the mesh graph; the FCN
//! runs on a regular grid and its predictions are interpolated back to the
//! mesh nodes.

mod egcn;
mod fcn;
mod gcn;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{GraphTopology, MeshGridMap, N_EDGE_ATTRIBUTES};
use crate::ndnn::{Param, Parameterized};

pub use egcn::{EgcnCache, EgcnLayer, EgcnModel};
pub use fcn::{conv2d_forward, Conv2d, Conv2dCache, FcnModel};
pub use gcn::{gcn_propagate, GcnLayer, GcnModel};

pub const N_INPUTS: usize = 10;
pub const N_OUTPUTS: usize = 4;
pub const HIDDEN_LAYERS: usize = 5;

/// Input columns holding the normalized initial velocity.
pub const VX0_COLUMN: usize = 3;
pub const VY0_COLUMN: usize = 4;

/// Everything a model sees for one sample.
#[derive(Debug, Clone, Copy)]
pub struct GraphInput<'a> {
    pub topology: &'a GraphTopology,
    /// One row per directed edge in CSR order, [`N_EDGE_ATTRIBUTES`] columns.
    pub edge_attrs: &'a Array2<f64>,
    /// N × [`N_INPUTS`].
    pub features: &'a Array2<f64>,
    /// Node coordinates scaled to [-1, 1]; only read by
    /// [`CoordMode::Position`].
    pub positions: &'a Array2<f64>,
}

impl GraphInput<'_> {
    pub fn n_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.topology.n_nodes();
        if self.features.ncols() != N_INPUTS {
            return Err(Error::FeatureCount {
                expected: N_INPUTS,
                found: self.features.ncols(),
            });
        }
        if self.features.nrows() != n || self.positions.dim() != (n, 2) {
            return Err(Error::ShapeMismatch {
                op: "graph input",
                left: vec![n],
                right: vec![self.features.nrows(), self.positions.nrows()],
            });
        }
        if self.edge_attrs.dim() != (self.topology.n_directed(), N_EDGE_ATTRIBUTES) {
            return Err(Error::ShapeMismatch {
                op: "edge attributes",
                left: vec![self.topology.n_directed(), N_EDGE_ATTRIBUTES],
                right: self.edge_attrs.shape().to_vec(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Egcn,
    Gcn,
    Fcn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Egcn, ModelKind::Gcn, ModelKind::Fcn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Egcn => "egcn",
            ModelKind::Gcn => "gcn",
            ModelKind::Fcn => "fcn",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "egcn" => Ok(ModelKind::Egcn),
            "gcn" => Ok(ModelKind::Gcn),
            "fcn" => Ok(ModelKind::Fcn),
            other => Err(Error::InvalidConfig(format!("unknown model `{other}`"))),
        }
    }
}

/// Where the EGCN takes its velocity outputs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// Velocity from the final coordinate embedding, thickness and mask from
    /// the hidden features.
    CoordVelocity,
    /// All four outputs from a linear map of the hidden features.
    AllFromHidden,
}

/// What the EGCN coordinate embedding holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordMode {
    /// `x⁰` is the initial velocity; velocity is read from `x⁵`.
    Velocity,
    /// `x⁰` is the node position; velocity is read from `x⁵ - x⁰`.
    Position,
}

/// Architecture descriptor, stored in checkpoint headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub kind: ModelKind,
    /// Node feature width (or conv channels).
    pub width: usize,
    /// Hidden width of the EGCN MLPs.
    #[serde(default = "default_width")]
    pub mlp_hidden: usize,
    /// EGCN message width.
    #[serde(default = "default_width")]
    pub message: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_head")]
    pub head: HeadMode,
    #[serde(default = "default_coord")]
    pub coord: CoordMode,
    /// FCN grid spacing (m).
    #[serde(default = "default_grid_spacing")]
    pub grid_spacing: f64,
}

fn default_width() -> usize {
    crate::ndnn::DEFAULT_HIDDEN
}
fn default_layers() -> usize {
    HIDDEN_LAYERS
}
fn default_head() -> HeadMode {
    HeadMode::CoordVelocity
}
fn default_coord() -> CoordMode {
    CoordMode::Velocity
}
fn default_grid_spacing() -> f64 {
    1000.0
}

impl Architecture {
    pub fn new(kind: ModelKind) -> Self {
        Architecture {
            kind,
            width: default_width(),
            mlp_hidden: default_width(),
            message: default_width(),
            layers: HIDDEN_LAYERS,
            head: default_head(),
            coord: default_coord(),
            grid_spacing: default_grid_spacing(),
        }
    }

    /// Same architecture with every width set to `w`.
    pub fn with_width(mut self, w: usize) -> Self {
        self.width = w;
        self.mlp_hidden = w;
        self.message = w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.mlp_hidden == 0 || self.message == 0 {
            return Err(Error::InvalidConfig("model widths must be positive".into()));
        }
        if self.kind == ModelKind::Fcn && !(self.grid_spacing > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grid spacing {} must be positive",
                self.grid_spacing
            )));
        }
        Ok(())
    }
}

/// Common interface of the three emulators. Inputs and outputs are in the
/// normalized [-1, 1] space.
pub trait Emulator: Parameterized {
    fn architecture(&self) -> Architecture;

    /// N × 4 predictions at the mesh nodes.
    fn predict(&self, input: &GraphInput) -> Result<Array2<f64>>;

    /// Training loss for one sample.
    fn loss(&self, input: &GraphInput, targets: &Array2<f64>) -> Result<f64>;

    /// Training loss, with its parameter gradients accumulated.
    fn loss_and_backward(&mut self, input: &GraphInput, targets: &Array2<f64>) -> Result<f64>;
}

/// Any of the three emulators.
#[derive(Debug, Clone)]
pub enum Model {
    Egcn(EgcnModel),
    Gcn(GcnModel),
    Fcn(FcnModel),
}

impl Model {
    /// Freshly initialized model. The FCN needs the mesh-grid map.
    pub fn new(arch: &Architecture, seed: u64, map: Option<&MeshGridMap>) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match arch.kind {
            ModelKind::Egcn => Model::Egcn(EgcnModel::new(arch, &mut rng)),
            ModelKind::Gcn => Model::Gcn(GcnModel::new(arch, &mut rng)),
            ModelKind::Fcn => {
                let map = map.ok_or_else(|| {
                    Error::InvalidConfig("the FCN needs a mesh-grid map".into())
                })?;
                Model::Fcn(FcnModel::new(arch, map.clone(), &mut rng))
            }
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.architecture().kind
    }

    fn inner(&self) -> &dyn Emulator {
        match self {
            Model::Egcn(m) => m,
            Model::Gcn(m) => m,
            Model::Fcn(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Emulator {
        match self {
            Model::Egcn(m) => m,
            Model::Gcn(m) => m,
            Model::Fcn(m) => m,
        }
    }
}

impl Parameterized for Model {
    fn params(&self) -> Vec<&Param> {
        self.inner().params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.inner_mut().params_mut()
    }
}

impl Emulator for Model {
    fn architecture(&self) -> Architecture {
        self.inner().architecture()
    }

    fn predict(&self, input: &GraphInput) -> Result<Array2<f64>> {
        self.inner().predict(input)
    }

    fn loss(&self, input: &GraphInput, targets: &Array2<f64>) -> Result<f64> {
        self.inner().loss(input, targets)
    }

    fn loss_and_backward(&mut self, input: &GraphInput, targets: &Array2<f64>) -> Result<f64> {
        self.inner_mut().loss_and_backward(input, targets)
    }
}

fn check_targets(targets: &Array2<f64>, n: usize) -> Result<()> {
    if targets.dim() != (n, N_OUTPUTS) {
        return Err(Error::ShapeMismatch {
            op: "targets",
            left: vec![n, N_OUTPUTS],
            right: targets.shape().to_vec(),
        });
    }
    Ok(())
}
