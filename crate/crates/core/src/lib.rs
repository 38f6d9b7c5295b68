//! Graph neural network emulators for finite-element ice-flow simulations.
//!
//! * [`mesh`]: triangle meshes, graph topology, edge attributes, regridding
//! * [`icesim`]: the transient ice-flow oracle that produces training data
//! * [`ndnn`]: dense layers, hand-written gradients, Adam, checkpoints
//! * [`gnn`]: the EGCN, GCN and FCN emulators
//! * [`pipeline`]: datasets, splits, training, metrics and timing
//! * [`cli`]: the `icegnn` command-line workflow

pub mod error;
pub mod gnn;
pub mod icesim;
pub(crate) mod io;
pub mod mesh;
pub mod ndnn;
pub mod pipeline;
pub mod cli;

pub use error::{Error, Result};
pub use io::file_sha256;
