//! From oracle trajectories to trained, scored and timed emulators.

mod benchmark;
mod bounds;
pub(crate) mod dataset;
mod metrics;
mod split;
mod train;

pub use benchmark::{benchmark, emulate_trajectory, hardware_string, EngineTiming, TimingReport};
pub use bounds::{NominalBounds, Range, INPUT_NAMES, TARGET_NAMES};
pub use dataset::{
    build_dataset, frozen_edges, node_inputs, node_targets, scaled_positions, Dataset, EdgeMode,
    GraphSample, DATASET_MAGIC, DATASET_VERSION,
};
pub use metrics::{evaluate, pearson_r, report_from, rmse, Collected, MetricRow, MetricsReport, CSV_HEADER};
pub use split::{split_dataset, Split, SplitSpec};
pub use train::{mean_loss, train, EpochRecord, TrainConfig, TrainHistory};
