//! Experiment harness: problem registry, configuration, sweeps, seed improvement and
//! report files.

pub mod config;
pub mod improve;
pub mod io;
pub mod registry;
pub mod sweep;
pub mod train;

pub use config::{
    ExperimentConfig, ImproveOptions, MetricOptions, NormalizationPolicy, ProblemSpec, SamplerOptions,
};
pub use improve::{improve_seeds, ImprovementReport};
pub use io::{emit_front, read_points, read_sequences};
pub use registry::{Problem, ProblemRegistry};
pub use sweep::{grid, run_sweep, Cell, SweepOutcome, SweepSummary};
pub use train::{train, ModelKind, TrainConfig};
