//! Hyperspectral image super-resolution toolkit.
//!
//! Implements the full desk-scale pipeline: raster ingestion and patch
//! preparation, spectral-mixup augmentation, RGB spectral interpolation,
//! camera-response projection, a grouped-convolution multi-task network with
//! shared encoder and task-specific decoders, alternating four-loss training
//! with semi-supervised cross-model consistency, and a six-metric evaluation
//! harness.

pub mod augment;
pub mod config;
pub mod crf;
pub mod error;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod nn;
pub mod resample;
pub mod train;
pub mod types;

pub use config::{load_run_config, RunConfig};
pub use error::{Error, Result};
pub use metrics::MetricReport;
pub use net::{Model, NetworkConfig};
pub use train::{evaluate, load_checkpoint, save_checkpoint, Trainer};
pub use types::{
    make_group_plan, validate_cube, BatchCounts, GroupPlan, HsiCube, Raster, RgbImage,
    ScaleConfig, TrainConfig,
};
