//! Training loop, optimizer, data streams, checkpointing, evaluation.

pub mod adam;
pub mod checkpoint;
pub mod data;
pub mod eval;
pub mod trainer;

pub use adam::Adam;
pub use checkpoint::{
    load_checkpoint, load_model, read_manifest, save_checkpoint, CheckpointManifest, TensorRecord,
};
pub use data::{load_training_data, IndexStream, StreamState, TrainerData};
pub use eval::{clamp_01, evaluate, EvalReport, EvalRow};
pub use trainer::{moving_average, LogRecord, Trainer, TrainerState};
