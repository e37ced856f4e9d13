//! Joint optimization: label-smoothed objectives, Adam with warmup,
//! early-stopped epochs, checkpoint ring buffer and averaging.

pub mod adam;
pub mod average;
pub mod loss;
pub mod schedule;
pub mod trainer;

pub use adam::{adam_step, OptimizerState};
pub use average::average_checkpoints;
pub use loss::{label_smoothed_loss, total_loss};
pub use schedule::lr_at;
pub use trainer::{
    list_checkpoints, train, validation_score, EpochRecord, StepRecord, TrainData, TrainLog,
    TrainOutcome, TrainSettings, ValMetric,
};
