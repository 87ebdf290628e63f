//! Loss, optimizer, training loop, metrics, the rotated-patch audit and
//! one-axis sweeps.

mod adam;
mod eval;
mod loss;
mod metrics;
mod pipeline;
mod sweep;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use eval::{evaluate, predict_pixels, rotation_audit, AuditReport, PatchSource};
pub use loss::{cross_entropy, targets};
pub use metrics::MetricsReport;
pub use pipeline::{preprocess, run_experiment, ExperimentReport};
pub use sweep::{sweep, SweepAxis, SweepRow};
pub use trainer::{train, train_with_split, EpochRecord, TrainConfig, TrainOutcome, SHUFFLE_STREAM};

#[cfg(test)]
mod tests;
