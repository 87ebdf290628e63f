use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, rotation_audit, AuditReport, PatchSource};
use super::metrics::MetricsReport;
use super::trainer::{train, TrainConfig, TrainOutcome};
use crate::data::{mmnorm, HsiCube, LabelMap};
use crate::error::Result;
use crate::model::ModelConfig;
use crate::mpca::{mpca, plain_pca, MultiviewRepresentation, PcaModel};

/// Min-max normalize, then reduce to `views·view_components` channels with
/// multiview PCA, or with one plain PCA when `use_mpca` is off.
pub fn preprocess(cube: &HsiCube, cfg: &ModelConfig) -> Result<(MultiviewRepresentation, Vec<PcaModel>)> {
    let norm = mmnorm(cube)?;
    if cfg.use_mpca {
        mpca(&norm, cfg.views, cfg.view_components)
    } else {
        plain_pca(&norm, cfg.in_channels())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub test: MetricsReport,
    pub audit: Option<AuditReport>,
    pub best_epoch: usize,
}

/// Preprocess, train and evaluate on the test split of one seeded run.
/// Returns the report, the training outcome and the wall time in seconds.
pub fn run_experiment(
    cube: &HsiCube,
    labels: &LabelMap,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    audit: bool,
) -> Result<(ExperimentReport, TrainOutcome, f64)> {
    let start = Instant::now();
    let (rep, _) = preprocess(cube, model_cfg)?;
    let outcome = train(&rep, labels, model_cfg, train_cfg)?;
    let source = PatchSource::new(&rep.cube, labels, model_cfg.patch_size);
    let test = evaluate(&outcome.params, model_cfg, &source, &outcome.split.test)?;
    let audit = if audit {
        Some(rotation_audit(&outcome.params, model_cfg, &source, &outcome.split.test)?)
    } else {
        None
    };
    let report = ExperimentReport {
        test,
        audit,
        best_epoch: outcome.best_epoch,
    };
    Ok((report, outcome, start.elapsed().as_secs_f64()))
}
