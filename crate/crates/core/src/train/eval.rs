use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::MetricsReport;
use crate::data::{extract_patch_into, HsiCube, LabelMap};
use crate::error::{Error, Result};
use crate::model::{forward, predict, ModelConfig, ModelParams};
use crate::tensor::Tensor;

/// Patches cut on demand from a reduced cube, addressed by flat pixel index.
#[derive(Clone, Copy, Debug)]
pub struct PatchSource<'a> {
    pub cube: &'a HsiCube,
    pub labels: &'a LabelMap,
    pub size: usize,
}

impl<'a> PatchSource<'a> {
    pub fn new(cube: &'a HsiCube, labels: &'a LabelMap, size: usize) -> Self {
        Self { cube, labels, size }
    }

    /// `P×P×C` patch centred on pixel `index`, optionally rotated by 180°.
    pub fn patch(&self, index: usize, rotate: bool) -> Result<Tensor<f32>> {
        let (h, w) = (index / self.cube.width, index % self.cube.width);
        let mut buf = Vec::new();
        extract_patch_into(self.cube, h, w, self.size, &mut buf)?;
        if rotate {
            buf = buf.chunks_exact(self.cube.bands).rev().flatten().copied().collect();
        }
        Tensor::new(&[self.size, self.size, self.cube.bands], buf)
    }
}

pub(crate) fn check_inputs(cfg: &ModelConfig, source: &PatchSource) -> Result<()> {
    cfg.validate()?;
    let (cube, labels) = (source.cube, source.labels);
    if (cube.height, cube.width) != (labels.height, labels.width) {
        return Err(Error::dim(format!(
            "cube is {}×{}, labels are {}×{}",
            cube.height, cube.width, labels.height, labels.width
        )));
    }
    if cube.bands != cfg.in_channels() {
        return Err(Error::dim(format!(
            "cube has {} channels, model expects {}",
            cube.bands,
            cfg.in_channels()
        )));
    }
    if labels.classes != cfg.num_classes {
        return Err(Error::Compatibility(format!(
            "labels have {} classes, model has {}",
            labels.classes, cfg.num_classes
        )));
    }
    Ok(())
}

pub(crate) fn logits_for(
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    source: &PatchSource,
    indices: &[usize],
    rotate: bool,
) -> Result<Vec<Vec<f32>>> {
    indices
        .par_iter()
        .map(|&i| forward(&source.patch(i, rotate)?, params, cfg))
        .collect()
}

/// Predicted class ids (`1..=K`) for the pixels at `indices`.
pub fn predict_pixels(
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    source: &PatchSource,
    indices: &[usize],
    rotate: bool,
) -> Result<Vec<u16>> {
    Ok(logits_for(params, cfg, source, indices, rotate)?
        .iter()
        .map(|l| predict(l))
        .collect())
}

fn report(
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    source: &PatchSource,
    indices: &[usize],
    rotate: bool,
) -> Result<MetricsReport> {
    check_inputs(cfg, source)?;
    if indices.is_empty() {
        return Err(Error::Usage("no test pixels to evaluate".into()));
    }
    let pred = predict_pixels(params, cfg, source, indices, rotate)?;
    let truth: Vec<u16> = indices.iter().map(|&i| source.labels.ids[i]).collect();
    MetricsReport::from_predictions(&truth, &pred, cfg.num_classes)
}

/// Confusion matrix, OA and AA over the pixels at `indices`.
pub fn evaluate(
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    source: &PatchSource,
    indices: &[usize],
) -> Result<MetricsReport> {
    report(params, cfg, source, indices, false)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub original: MetricsReport,
    pub rotated: MetricsReport,
    /// `rotated.oa − original.oa`
    pub delta_oa: f64,
    pub delta_aa: f64,
}

/// Evaluate the same pixels as-is and with every patch rotated by 180°.
pub fn rotation_audit(
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    source: &PatchSource,
    indices: &[usize],
) -> Result<AuditReport> {
    let original = report(params, cfg, source, indices, false)?;
    let rotated = report(params, cfg, source, indices, true)?;
    debug_assert_eq!(original.counts, rotated.counts);
    Ok(AuditReport {
        delta_oa: rotated.oa - original.oa,
        delta_aa: rotated.aa - original.aa,
        original,
        rotated,
    })
}
