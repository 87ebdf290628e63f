use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::eval::{check_inputs, logits_for, PatchSource};
use super::loss;
use crate::data::{stratified_split, LabelMap, SplitAssignment, SplitFractions};
use crate::error::{Error, Result};
use crate::model::{forward_graph, ModelConfig, ModelNodes, ModelParams};
use crate::mpca::MultiviewRepresentation;
use crate::tensor::{ops, GradGraph, Tensor};

/// ChaCha stream for per-epoch shuffles; the split uses stream 0.
pub const SHUFFLE_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            epochs: 300,
            batch_size: 64,
            learning_rate: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            seed: 0,
            train_fraction: 0.05,
            val_fraction: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn fractions(&self) -> SplitFractions {
        SplitFractions::with_train(self.train_fraction, self.val_fraction)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch size must be positive"));
        }
        if !(self.learning_rate >= 0.0) || !(self.eps > 0.0) {
            return Err(Error::config("learning rate must be ≥ 0 and eps > 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("adam betas must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_oa: Option<f64>,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the selected epoch.
    pub params: ModelParams<f32>,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub split: SplitAssignment,
}

/// Split the labels with the training seed, then train.
pub fn train(
    rep: &MultiviewRepresentation,
    labels: &LabelMap,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let split = stratified_split(labels, train_cfg.fractions(), train_cfg.seed)?;
    train_with_split(rep, labels, split, model_cfg, train_cfg)
}

fn sample_gradient(
    params: &ModelParams<f32>,
    mask: &[bool],
    cfg: &ModelConfig,
    patch: Tensor<f32>,
    target: usize,
) -> Result<(f32, Vec<Vec<f32>>)> {
    let mut g = GradGraph::new();
    let nodes = ModelNodes::register(&mut g, params, mask);
    let x = g.input(patch);
    let out = forward_graph(&mut g, &nodes, cfg, x)?;
    let loss = g.cross_entropy(out.logits, &[target])?;
    g.backward(loss)?;
    let grads = nodes
        .all
        .iter()
        .map(|&n| g.grad(n).map(<[f32]>::to_vec).unwrap_or_else(|| vec![0.0; g.value(n).len()]))
        .collect();
    Ok((g.value(loss).data()[0], grads))
}

/// Mean loss and OA of `params` over `indices`.
fn validate(
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    source: &PatchSource,
    indices: &[usize],
) -> Result<(f64, f64)> {
    let logits = logits_for(params, cfg, source, indices, false)?;
    let mut loss = 0.0;
    let mut hits = 0;
    for (&i, l) in indices.iter().zip(&logits) {
        let label = source.labels.ids[i];
        let t = Tensor::new(&[1, l.len()], l.clone())?;
        loss += loss::cross_entropy(&t, &[label])? as f64;
        hits += usize::from(crate::model::predict(l) == label);
    }
    let n = indices.len() as f64;
    Ok((loss / n, hits as f64 / n))
}

/// Adam over shuffled mini-batches, keeping the parameters of the epoch
/// with the best validation OA (ties go to the lower validation loss, then
/// to the earlier epoch). Without a validation split the last epoch wins.
pub fn train_with_split(
    rep: &MultiviewRepresentation,
    labels: &LabelMap,
    split: SplitAssignment,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    let source = PatchSource::new(&rep.cube, labels, model_cfg.patch_size);
    check_inputs(model_cfg, &source)?;
    if split.train.is_empty() {
        return Err(Error::config("training split is empty"));
    }
    let targets = loss::targets(
        &split.train.iter().map(|&i| labels.ids[i]).collect::<Vec<_>>(),
        model_cfg.num_classes,
    )?;

    let mut params = ModelParams::<f32>::init(model_cfg, train_cfg.seed)?;
    let mask = params.trainable(model_cfg);
    let mut state = AdamState::<f32>::new(params.tensors().iter().map(|t| t.len()));
    let adam = train_cfg.adam();
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);

    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut history = Vec::with_capacity(train_cfg.epochs);
    let mut best: Option<(f64, f64, usize, ModelParams<f32>)> = None;

    for epoch in 1..=train_cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(train_cfg.batch_size) {
            let results: Vec<(f32, Vec<Vec<f32>>)> = batch
                .par_iter()
                .map(|&k| {
                    let patch = source.patch(split.train[k], false)?;
                    sample_gradient(&params, &mask, model_cfg, patch, targets[k])
                })
                .collect::<Result<_>>()?;
            let mut sum: Vec<Vec<f32>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
            for (loss, grads) in &results {
                epoch_loss += *loss as f64;
                for (acc, g) in sum.iter_mut().zip(grads) {
                    ops::axpy(acc, 1.0, g);
                }
            }
            let scale = 1.0 / batch.len() as f32;
            sum.iter_mut().flatten().for_each(|v| *v *= scale);
            let grads: Vec<&[f32]> = sum.iter().map(Vec::as_slice).collect();
            let mut slices: Vec<&mut [f32]> = params.tensors_mut().into_iter().map(|t| t.data_mut()).collect();
            adam_step(&mut slices, &grads, &mut state, &adam)?;
        }
        let train_loss = epoch_loss / split.train.len() as f64;
        if !train_loss.is_finite() || !params.all_finite() {
            return Err(Error::Degenerate(format!("non-finite training loss at epoch {epoch}")));
        }
        let (val_loss, val_oa) = if split.val.is_empty() {
            (None, None)
        } else {
            let (l, a) = validate(&params, model_cfg, &source, &split.val)?;
            (Some(l), Some(a))
        };
        debug!("epoch {epoch}: loss {train_loss:.5}, val oa {val_oa:?}");
        let better = match (&best, val_oa, val_loss) {
            (None, _, _) => true,
            (Some(_), None, _) => true,
            (Some((oa, vl, _, _)), Some(a), Some(l)) => a > *oa || (a == *oa && l < *vl),
            _ => false,
        };
        if better {
            best = Some((val_oa.unwrap_or(0.0), val_loss.unwrap_or(0.0), epoch, params.clone()));
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_oa,
            val_loss,
        });
    }
    let (oa, _, best_epoch, params) = best.unwrap();
    info!("kept epoch {best_epoch} (val oa {oa:.4}) of {}", train_cfg.epochs);
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        split,
    })
}
