use super::*;
use crate::data::{synth_scene, LabelMap, SplitAssignment, SynthConfig};
use crate::model::{ModelConfig, ModelParams};
use crate::Error;

fn small() -> (crate::mpca::MultiviewRepresentation, LabelMap, ModelConfig) {
    let (cube, labels) = synth_scene(&SynthConfig {
        seed: 2,
        height: 16,
        width: 16,
        bands: 24,
        classes: 3,
        noise_sigma: 0.0,
    })
    .unwrap();
    let cfg = ModelConfig {
        patch_size: 3,
        views: 4,
        view_components: 2,
        k1: 2,
        k2: 8,
        k3: 16,
        heads: 2,
        feature_dim: 8,
        ..Default::default()
    };
    let (rep, _) = preprocess(&cube, &cfg).unwrap();
    (rep, labels, cfg)
}

fn quick(epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        learning_rate: lr,
        seed: 4,
        train_fraction: 0.2,
        val_fraction: 0.1,
        ..Default::default()
    }
}

#[test]
fn zero_lr_keeps_init() {
    let (rep, labels, cfg) = small();
    let out = train(&rep, &labels, &cfg, &quick(3, 0.0)).unwrap();
    assert_eq!(out.params, ModelParams::init(&cfg, 4).unwrap());
    let oas: Vec<_> = out.history.iter().map(|h| h.val_oa).collect();
    assert!(oas.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(out.best_epoch, 1);
}

#[test]
fn same_seed_same_history() {
    let (rep, labels, cfg) = small();
    let a = train(&rep, &labels, &cfg, &quick(4, 1e-2)).unwrap();
    let b = train(&rep, &labels, &cfg, &quick(4, 1e-2)).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
    assert!(a.history.iter().all(|h| h.train_loss.is_finite()));
}

#[test]
fn learns_small_scene() {
    let (rep, labels, cfg) = small();
    let out = train(&rep, &labels, &cfg, &quick(30, 1e-2)).unwrap();
    let first = out.history[0].train_loss;
    let last = out.history.last().unwrap().train_loss;
    assert!(last < first * 0.5, "{first} -> {last}");
    let src = PatchSource::new(&rep.cube, &labels, 3);
    let r = evaluate(&out.params, &cfg, &src, &out.split.test).unwrap();
    assert!(r.oa > 0.8, "{r:?}");
    assert_eq!(r, evaluate(&out.params, &cfg, &src, &out.split.test).unwrap());
    let audit = rotation_audit(&out.params, &cfg, &src, &out.split.test).unwrap();
    assert_eq!(audit.original, r);
    assert_eq!(audit.original.counts, audit.rotated.counts);
    assert_eq!(audit.delta_oa, audit.rotated.oa - audit.original.oa);
}

#[test]
fn empty_train_split_is_config_error() {
    let (rep, labels, cfg) = small();
    let split = SplitAssignment {
        train: vec![],
        val: vec![0],
        test: vec![1],
        seed: 0,
    };
    let err = train_with_split(&rep, &labels, split, &cfg, &quick(1, 1e-3)).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn channel_mismatch_rejected() {
    let (rep, labels, cfg) = small();
    let bad = ModelConfig { views: 3, ..cfg };
    assert!(matches!(train(&rep, &labels, &bad, &quick(1, 1e-3)), Err(Error::Dimension(_))));
}

#[test]
fn empty_eval_is_usage_error() {
    let (rep, labels, cfg) = small();
    let p = ModelParams::init(&cfg, 0).unwrap();
    let src = PatchSource::new(&rep.cube, &labels, 3);
    assert!(matches!(evaluate(&p, &cfg, &src, &[]), Err(Error::Usage(_))));
}

#[test]
fn rotated_patch_reverses_pixels() {
    let (rep, labels, _) = small();
    let src = PatchSource::new(&rep.cube, &labels, 3);
    let a = src.patch(40, false).unwrap();
    let b = src.patch(40, true).unwrap();
    let c = 8;
    for px in 0..9 {
        assert_eq!(&a.data()[px * c..(px + 1) * c], &b.data()[(8 - px) * c..(9 - px) * c]);
    }
}
