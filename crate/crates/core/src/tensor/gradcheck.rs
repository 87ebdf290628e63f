use serde::Serialize;

use super::{GradGraph, NodeId, Tensor};
use crate::error::{Error, Result};

/// Central-difference step.
pub const FD_EPS: f64 = 1e-4;

/// Denominator floor for the relative error, so that entries whose true
/// gradient is ~0 are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckEntry {
    pub param: usize,
    pub shape: Vec<usize>,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max)
    }
}

fn evaluate<F>(model_fn: &F, params: &[Tensor<f64>]) -> Result<f64>
where
    F: Fn(&mut GradGraph<f64>, &[NodeId]) -> Result<NodeId>,
{
    let mut g = GradGraph::new();
    let ids: Vec<_> = params.iter().map(|p| g.input(p.clone())).collect();
    let loss = model_fn(&mut g, &ids)?;
    Ok(g.value(loss).data()[0])
}

/// Compare reverse-mode gradients of a scalar `model_fn` against central
/// differences, element by element, for every tensor in `params`.
///
/// `model_fn` receives a fresh graph and the node ids of `params` (in order)
/// and returns the loss node. It must be deterministic.
pub fn check_gradients<F>(model_fn: F, params: &[Tensor<f64>], tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut GradGraph<f64>, &[NodeId]) -> Result<NodeId>,
{
    let mut g = GradGraph::new();
    let ids: Vec<_> = params.iter().map(|p| g.param(p)).collect();
    let loss = model_fn(&mut g, &ids)?;
    g.backward(loss)?;

    let mut work: Vec<Tensor<f64>> = params.to_vec();
    let mut entries = Vec::with_capacity(params.len());
    for (pi, id) in ids.iter().enumerate() {
        let analytic = g
            .grad(*id)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::Usage(format!("parameter {pi} is not reachable from the loss")))?;
        let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
        for e in 0..work[pi].len() {
            let orig = work[pi].data()[e];
            work[pi].data_mut()[e] = orig + FD_EPS;
            let up = evaluate(&model_fn, &work)?;
            work[pi].data_mut()[e] = orig - FD_EPS;
            let down = evaluate(&model_fn, &work)?;
            work[pi].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * FD_EPS);
            let abs = (analytic[e] - numeric).abs();
            let rel = abs / analytic[e].abs().max(numeric.abs()).max(REL_FLOOR);
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(rel);
        }
        entries.push(GradCheckEntry {
            param: pi,
            shape: params[pi].shape().to_vec(),
            max_rel_err: max_rel,
            max_abs_err: max_abs,
            passed: max_rel < tolerance,
        });
    }
    Ok(GradCheckReport { entries, tolerance })
}
